#include "seatlab/training.hpp"

#include <cstdio>
#include <stdexcept>

#include "seatlab/ops.hpp"

namespace seatlab {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t generator_init_seed(std::uint64_t seed) { return splitmix(seed * 4 + 1); }
std::uint64_t discriminator_init_seed(std::uint64_t seed) { return splitmix(seed * 4 + 2); }
std::uint64_t sampler_seed(std::uint64_t seed) { return splitmix(seed * 4 + 3); }

void TrainConfig::validate() const {
  if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!(psi >= 0 && psi <= 1)) throw std::invalid_argument("psi must lie in [0, 1]");
  if (!(beta >= 0)) throw std::invalid_argument("beta must be non-negative");
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  if (!(lr_g >= 0) || !(lr_d >= 0)) throw std::invalid_argument("learning rates must be non-negative");
  if (image_size == 0 || image_size % SegNetG::kDownsampling != 0) {
    throw std::invalid_argument("image_size must be a positive multiple of 8");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw std::invalid_argument("widths must be positive");
  }
  if (n_train_src == 0 || n_train_trg == 0 || n_eval_trg == 0) {
    throw std::invalid_argument("n_train_src, n_train_trg and n_eval_trg must be at least 1");
  }
  layer_switch.validate(SegNetG::kGroups);
  scene_spec().validate();
}

SegNetConfig TrainConfig::generator_config() const {
  SegNetConfig c;
  c.num_classes = num_classes;
  c.height = image_size;
  c.width = image_size;
  c.widths = widths;
  c.norm_mode = norm_mode;
  return c;
}

DiscriminatorConfig TrainConfig::discriminator_config() const {
  DiscriminatorConfig c;
  c.in_channels = num_classes;
  c.widths = widths;
  return c;
}

SceneSpec TrainConfig::scene_spec() const {
  SceneSpec spec = SceneSpec::defaults(image_size, num_classes);
  spec.style_transfer = style_transfer;
  return spec;
}

SyntheticDataset TrainConfig::make_dataset() const {
  return SyntheticDataset(scene_spec(), n_train_src, n_train_trg, n_eval_trg, n_eval_src, data_seed);
}

TrainingState::TrainingState(const TrainConfig& config)
    : g(config.generator_config(), generator_init_seed(config.seed)),
      d(config.discriminator_config(), discriminator_init_seed(config.seed)),
      opt_g(g.named_parameters(), config.lr_g),
      opt_d(d.named_parameters(), config.lr_d),
      sampler(sampler_seed(config.seed)) {}

GeneratorPhaseResult generator_phase(TrainingState& state, const DomainBatch& src, const TargetSample& trg,
                                     const TrainConfig& config) {
  if (!src.label) throw std::invalid_argument("train_step: source batch has no label");
  if (!trg.batch) throw std::invalid_argument("train_step: missing target batch");
  if (config.stage == 2 && !trg.pseudo) throw std::invalid_argument("train_step: stage 2 needs target pseudo-labels");

  state.opt_g.zero_grad();
  state.opt_d.zero_grad();
  ScopedRequiresGrad freeze_d(state.d.parameters(), false);

  auto [src_l, src_h] = state.g.forward(src.image, Domain::source, StatsMode::batch_update);
  auto [trg_l, trg_h] = state.g.forward(trg.batch->image, Domain::target, StatsMode::batch_update);
  const FusedPrediction src_fused = fuse(src_l, src_h, config.alpha);
  const FusedPrediction trg_fused = fuse(trg_l, trg_h, config.alpha);

  const std::vector<FusedPrediction> src_batch{src_fused};
  const std::vector<FusedPrediction> trg_batch{trg_fused};
  const std::vector<LabelMap> labels{*src.label};
  const Tensor l_seg = loss_seg(src_batch, labels);
  // With beta = 0 the adversarial term carries no gradient; evaluate it on
  // detached maps so the backward pass skips the discriminator entirely.
  const Tensor l_adv = config.beta > 0
                           ? loss_adv(trg_batch, state.d)
                           : loss_adv(std::vector<FusedPrediction>{{trg_fused.probs.detach(), config.alpha}}, state.d);
  std::optional<Tensor> l_st;
  if (config.stage == 2) l_st = loss_st(trg_batch, std::vector<LabelMap>{*trg.pseudo});
  const Tensor total = loss_ssn(l_adv, l_seg, config.beta, l_st);
  total.backward();
  state.opt_g.step();

  GeneratorPhaseResult r;
  r.losses.l_seg = l_seg.item();
  r.losses.l_adv = l_adv.item();
  r.losses.l_st = l_st ? l_st->item() : Real{0};
  r.losses.l_ssn = total.item();
  r.losses.beta = config.beta;
  r.source = {src_fused.probs.detach(), config.alpha};
  r.target = {trg_fused.probs.detach(), config.alpha};
  return r;
}

Real discriminator_phase(TrainingState& state, const FusedPrediction& src, const FusedPrediction& trg) {
  state.opt_g.zero_grad();
  state.opt_d.zero_grad();
  const Tensor l_dis = loss_dis(std::vector<FusedPrediction>{{src.probs.detach(), src.alpha}},
                                std::vector<FusedPrediction>{{trg.probs.detach(), trg.alpha}}, state.d);
  l_dis.backward();
  state.opt_d.step();
  return l_dis.item();
}

LossBundle train_step(TrainingState& state, const DomainBatch& src, const TargetSample& trg,
                      const TrainConfig& config) {
  GeneratorPhaseResult g = generator_phase(state, src, trg, config);
  g.losses.l_dis = discriminator_phase(state, g.source, g.target);
  state.opt_d.zero_grad();
  ++state.iteration;
  return g.losses;
}

std::string metrics_csv_header() { return "iter,lr_G,lr_D,l_seg,l_adv,l_dis,l_st,mIoU_target"; }

std::string to_csv(const MetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", row.iter, row.lr_g, row.lr_d,
                row.l_seg, row.l_adv, row.l_dis, row.l_st, row.miou_target);
  return buf;
}

RunResult train_run(const TrainConfig& config, const SyntheticDataset& data, std::span<const LabelMap> pseudo_labels,
                    std::unique_ptr<TrainingState> state, const MetricsObserver& observer) {
  config.validate();
  if (config.stage == 2 && pseudo_labels.size() != data.size(Split::target_train)) {
    throw std::invalid_argument("train_run: stage 2 needs " + std::to_string(data.size(Split::target_train)) +
                                " pseudo-label maps, got " + std::to_string(pseudo_labels.size()));
  }
  if (!state) state = std::make_unique<TrainingState>(config);
  if (state->iteration > config.max_iters) throw std::invalid_argument("train_run: state is past max_iters");

  RunResult result;
  std::uniform_int_distribution<std::size_t> pick_src(0, data.size(Split::source_train) - 1);
  std::uniform_int_distribution<std::size_t> pick_trg(0, data.size(Split::target_train) - 1);

  MetricsRow acc;
  std::size_t acc_n = 0;
  auto emit = [&](std::size_t iter) {
    MetricsRow row;
    row.iter = iter;
    row.lr_g = state->opt_g.lr();
    row.lr_d = state->opt_d.lr();
    if (acc_n) {
      const Real n = static_cast<Real>(acc_n);
      row.l_seg = acc.l_seg / n;
      row.l_adv = acc.l_adv / n;
      row.l_dis = acc.l_dis / n;
      row.l_st = acc.l_st / n;
    }
    row.miou_target = evaluate_split(state->g, data, Split::target_eval, config.alpha).miou;
    result.history.push_back(row);
    if (observer) observer(row);
    acc = {};
    acc_n = 0;
  };

  while (state->iteration < config.max_iters) {
    const std::size_t it = state->iteration;
    state->opt_g.set_lr(poly_lr(it, config.max_iters, config.lr_g));
    state->opt_d.set_lr(poly_lr(it, config.max_iters, config.lr_d));
    const std::size_t si = pick_src(state->sampler);
    const std::size_t ti = pick_trg(state->sampler);
    const DomainBatch src = data.source_train(si);
    const UnlabeledBatch trg = data.target_train(ti);
    const TargetSample sample{&trg, config.stage == 2 ? &pseudo_labels[ti] : nullptr};
    const LossBundle l = train_step(*state, src, sample, config);
    acc.l_seg += l.l_seg;
    acc.l_adv += l.l_adv;
    acc.l_dis += l.l_dis;
    acc.l_st += l.l_st;
    ++acc_n;
    const std::size_t done = state->iteration;
    if (done == config.max_iters || (config.eval_interval && done % config.eval_interval == 0)) emit(done);
  }
  if (result.history.empty()) emit(state->iteration);

  result.state = std::move(state);
  return result;
}

FusedPrediction predict(SegNetG& g, const Tensor& image, Domain domain, Real alpha) {
  ScopedRequiresGrad no_grad(g.parameters(), false);
  auto [f_l, f_h] = g.forward(image, domain, StatsMode::running);
  return fuse(f_l, f_h, alpha);
}

MetricsReport evaluate_split(SegNetG& g, const SyntheticDataset& data, Split split, Real alpha,
                             const LayerSwitchSpec& layer_switch, std::optional<Domain> domain) {
  if (split != Split::target_eval && split != Split::source_eval) {
    throw std::invalid_argument("evaluate_split: only evaluation splits carry labels");
  }
  ScopedLayerSwitch sw(g, layer_switch);
  ConfusionMatrix cm(g.config().num_classes);
  for (std::size_t i = 0; i < data.size(split); ++i) {
    const DomainBatch b = split == Split::target_eval ? data.target_eval(i) : data.source_eval(i);
    const FusedPrediction p = predict(g, b.image, domain.value_or(b.domain), alpha);
    cm.add(argmax_map(p.probs), *b.label);
  }
  return cm.report();
}

}  // namespace seatlab
