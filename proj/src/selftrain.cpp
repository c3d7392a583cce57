#include "seatlab/selftrain.hpp"

#include <stdexcept>

namespace seatlab {

PseudoLabelMap pseudo_label_from_probs(const Tensor& probs, Real psi) {
  if (!(psi >= 0 && psi <= 1)) throw std::invalid_argument("pseudo-labels: psi must lie in [0, 1]");
  if (probs.rank() != 3) throw std::invalid_argument("pseudo-labels: expected N×H×W probabilities");
  const std::size_t n = probs.dim(0), h = probs.dim(1), w = probs.dim(2), hw = h * w;
  if (n > kIgnoreIndex) throw std::invalid_argument("pseudo-labels: too many classes");
  const auto d = probs.data();
  PseudoLabelMap out{LabelMap(h, w), 0, psi};
  std::size_t kept = 0;
  for (std::size_t p = 0; p < hw; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < n; ++c) {
      if (d[c * hw + p] > d[best * hw + p]) best = c;
    }
    if (d[best * hw + p] >= psi) {
      out.labels.data[p] = static_cast<std::uint8_t>(best);
      ++kept;
    } else {
      out.labels.data[p] = kIgnoreIndex;
    }
  }
  out.coverage = hw ? static_cast<Real>(kept) / static_cast<Real>(hw) : Real{0};
  return out;
}

std::vector<PseudoLabelMap> gen_pseudo_labels(SegNetG& g, const SyntheticDataset& data, Real psi, Real alpha) {
  if (!(psi >= 0 && psi <= 1)) throw std::invalid_argument("pseudo-labels: psi must lie in [0, 1]");
  std::vector<PseudoLabelMap> out;
  out.reserve(data.size(Split::target_train));
  for (std::size_t i = 0; i < data.size(Split::target_train); ++i) {
    const FusedPrediction p = predict(g, data.target_train(i).image, Domain::target, alpha);
    out.push_back(pseudo_label_from_probs(p.probs, psi));
  }
  return out;
}

Real mean_coverage(const std::vector<PseudoLabelMap>& maps) {
  if (maps.empty()) return 0;
  Real total = 0;
  for (const auto& m : maps) total += m.coverage;
  return total / static_cast<Real>(maps.size());
}

void write_pseudo_labels(const std::filesystem::path& dir, const std::vector<PseudoLabelMap>& maps) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestRecord> records;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const std::string name = "target_train_" + std::to_string(i) + ".pgm";
    write_pgm(dir / name, maps[i].labels);
    records.push_back({"target_train/" + std::to_string(i) + ".ppm", name, Domain::target});
  }
  write_manifest(dir / "manifest.txt", records);
}

std::vector<LabelMap> read_pseudo_labels(const std::filesystem::path& dir) {
  std::vector<LabelMap> out;
  for (const ManifestRecord& r : read_manifest(dir / "manifest.txt")) {
    if (r.label_path == "-") throw std::runtime_error(dir.string() + ": pseudo-label record without a label file");
    out.push_back(read_pgm(dir / r.label_path));
  }
  return out;
}

PipelineResult two_stage_pipeline(const TrainConfig& config, const SyntheticDataset& data,
                                  std::unique_ptr<TrainingState> stage1, const MetricsObserver& stage1_observer,
                                  const MetricsObserver& stage2_observer) {
  TrainConfig c1 = config;
  c1.stage = 1;
  c1.validate();
  PipelineResult r;
  if (stage1 && stage1->iteration < c1.max_iters) {
    throw std::invalid_argument("two_stage_pipeline: stage-1 state has not finished training");
  }
  r.stage1 = train_run(c1, data, {}, std::move(stage1), stage1_observer);
  r.stage1_miou = evaluate_split(r.stage1.state->g, data, Split::target_eval, c1.alpha).miou;

  r.pseudo = gen_pseudo_labels(r.stage1.state->g, data, c1.psi, c1.alpha);
  r.coverage = mean_coverage(r.pseudo);
  std::vector<LabelMap> labels;
  labels.reserve(r.pseudo.size());
  for (const auto& m : r.pseudo) labels.push_back(m.labels);

  TrainConfig c2 = c1;
  c2.stage = 2;
  r.stage2 = train_run(c2, data, labels, nullptr, stage2_observer);
  r.stage2_miou = evaluate_split(r.stage2.state->g, data, Split::target_eval, c2.alpha).miou;
  return r;
}

}  // namespace seatlab
