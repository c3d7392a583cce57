#include "seatlab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "seatlab/checkpoint.hpp"
#include "seatlab/config.hpp"
#include "seatlab/evaluation.hpp"
#include "seatlab/grad_suite.hpp"
#include "seatlab/selftrain.hpp"

namespace seatlab {

namespace fs = std::filesystem;

namespace {

// Config-field flags shared by every subcommand that builds a TrainConfig.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "Flat key=value config file");
    for (const std::string& key : config_keys()) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      std::string names = "--" + dashed;
      if (dashed != key) names += ",--" + key;
      if (key == "norm_mode") names += ",--norm";
      if (key == "layer_switch") names += ",--switch";
      options.emplace_back(key, app->add_option(names, values[key], "Config field " + key)
                                    ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast));
    }
  }

  // defaults (or `base`) < SEATLAB_SEED < config file < flags
  TrainConfig resolve(TrainConfig base, bool env_seed, std::ostream& log) const {
    if (env_seed) {
      if (const char* s = std::getenv("SEATLAB_SEED"); s && *s) {
        set_config_value(base, "seed", s);
        log << "config: seed=" << s << " (from SEATLAB_SEED)\n";
      }
    }
    std::map<std::string, std::string> from_file;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw std::runtime_error("cannot open config " + config_file);
      std::ostringstream ss;
      ss << in.rdbuf();
      std::vector<std::string> keys;
      apply_config_text(base, ss.str(), config_file, &keys);
      for (const std::string& key : keys) from_file[key] = get_config_value(base, key);
    }
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      set_config_value(base, key, values.at(key));
      const std::string now = get_config_value(base, key);
      auto it = from_file.find(key);
      if (it != from_file.end() && it->second != now) {
        log << "config: " << key << "=" << now << " (flag overrides config file value " << it->second << ")\n";
      }
    }
    base.validate();
    return base;
  }
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
  }
  return out;
}

template <typename T>
T parse_item(const std::string& s, const char* what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("cannot parse '") + s + "' as " + what);
  }
  return v;
}

class MetricsCsv {
 public:
  MetricsCsv(const fs::path& path, bool append) : path_(path) {
    const bool fresh = !append || !fs::exists(path);
    file_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!file_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    if (fresh) file_ << metrics_csv_header() << '\n';
  }
  void write(const MetricsRow& row) {
    file_ << to_csv(row) << '\n' << std::flush;
    if (!file_) throw std::runtime_error("failed writing " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream file_;
};

MetricsObserver progress(std::ostream& out, MetricsCsv* csv, const std::string& tag = "") {
  return [&out, csv, tag](const MetricsRow& row) {
    if (csv) csv->write(row);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%siter %zu  l_seg %.4f  l_adv %.4f  l_dis %.4f  l_st %.4f  mIoU_target %.4f\n",
                  tag.c_str(), row.iter, row.l_seg, row.l_adv, row.l_dis, row.l_st, row.miou_target);
    out << buf << std::flush;
  };
}

fs::path resolve_checkpoint(const std::string& checkpoint, const std::string& run_dir) {
  if (!checkpoint.empty()) return checkpoint;
  if (!run_dir.empty()) return fs::path(run_dir) / "checkpoint.bin";
  throw std::invalid_argument("need --checkpoint or --run-dir");
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw std::runtime_error("missing " + what + " " + path.string());
}

template <typename Fn>
void with_output(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty()) {
    fn(fallback);
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  fn(f);
  if (!f) throw std::runtime_error("failed writing " + path);
}

void print_report(std::ostream& out, const MetricsReport& r) {
  out << "class,IoU\n";
  char buf[64];
  for (std::size_t c = 0; c < r.num_classes; ++c) {
    if (std::isnan(r.iou[c])) {
      out << c << ",nan\n";
    } else {
      std::snprintf(buf, sizeof buf, "%.6f", r.iou[c]);
      out << c << ',' << buf << '\n';
    }
  }
  std::snprintf(buf, sizeof buf, "%.6f", r.miou);
  out << "mIoU," << buf << '\n';
  if (!r.config_fingerprint.empty()) out << "config," << r.config_fingerprint << "\nseed," << r.seed << '\n';
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Domain-adaptive segmentation laboratory", "seatlab"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, train_flags, pseudo_flags, self_flags, eval_flags, alpha_flags, switch_flags, hist_flags;

  auto* gen = app.add_subcommand("gen-data", "Export the synthetic dataset as PPM/PGM files");
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen_flags.attach(gen);

  auto* train = app.add_subcommand("train", "Train one stage and write a run directory");
  std::string train_dir, pseudo_dir;
  bool resume = false;
  train->add_option("--run-dir", train_dir, "Run directory")->required();
  train->add_option("--pseudo-dir", pseudo_dir, "Pseudo-label directory for stage 2 (default <run-dir>/pseudo)");
  train->add_flag("--resume", resume, "Continue from <run-dir>/checkpoint.bin");
  train_flags.attach(train);

  auto* pseudo = app.add_subcommand("pseudo", "Generate target pseudo-labels from a checkpoint");
  std::string pseudo_ckpt, pseudo_run, pseudo_out;
  pseudo->add_option("--checkpoint", pseudo_ckpt, "Stage-1 checkpoint");
  pseudo->add_option("--run-dir", pseudo_run, "Run directory holding checkpoint.bin");
  pseudo->add_option("--out", pseudo_out, "Output directory (default <run-dir>/pseudo)");
  pseudo_flags.attach(pseudo);

  auto* self = app.add_subcommand("selftrain", "Stage 1, pseudo-labels and stage 2");
  std::string self_dir, self_ckpt;
  self->add_option("--run-dir", self_dir, "Run directory")->required();
  self->add_option("--stage1-checkpoint", self_ckpt, "Reuse a trained stage-1 checkpoint");
  self_flags.attach(self);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt, eval_run, eval_out, eval_split = "target", dump_dir;
  std::size_t dump_count = 8;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file");
  eval->add_option("--run-dir", eval_run, "Run directory holding checkpoint.bin");
  eval->add_option("--split", eval_split, "target or source")->check(CLI::IsMember({"target", "source"}));
  eval->add_option("--out", eval_out, "Write the report here instead of stdout");
  eval->add_option("--dump", dump_dir, "Write image/prediction/ground-truth PPMs here");
  eval->add_option("--dump-count", dump_count, "Number of images to dump");
  eval_flags.attach(eval);

  auto* sweep_a = app.add_subcommand("sweep-alpha", "Train over alpha values and seeds");
  std::string alphas = "0,0.01,0.05,0.1,0.2,0.4", seeds = "1,2,3,4,5", alpha_out;
  sweep_a->add_option("--alphas", alphas, "Comma-separated alpha values");
  sweep_a->add_option("--seeds", seeds, "Comma-separated seeds");
  sweep_a->add_option("--out", alpha_out, "CSV output (default stdout)");
  alpha_flags.attach(sweep_a);

  auto* sweep_s = app.add_subcommand("sweep-switch", "Evaluate layer-switch ranges on one checkpoint");
  std::string switch_ckpt, switch_run, specs = "none,4-4,3-4,2-4,1-4", switch_out;
  sweep_s->add_option("--checkpoint", switch_ckpt, "Checkpoint file");
  sweep_s->add_option("--run-dir", switch_run, "Run directory holding checkpoint.bin");
  sweep_s->add_option("--specs", specs, "Comma-separated switch ranges");
  sweep_s->add_option("--out", switch_out, "CSV output (default stdout)");
  switch_flags.attach(sweep_s);

  auto* hist = app.add_subcommand("histograms", "Pre-affine feature histograms per layer and domain");
  std::string hist_ckpt, hist_run, layers = "layer1,layer2,layer3,layer4", hist_out;
  std::size_t batches = 8;
  hist->add_option("--checkpoint", hist_ckpt, "Checkpoint file");
  hist->add_option("--run-dir", hist_run, "Run directory holding checkpoint.bin");
  hist->add_option("--layers", layers, "Comma-separated layer or group names");
  hist->add_option("--batches", batches, "Images per domain");
  hist->add_option("--out", hist_out, "CSV output (default stdout)");
  hist_flags.attach(hist);

  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  std::size_t grad_seeds = 20;
  Real tolerance = 1e-4;
  grad->add_option("--seeds", grad_seeds, "Random instances per case");
  grad->add_option("--tolerance", tolerance, "Maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "seatlab: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) {
      const TrainConfig cfg = gen_flags.resolve({}, true, err);
      export_dataset(cfg.make_dataset(), gen_out);
      save_config(fs::path(gen_out) / "config.txt", cfg);
      out << "wrote dataset to " << gen_out << '\n';
    } else if (train->parsed()) {
      const TrainConfig cfg = train_flags.resolve({}, true, err);
      const fs::path dir = train_dir;
      fs::create_directories(dir);
      save_config(dir / "config.txt", cfg);
      const SyntheticDataset data = cfg.make_dataset();
      std::vector<LabelMap> labels;
      if (cfg.stage == 2) {
        const fs::path pdir = pseudo_dir.empty() ? dir / "pseudo" : fs::path(pseudo_dir);
        require_file(pdir / "manifest.txt", "pseudo-label manifest (run `seatlab pseudo` first)");
        labels = read_pseudo_labels(pdir);
      }
      std::unique_ptr<TrainingState> state;
      if (resume) {
        require_file(dir / "checkpoint.bin", "checkpoint");
        const CheckpointInfo info = read_checkpoint_info(dir / "checkpoint.bin");
        if (info.config_hash != config_hash(cfg)) {
          throw std::runtime_error("checkpoint in " + dir.string() + " was written with a different config");
        }
        state = load_checkpoint(dir / "checkpoint.bin");
      }
      MetricsCsv csv(dir / "metrics.csv", resume);
      RunResult r = train_run(cfg, data, labels, std::move(state), progress(out, &csv));
      save_checkpoint(dir / "checkpoint.bin", *r.state, cfg);
      out << "checkpoint written to " << (dir / "checkpoint.bin").string() << '\n';
    } else if (pseudo->parsed()) {
      const fs::path ckpt = resolve_checkpoint(pseudo_ckpt, pseudo_run);
      require_file(ckpt, "checkpoint");
      TrainConfig base;
      auto state = load_checkpoint(ckpt, &base);
      const TrainConfig cfg = pseudo_flags.resolve(base, false, err);
      fs::path dest = pseudo_out;
      if (dest.empty()) {
        if (pseudo_run.empty()) throw std::invalid_argument("need --out or --run-dir");
        dest = fs::path(pseudo_run) / "pseudo";
      }
      const SyntheticDataset data = cfg.make_dataset();
      const auto maps = gen_pseudo_labels(state->g, data, cfg.psi, cfg.alpha);
      write_pseudo_labels(dest, maps);
      std::ofstream cov(dest / "coverage.csv");
      cov << "image,coverage\n";
      for (std::size_t i = 0; i < maps.size(); ++i) cov << i << ',' << maps[i].coverage << '\n';
      char buf[96];
      std::snprintf(buf, sizeof buf, "psi %.4g  mean coverage %.4f  (%zu maps)\n", cfg.psi, mean_coverage(maps),
                    maps.size());
      out << buf;
    } else if (self->parsed()) {
      TrainConfig cfg = self_flags.resolve({}, true, err);
      cfg.stage = 1;
      const fs::path dir = self_dir;
      fs::create_directories(dir / "stage1");
      fs::create_directories(dir / "stage2");
      save_config(dir / "config.txt", cfg);
      std::unique_ptr<TrainingState> stage1;
      if (!self_ckpt.empty()) {
        require_file(self_ckpt, "stage-1 checkpoint");
        if (read_checkpoint_info(self_ckpt).config_hash != config_hash(cfg)) {
          err << "warning: stage-1 checkpoint was written with a different config\n";
        }
        stage1 = load_checkpoint(self_ckpt);
      }
      const SyntheticDataset data = cfg.make_dataset();
      MetricsCsv csv1(dir / "stage1" / "metrics.csv", false);
      MetricsCsv csv2(dir / "stage2" / "metrics.csv", false);
      PipelineResult r = two_stage_pipeline(cfg, data, std::move(stage1), progress(out, &csv1, "[stage 1] "),
                                            progress(out, &csv2, "[stage 2] "));
      TrainConfig cfg2 = cfg;
      cfg2.stage = 2;
      save_config(dir / "stage1" / "config.txt", cfg);
      save_config(dir / "stage2" / "config.txt", cfg2);
      save_checkpoint(dir / "stage1" / "checkpoint.bin", *r.stage1.state, cfg);
      save_checkpoint(dir / "stage2" / "checkpoint.bin", *r.stage2.state, cfg2);
      write_pseudo_labels(dir / "pseudo", r.pseudo);
      std::ofstream rep(dir / "report.csv");
      char buf[160];
      std::snprintf(buf, sizeof buf, "stage,mIoU_target,coverage,psi\n1,%.6f,,\n2,%.6f,%.6f,%g\n", r.stage1_miou,
                    r.stage2_miou, r.coverage, cfg.psi);
      rep << buf;
      out << buf;
    } else if (eval->parsed()) {
      const fs::path ckpt = resolve_checkpoint(eval_ckpt, eval_run);
      require_file(ckpt, "checkpoint");
      TrainConfig base;
      auto state = load_checkpoint(ckpt, &base);
      const TrainConfig cfg = eval_flags.resolve(base, false, err);
      const SyntheticDataset data = cfg.make_dataset();
      const Split split = eval_split == "source" ? Split::source_eval : Split::target_eval;
      MetricsReport report = evaluate_split(state->g, data, split, cfg.alpha, cfg.layer_switch);
      report.config_fingerprint = config_fingerprint(cfg);
      report.seed = cfg.seed;
      with_output(eval_out, out, [&](std::ostream& o) { print_report(o, report); });
      if (!dump_dir.empty()) {
        fs::create_directories(dump_dir);
        ScopedLayerSwitch sw(state->g, cfg.layer_switch);
        for (std::size_t i = 0; i < std::min(dump_count, data.size(split)); ++i) {
          const DomainBatch b = split == Split::target_eval ? data.target_eval(i) : data.source_eval(i);
          const LabelMap pred = argmax_map(predict(state->g, b.image, b.domain, cfg.alpha).probs);
          write_prediction_ppm(fs::path(dump_dir) / (std::string(to_string(split)) + "_" + std::to_string(i) + ".ppm"),
                               b.image, pred, *b.label);
        }
      }
    } else if (sweep_a->parsed()) {
      const TrainConfig cfg = alpha_flags.resolve({}, true, err);
      std::vector<Real> alpha_values;
      for (const auto& a : split_list(alphas)) alpha_values.push_back(parse_item<Real>(a, "an alpha value"));
      std::vector<std::uint64_t> seed_values;
      for (const auto& s : split_list(seeds)) seed_values.push_back(parse_item<std::uint64_t>(s, "a seed"));
      const AlphaSweep sweep = sweep_alpha(cfg, alpha_values, seed_values, [&](const TrainConfig& c) {
        const Real m = train_and_evaluate(c);
        char buf[96];
        std::snprintf(buf, sizeof buf, "alpha %g seed %llu: mIoU_target %.4f\n", c.alpha,
                      static_cast<unsigned long long>(c.seed), m);
        err << buf << std::flush;
        return m;
      });
      with_output(alpha_out, out, [&](std::ostream& o) { write_alpha_sweep_csv(o, sweep); });
    } else if (sweep_s->parsed()) {
      const fs::path ckpt = resolve_checkpoint(switch_ckpt, switch_run);
      require_file(ckpt, "checkpoint");
      TrainConfig base;
      auto state = load_checkpoint(ckpt, &base);
      const TrainConfig cfg = switch_flags.resolve(base, false, err);
      std::vector<LayerSwitchSpec> spec_values;
      for (const auto& s : split_list(specs)) spec_values.push_back(LayerSwitchSpec::parse(s));
      const SyntheticDataset data = cfg.make_dataset();
      const auto results = sweep_layer_switch(state->g, data, spec_values, cfg.alpha);
      with_output(switch_out, out, [&](std::ostream& o) { write_switch_sweep_csv(o, results); });
    } else if (hist->parsed()) {
      const fs::path ckpt = resolve_checkpoint(hist_ckpt, hist_run);
      require_file(ckpt, "checkpoint");
      TrainConfig base;
      auto state = load_checkpoint(ckpt, &base);
      const TrainConfig cfg = hist_flags.resolve(base, false, err);
      const SyntheticDataset data = cfg.make_dataset();
      const auto layer_names = split_list(layers);
      const auto hists = collect_feature_histograms(state->g, data, batches, layer_names);
      with_output(hist_out, out, [&](std::ostream& o) { write_histograms_csv(o, hists); });
      for (std::size_t i = 0; i < layer_names.size(); ++i) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s: source/target L1 distance %.4f\n", layer_names[i].c_str(),
                      histogram_l1(hists[i], hists[i + layer_names.size()]));
        err << buf;
      }
    } else if (grad->parsed()) {
      const GradSuiteReport report = run_gradient_suite(grad_seeds, [&](const GradSuiteEntry& e) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-30s max rel error %.3e  (%zu coords, %zu skipped)  %s\n", e.name.c_str(),
                      e.max_rel_error, e.checked, e.skipped,
                      e.max_rel_error < tolerance && e.checked ? "ok" : "FAIL");
        out << buf << std::flush;
      });
      const bool ok = report.passed(tolerance);
      char buf[96];
      std::snprintf(buf, sizeof buf, "worst %.3e, tolerance %.1e: %s\n", report.worst, tolerance, ok ? "PASS" : "FAIL");
      out << buf;
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "seatlab " << app.get_subcommands().front()->get_name() << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace seatlab
