#include "seatlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>

namespace seatlab {

std::size_t FeatureHistogram::bin_of(Real value) {
  const Real pos = std::floor((value - kLow) / bin_width());
  if (!(pos > 0)) return 0;  // also catches NaN
  if (pos >= static_cast<Real>(kBins)) return kBins - 1;
  return static_cast<std::size_t>(pos);
}

void FeatureHistogram::add(std::span<const Real> values) {
  for (Real v : values) ++counts[bin_of(v)];
  samples += values.size();
}

Real histogram_l1(const FeatureHistogram& a, const FeatureHistogram& b) {
  if (!a.samples || !b.samples) throw std::invalid_argument("histogram_l1: empty histogram");
  Real d = 0;
  for (std::size_t i = 0; i < FeatureHistogram::kBins; ++i) {
    d += std::abs(static_cast<Real>(a.counts[i]) / static_cast<Real>(a.samples) -
                  static_cast<Real>(b.counts[i]) / static_cast<Real>(b.samples));
  }
  return d;
}

std::vector<FeatureHistogram> collect_feature_histograms(SegNetG& g, std::span<const Tensor> source_images,
                                                         std::span<const Tensor> target_images,
                                                         const std::vector<std::string>& layers) {
  // Map each norm layer to the requested entry it feeds.
  std::map<std::string, std::size_t, std::less<>> owner;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string& name = layers[i];
    std::vector<std::string> members;
    for (int k = 1; k <= g.group_count(); ++k) {
      if (name == SegNetG::group_name(k)) {
        for (DomainNormLayer* n : g.group_norms(k)) members.push_back(n->name());
      }
    }
    if (members.empty()) {
      if (!g.find_norm(name)) throw std::invalid_argument("histograms: unknown layer '" + name + "'");
      members.push_back(name);
    }
    for (const auto& m : members) {
      if (!owner.emplace(m, i).second) throw std::invalid_argument("histograms: layer '" + m + "' requested twice");
    }
  }

  std::vector<FeatureHistogram> out;
  for (Domain d : {Domain::source, Domain::target}) {
    for (const auto& name : layers) {
      FeatureHistogram h;
      h.layer = name;
      h.domain = d;
      out.push_back(std::move(h));
    }
  }
  const PreAffineHook hook = [&](std::string_view layer, Domain domain, std::span<const Real> values) {
    auto it = owner.find(layer);
    if (it == owner.end()) return;
    out[(domain == Domain::source ? 0 : layers.size()) + it->second].add(values);
  };
  ScopedRequiresGrad no_grad(g.parameters(), false);
  for (const Tensor& img : source_images) g.forward(img, Domain::source, StatsMode::batch_frozen, &hook);
  for (const Tensor& img : target_images) g.forward(img, Domain::target, StatsMode::batch_frozen, &hook);
  return out;
}

std::vector<FeatureHistogram> collect_feature_histograms(SegNetG& g, const SyntheticDataset& data,
                                                         std::size_t batches, const std::vector<std::string>& layers) {
  if (batches > data.size(Split::source_train) || batches > data.size(Split::target_train)) {
    throw std::invalid_argument("histograms: more batches than training images");
  }
  std::vector<Tensor> src, trg;
  for (std::size_t i = 0; i < batches; ++i) {
    src.push_back(data.source_train(i).image);
    trg.push_back(data.target_train(i).image);
  }
  return collect_feature_histograms(g, src, trg, layers);
}

void write_histograms_csv(std::ostream& out, const std::vector<FeatureHistogram>& hists) {
  out << "layer,domain,bin_left,count\n";
  char buf[64];
  for (const auto& h : hists) {
    for (std::size_t b = 0; b < FeatureHistogram::kBins; ++b) {
      std::snprintf(buf, sizeof buf, "%.6g", FeatureHistogram::bin_left(b));
      out << h.layer << ',' << to_string(h.domain) << ',' << buf << ',' << h.counts[b] << '\n';
    }
  }
}

Real train_and_evaluate(const TrainConfig& config) {
  const SyntheticDataset data = config.make_dataset();
  RunResult r = train_run(config, data);
  return evaluate_split(r.state->g, data, Split::target_eval, config.alpha, config.layer_switch).miou;
}

Real median(std::vector<Real> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2;
}

AlphaSweep sweep_alpha(const TrainConfig& base, const std::vector<Real>& alphas, const std::vector<std::uint64_t>& seeds,
                       const TrialRunner& runner) {
  if (alphas.empty() || seeds.empty()) throw std::invalid_argument("sweep_alpha: empty alpha or seed list");
  for (Real a : alphas) {
    if (!(a >= 0 && a <= 1)) throw std::invalid_argument("sweep_alpha: alpha " + std::to_string(a) + " outside [0, 1]");
  }
  AlphaSweep s;
  s.alphas = alphas;
  s.seeds = seeds;
  for (Real a : alphas) {
    std::vector<Real> row;
    for (std::uint64_t seed : seeds) {
      TrainConfig c = base;
      c.alpha = a;
      c.seed = seed;
      row.push_back(runner(c));
    }
    s.median_miou.push_back(median(row));
    s.miou.push_back(std::move(row));
  }
  const auto zero = std::find(alphas.begin(), alphas.end(), Real{0});
  if (zero != alphas.end()) {
    const Real ref = s.median_miou[static_cast<std::size_t>(zero - alphas.begin())];
    for (Real m : s.median_miou) s.range.push_back(m - ref);
  }
  return s;
}

void write_alpha_sweep_csv(std::ostream& out, const AlphaSweep& sweep) {
  char buf[64];
  auto row = [&](const char* name, const std::vector<Real>& values, const char* fmt) {
    out << name;
    for (Real v : values) {
      std::snprintf(buf, sizeof buf, fmt, v);
      out << ',' << buf;
    }
    out << '\n';
  };
  row("alpha", sweep.alphas, "%g");
  row("mIoU", sweep.median_miou, "%.6f");
  if (!sweep.range.empty()) row("range", sweep.range, "%+.6f");
}

std::vector<LayerSwitchSpec> default_switch_specs() {
  std::vector<LayerSwitchSpec> specs{LayerSwitchSpec{}};
  for (int start = SegNetG::kGroups; start >= 1; --start) {
    specs.push_back(LayerSwitchSpec{std::make_pair(start, SegNetG::kGroups)});
  }
  return specs;
}

std::vector<SwitchResult> sweep_layer_switch(SegNetG& g, const SyntheticDataset& data,
                                             const std::vector<LayerSwitchSpec>& specs, Real alpha) {
  for (const auto& s : specs) s.validate(g.group_count());
  std::vector<SwitchResult> out;
  for (const auto& s : specs) out.push_back({s, evaluate_split(g, data, Split::target_eval, alpha, s).miou});
  return out;
}

void write_switch_sweep_csv(std::ostream& out, const std::vector<SwitchResult>& results) {
  out << "switch,mIoU\n";
  char buf[64];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%.6f", r.miou);
    out << (r.spec.empty() ? std::string("none") : r.spec.to_string()) << ',' << buf << '\n';
  }
}

namespace {

Rgb class_colour(std::uint8_t c) {
  static constexpr Rgb kColours[] = {
      {0.50, 0.50, 0.50}, {0.90, 0.10, 0.10}, {0.10, 0.75, 0.20}, {0.15, 0.35, 0.95},
      {0.95, 0.85, 0.10}, {0.80, 0.20, 0.85}, {0.10, 0.85, 0.85}, {0.95, 0.55, 0.10},
  };
  if (c == kIgnoreIndex) return {0, 0, 0};
  return kColours[c % std::size(kColours)];
}

}  // namespace

Tensor colorize(const LabelMap& labels) {
  const std::size_t hw = labels.height * labels.width;
  Tensor out({3, labels.height, labels.width});
  auto d = out.data();
  for (std::size_t p = 0; p < hw; ++p) {
    const Rgb c = class_colour(labels.data[p]);
    for (std::size_t ch = 0; ch < 3; ++ch) d[ch * hw + p] = c[ch];
  }
  return out;
}

void write_prediction_ppm(const std::filesystem::path& path, const Tensor& image, const LabelMap& prediction,
                          const LabelMap& ground_truth) {
  const std::size_t h = prediction.height, w = prediction.width;
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != h || image.dim(2) != w ||
      ground_truth.height != h || ground_truth.width != w) {
    throw std::invalid_argument("write_prediction_ppm: image, prediction and ground truth sizes differ");
  }
  const Tensor panels[] = {image, colorize(prediction), colorize(ground_truth)};
  Tensor out({3, h, 3 * w});
  auto d = out.data();
  for (std::size_t k = 0; k < 3; ++k) {
    const auto src = panels[k].data();
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) d[(ch * h + y) * 3 * w + k * w + x] = src[(ch * h + y) * w + x];
      }
    }
  }
  write_ppm(path, out);
}

}  // namespace seatlab
