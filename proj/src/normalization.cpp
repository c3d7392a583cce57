#include "seatlab/normalization.hpp"

#include <charconv>
#include <stdexcept>

namespace seatlab {

std::string_view to_string(Domain d) { return d == Domain::source ? "source" : "target"; }
std::string_view to_string(NormMode m) { return m == NormMode::sat ? "sat" : "seat"; }

Domain parse_domain(std::string_view text) {
  if (text == "source") return Domain::source;
  if (text == "target") return Domain::target;
  throw std::invalid_argument("unknown domain tag '" + std::string(text) + "'");
}

NormMode parse_norm_mode(std::string_view text) {
  if (text == "sat" || text == "SAT") return NormMode::sat;
  if (text == "seat" || text == "SEAT") return NormMode::seat;
  throw std::invalid_argument("unknown norm mode '" + std::string(text) + "' (expected sat or seat)");
}

NormParams::NormParams(std::size_t channels)
    : gamma(Shape{channels}, 1.0),
      beta(Shape{channels}, 0.0),
      running_mean(Shape{channels}, 0.0),
      running_var(Shape{channels}, 1.0) {
  gamma.set_requires_grad(true);
  beta.set_requires_grad(true);
}

DomainNormLayer::DomainNormLayer(std::string name, std::size_t channels, NormMode mode, Real eps, Real momentum)
    : name_(std::move(name)),
      channels_(channels),
      mode_(mode),
      eps_(eps),
      momentum_(momentum),
      source_(std::make_shared<NormParams>(channels)),
      target_(mode == NormMode::sat ? source_ : std::make_shared<NormParams>(channels)) {
  if (channels == 0) throw std::invalid_argument("DomainNormLayer: zero channels");
}

NormParams& DomainNormLayer::active(Domain domain) {
  if (domain == Domain::target && switch_to_source_) return *source_;
  return params(domain);
}

Tensor DomainNormLayer::forward(const Tensor& x, Domain domain, StatsMode stats, const PreAffineHook* hook) {
  if (domain != Domain::source && domain != Domain::target) {
    throw std::invalid_argument("DomainNormLayer: unknown domain tag");
  }
  const std::size_t c = x.rank() == 4 ? x.dim(1) : x.dim(0);
  if (c != channels_) {
    throw std::invalid_argument("DomainNormLayer " + name_ + ": expected " + std::to_string(channels_) +
                                " channels, got " + std::to_string(c));
  }
  NormParams& p = active(domain);
  std::vector<Real> pre;
  std::vector<Real>* pre_ptr = hook ? &pre : nullptr;
  Tensor y;
  if (stats == StatsMode::running) {
    const auto rm = p.running_mean.data();
    const auto rv = p.running_var.data();
    BatchNormStats fixed{{rm.begin(), rm.end()}, {rv.begin(), rv.end()}};
    y = batch_norm(x, p.gamma, p.beta, eps_, &fixed, nullptr, pre_ptr);
  } else {
    BatchNormStats batch;
    y = batch_norm(x, p.gamma, p.beta, eps_, nullptr, &batch, pre_ptr);
    if (stats == StatsMode::batch_update) {
      auto rm = p.running_mean.data();
      auto rv = p.running_var.data();
      for (std::size_t ch = 0; ch < channels_; ++ch) {
        rm[ch] = (1 - momentum_) * rm[ch] + momentum_ * batch.mean[ch];
        rv[ch] = (1 - momentum_) * rv[ch] + momentum_ * batch.var[ch];
      }
    }
  }
  if (hook) (*hook)(name_, domain, pre);
  return y;
}

std::vector<std::pair<std::string, Tensor>> DomainNormLayer::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  if (mode_ == NormMode::sat) {
    out.emplace_back(name_ + ".shared.gamma", source_->gamma);
    out.emplace_back(name_ + ".shared.beta", source_->beta);
  } else {
    out.emplace_back(name_ + ".source.gamma", source_->gamma);
    out.emplace_back(name_ + ".source.beta", source_->beta);
    out.emplace_back(name_ + ".target.gamma", target_->gamma);
    out.emplace_back(name_ + ".target.beta", target_->beta);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> DomainNormLayer::named_state() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto push = [&](const std::string& label, const NormParams& p) {
    out.emplace_back(name_ + "." + label + ".gamma", p.gamma);
    out.emplace_back(name_ + "." + label + ".beta", p.beta);
    out.emplace_back(name_ + "." + label + ".running_mean", p.running_mean);
    out.emplace_back(name_ + "." + label + ".running_var", p.running_var);
  };
  if (mode_ == NormMode::sat) {
    push("shared", *source_);
  } else {
    push("source", *source_);
    push("target", *target_);
  }
  return out;
}

namespace {

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("invalid layer switch spec '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

LayerSwitchSpec LayerSwitchSpec::parse(std::string_view text) {
  if (text.empty() || text == "none") return {};
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) {
    const int k = parse_int(text, text);
    return {std::pair{k, k}};
  }
  return {std::pair{parse_int(text.substr(0, dash), text), parse_int(text.substr(dash + 1), text)}};
}

std::string LayerSwitchSpec::to_string() const {
  if (!range) return "none";
  return std::to_string(range->first) + "-" + std::to_string(range->second);
}

void LayerSwitchSpec::validate(int group_count) const {
  if (!range) return;
  const auto [i, j] = *range;
  if (i < 1 || i > j || j > group_count) {
    throw std::out_of_range("layer switch " + to_string() + " outside 1.." + std::to_string(group_count));
  }
}

void apply_layer_switch(LayerGroups& net, const LayerSwitchSpec& spec) {
  spec.validate(net.group_count());
  for (int g = 1; g <= net.group_count(); ++g) {
    const bool on = spec.range && g >= spec.range->first && g <= spec.range->second;
    for (DomainNormLayer* layer : net.group_norms(g)) layer->set_switch_to_source(on);
  }
}

ScopedLayerSwitch::ScopedLayerSwitch(LayerGroups& net, const LayerSwitchSpec& spec) {
  spec.validate(net.group_count());
  for (int g = 1; g <= net.group_count(); ++g) {
    for (DomainNormLayer* layer : net.group_norms(g)) saved_.emplace_back(layer, layer->switch_to_source());
  }
  apply_layer_switch(net, spec);
}

ScopedLayerSwitch::~ScopedLayerSwitch() {
  for (auto& [layer, on] : saved_) layer->set_switch_to_source(on);
}

}  // namespace seatlab
