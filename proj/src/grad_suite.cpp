#include "seatlab/grad_suite.hpp"

#include <algorithm>
#include <random>

#include "seatlab/losses.hpp"
#include "seatlab/networks.hpp"
#include "seatlab/ops.hpp"

namespace seatlab {

namespace {

using Rng = std::mt19937_64;

Tensor randn(const Shape& shape, Rng& rng, Real scale = 1) {
  std::normal_distribution<Real> d(0, scale);
  Tensor t(shape);
  for (Real& v : t.data()) v = d(rng);
  return t;
}

Tensor uniform(const Shape& shape, Rng& rng, Real lo, Real hi) {
  std::uniform_real_distribution<Real> d(lo, hi);
  Tensor t(shape);
  for (Real& v : t.data()) v = d(rng);
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

LabelMap random_labels(Rng& rng, std::size_t n, std::size_t h, std::size_t w, Real ignore_fraction = 0.2) {
  LabelMap m(h, w);
  std::uniform_real_distribution<Real> u(0, 1);
  for (auto& v : m.data) v = u(rng) < ignore_fraction ? kIgnoreIndex : static_cast<std::uint8_t>(pick(rng, 0, n - 1));
  return m;
}

// Σ W ⊙ t with a fixed random W, so every output coordinate reaches the loss
// with a distinct weight.
struct Projection {
  Tensor weights;
  Tensor operator()(const Tensor& t) const { return sum(mul(t, weights)); }
};

Projection projection(const Shape& shape, Rng& rng) { return {randn(shape, rng)}; }

GradCheckOptions sampled(std::uint64_t seed, std::size_t coords = 48) {
  GradCheckOptions o;
  o.seed = seed;
  o.max_coords = coords;
  return o;
}

GradCheckResult unary(std::uint64_t seed, const std::function<Tensor(const Tensor&)>& op,
                      const std::function<Tensor(Rng&, const Shape&)>& input) {
  Rng rng(seed);
  const Shape shape{pick(rng, 1, 3), pick(rng, 2, 5), pick(rng, 2, 5)};
  const Tensor x = input(rng, shape);
  const Projection proj = projection(shape, rng);
  return grad_check([&](const Tensor& v) { return proj(op(v)); }, x, sampled(seed));
}

Tensor normal_input(Rng& rng, const Shape& s) { return randn(s, rng); }
Tensor positive_input(Rng& rng, const Shape& s) { return uniform(s, rng, 0.2, 2.0); }

GradCheckResult binary(std::uint64_t seed, const std::function<Tensor(const Tensor&, const Tensor&)>& op,
                       bool wrt_first) {
  Rng rng(seed);
  const Shape shape{pick(rng, 1, 3), pick(rng, 2, 5), pick(rng, 2, 5)};
  const Tensor a = randn(shape, rng), b = randn(shape, rng);
  const Projection proj = projection(shape, rng);
  if (wrt_first) return grad_check([&](const Tensor& v) { return proj(op(v, b)); }, a, sampled(seed));
  return grad_check([&](const Tensor& v) { return proj(op(a, v)); }, b, sampled(seed));
}

struct ConvInstance {
  Tensor input, weight, bias;
  std::size_t stride, padding;
  Projection proj;
};

ConvInstance conv_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t c_in = pick(rng, 1, 3), c_out = pick(rng, 1, 3), k = pick(rng, 1, 4);
  const std::size_t stride = pick(rng, 1, 2), padding = pick(rng, 0, 1);
  const std::size_t h = pick(rng, k, 8), w = pick(rng, k, 8);
  ConvInstance c{randn({c_in, h, w}, rng), randn({c_out, c_in, k, k}, rng), randn({c_out}, rng), stride, padding, {}};
  const Tensor probe = conv2d(c.input, c.weight, c.bias, stride, padding);
  c.proj = projection(probe.shape(), rng);
  return c;
}

GradCheckResult conv_case(std::uint64_t seed, int which) {
  ConvInstance c = conv_instance(seed);
  auto f = [&](const Tensor& v) {
    return c.proj(conv2d(which == 0 ? v : c.input, which == 1 ? v : c.weight, which == 2 ? v : c.bias, c.stride,
                         c.padding));
  };
  const Tensor& x = which == 0 ? c.input : which == 1 ? c.weight : c.bias;
  return grad_check(f, x, sampled(seed));
}

struct BnInstance {
  Tensor x, gamma, beta;
  BatchNormStats fixed;
  Projection proj;
};

BnInstance bn_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t c = pick(rng, 1, 3);
  const bool batched = pick(rng, 0, 1) == 1;
  Shape shape = batched ? Shape{pick(rng, 1, 3), c, pick(rng, 2, 4), pick(rng, 2, 4)} : Shape{c, pick(rng, 2, 5), pick(rng, 2, 5)};
  BnInstance b{randn(shape, rng, 2), uniform({c}, rng, 0.5, 1.5), randn({c}, rng), {}, projection(shape, rng)};
  b.fixed.mean.resize(c);
  b.fixed.var.resize(c);
  for (std::size_t i = 0; i < c; ++i) {
    b.fixed.mean[i] = std::normal_distribution<Real>(0, 1)(rng);
    b.fixed.var[i] = std::uniform_real_distribution<Real>(0.5, 2)(rng);
  }
  return b;
}

GradCheckResult bn_case(std::uint64_t seed, int which, bool fixed_stats) {
  BnInstance b = bn_instance(seed);
  const BatchNormStats* fixed = fixed_stats ? &b.fixed : nullptr;
  auto f = [&](const Tensor& v) {
    return b.proj(batch_norm(which == 0 ? v : b.x, which == 1 ? v : b.gamma, which == 2 ? v : b.beta, 1e-5, fixed));
  };
  const Tensor& x = which == 0 ? b.x : which == 1 ? b.gamma : b.beta;
  return grad_check(f, x, sampled(seed));
}

// Fused prediction from two logit maps; gradient checked through the lower
// map so the fusion weight and both softmaxes are exercised.
struct LossInstance {
  std::size_t n, h, w;
  Tensor logits_l, logits_h;
  Real alpha;
  LabelMap labels;
};

LossInstance loss_instance(std::uint64_t seed, std::size_t size = 0) {
  Rng rng(seed);
  LossInstance li;
  li.n = pick(rng, 2, 4);
  li.h = size ? size : pick(rng, 2, 6);
  li.w = size ? size : pick(rng, 2, 6);
  li.logits_l = randn({li.n, li.h, li.w}, rng, 2);
  li.logits_h = randn({li.n, li.h, li.w}, rng, 2);
  li.alpha = std::uniform_real_distribution<Real>(0.05, 0.95)(rng);
  li.labels = random_labels(rng, li.n, li.h, li.w);
  return li;
}

FusedPrediction fused(const LossInstance& li, const Tensor& logits_l) {
  return fuse(softmax_channels(logits_l), softmax_channels(li.logits_h), li.alpha);
}

DiscriminatorD small_discriminator(std::size_t classes, std::uint64_t seed) {
  DiscriminatorConfig c;
  c.in_channels = classes;
  c.widths = {3, 3, 3, 3};
  return DiscriminatorD(c, seed);
}

SegNetG small_generator(std::uint64_t seed, Rng& rng) {
  SegNetConfig c;
  c.num_classes = 3;
  c.height = 16;
  c.width = 16;
  c.widths = {3, 4, 4, 4};
  c.blocks_per_group = 1;
  SegNetG g(c, seed);
  // Move the affine parameters off their identity initialisation.
  for (auto& [name, t] : g.named_parameters()) {
    if (name.find("gamma") != std::string::npos || name.find("beta") != std::string::npos) {
      for (Real& v : t.data()) v += std::normal_distribution<Real>(0, 0.3)(rng);
    }
  }
  return g;
}

Tensor find_parameter(const NamedTensors& params, const std::string& needle, std::size_t nth = 0) {
  for (const auto& [name, t] : params) {
    if (name.find(needle) != std::string::npos && nth-- == 0) return t;
  }
  throw std::logic_error("grad suite: no parameter matching " + needle);
}

std::vector<GradSuiteCase> build_suite() {
  std::vector<GradSuiteCase> s;
  auto add_case = [&](std::string name, std::function<GradCheckResult(std::uint64_t)> fn) {
    s.push_back({std::move(name), std::move(fn)});
  };

  add_case("add.lhs", [](std::uint64_t k) { return binary(k, [](auto& a, auto& b) { return add(a, b); }, true); });
  add_case("add.rhs", [](std::uint64_t k) { return binary(k, [](auto& a, auto& b) { return add(a, b); }, false); });
  add_case("sub.lhs", [](std::uint64_t k) { return binary(k, [](auto& a, auto& b) { return sub(a, b); }, true); });
  add_case("sub.rhs", [](std::uint64_t k) { return binary(k, [](auto& a, auto& b) { return sub(a, b); }, false); });
  add_case("mul.lhs", [](std::uint64_t k) { return binary(k, [](auto& a, auto& b) { return mul(a, b); }, true); });
  add_case("mul.rhs", [](std::uint64_t k) { return binary(k, [](auto& a, auto& b) { return mul(a, b); }, false); });
  add_case("scalar_mul", [](std::uint64_t k) { return unary(k, [](auto& x) { return scalar_mul(x, -1.7); }, normal_input); });
  add_case("affine", [](std::uint64_t k) { return unary(k, [](auto& x) { return affine(x, 0.3, 2.0); }, normal_input); });
  add_case("log", [](std::uint64_t k) { return unary(k, [](auto& x) { return log(x); }, positive_input); });
  add_case("leaky_relu", [](std::uint64_t k) { return unary(k, [](auto& x) { return leaky_relu(x, 0.2); }, normal_input); });
  add_case("relu", [](std::uint64_t k) { return unary(k, [](auto& x) { return relu(x); }, normal_input); });
  add_case("sigmoid", [](std::uint64_t k) { return unary(k, [](auto& x) { return sigmoid(x); }, normal_input); });
  add_case("clamp", [](std::uint64_t k) { return unary(k, [](auto& x) { return clamp(x, -0.5, 0.5); }, normal_input); });
  add_case("sum", [](std::uint64_t k) {
    Rng rng(k);
    const Tensor x = randn({pick(rng, 1, 3), pick(rng, 2, 5), pick(rng, 2, 5)}, rng);
    return grad_check([](const Tensor& v) { return sum(mul(v, v)); }, x, sampled(k));
  });
  add_case("mean", [](std::uint64_t k) {
    Rng rng(k);
    const Tensor x = randn({pick(rng, 1, 3), pick(rng, 2, 5), pick(rng, 2, 5)}, rng);
    return grad_check([](const Tensor& v) { return mean(mul(v, v)); }, x, sampled(k));
  });
  add_case("softmax_channels", [](std::uint64_t k) { return unary(k, softmax_channels, normal_input); });

  add_case("conv2d.input", [](std::uint64_t k) { return conv_case(k, 0); });
  add_case("conv2d.weight", [](std::uint64_t k) { return conv_case(k, 1); });
  add_case("conv2d.bias", [](std::uint64_t k) { return conv_case(k, 2); });

  add_case("bilinear_upsample", [](std::uint64_t k) {
    Rng rng(k);
    const Tensor x = randn({pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4)}, rng);
    const std::size_t oh = x.dim(1) * pick(rng, 1, 3) + pick(rng, 0, 2), ow = x.dim(2) * pick(rng, 1, 3);
    const Projection proj = projection({x.dim(0), oh, ow}, rng);
    return grad_check([&](const Tensor& v) { return proj(bilinear_upsample(v, oh, ow)); }, x, sampled(k));
  });
  add_case("select_mean", [](std::uint64_t k) {
    Rng rng(k);
    const std::size_t n = pick(rng, 2, 4), h = pick(rng, 2, 5), w = pick(rng, 2, 5);
    const Tensor x = randn({n, h, w}, rng);
    const LabelMap labels = random_labels(rng, n, h, w);
    return grad_check([&](const Tensor& v) { return select_mean(mul(v, v), labels.data, kIgnoreIndex); }, x,
                      sampled(k));
  });

  add_case("batch_norm.input", [](std::uint64_t k) { return bn_case(k, 0, false); });
  add_case("batch_norm.gamma", [](std::uint64_t k) { return bn_case(k, 1, false); });
  add_case("batch_norm.beta", [](std::uint64_t k) { return bn_case(k, 2, false); });
  add_case("batch_norm.fixed_stats.input", [](std::uint64_t k) { return bn_case(k, 0, true); });
  add_case("batch_norm.fixed_stats.gamma", [](std::uint64_t k) { return bn_case(k, 1, true); });

  add_case("norm_layer.seat.target", [](std::uint64_t k) {
    Rng rng(k);
    const std::size_t c = pick(rng, 1, 3);
    DomainNormLayer layer("n", c, NormMode::seat);
    for (Real& v : layer.params(Domain::target).gamma.data()) v = std::uniform_real_distribution<Real>(0.5, 1.5)(rng);
    const Tensor x = randn({c, pick(rng, 2, 5), pick(rng, 2, 5)}, rng, 2);
    const Projection proj = projection(x.shape(), rng);
    return grad_check([&](const Tensor& v) { return proj(layer.forward(v, Domain::target, StatsMode::batch_frozen)); },
                      x, sampled(k));
  });

  add_case("loss_seg", [](std::uint64_t k) {
    const LossInstance li = loss_instance(k);
    return grad_check(
        [&](const Tensor& v) {
          return loss_seg(std::vector<FusedPrediction>{fused(li, v)}, std::vector<LabelMap>{li.labels});
        },
        li.logits_l, sampled(k));
  });
  add_case("loss_st", [](std::uint64_t k) {
    LossInstance li = loss_instance(k);
    Rng rng(k + 7);
    li.labels = random_labels(rng, li.n, li.h, li.w, 0.5);
    return grad_check(
        [&](const Tensor& v) {
          return loss_st(std::vector<FusedPrediction>{fused(li, v)}, std::vector<LabelMap>{li.labels});
        },
        li.logits_l, sampled(k));
  });
  add_case("loss_adv.prediction", [](std::uint64_t k) {
    const LossInstance li = loss_instance(k, 16);
    const DiscriminatorD d = small_discriminator(li.n, k);
    return grad_check([&](const Tensor& v) { return loss_adv(std::vector<FusedPrediction>{fused(li, v)}, d); },
                      li.logits_l, sampled(k));
  });
  add_case("loss_dis.prediction", [](std::uint64_t k) {
    const LossInstance src = loss_instance(k, 16);
    Rng rng(k);
    const Tensor trg_logits = randn({src.n, 16, 16}, rng, 2);
    const DiscriminatorD d = small_discriminator(src.n, k);
    return grad_check(
        [&](const Tensor& v) {
          return loss_dis(std::vector<FusedPrediction>{fused(src, v)},
                          std::vector<FusedPrediction>{fused(src, trg_logits)}, d);
        },
        src.logits_l, sampled(k));
  });
  add_case("loss_dis.discriminator", [](std::uint64_t k) {
    const LossInstance li = loss_instance(k, 16);
    Rng rng(k);
    const Tensor trg_logits = randn({li.n, 16, 16}, rng, 2);
    DiscriminatorD d = small_discriminator(li.n, k);
    const std::vector<FusedPrediction> src{fused(li, li.logits_l)}, trg{fused(li, trg_logits)};
    const Tensor w = find_parameter(d.named_parameters(), "weight", pick(rng, 0, 4));
    return grad_check([&](const Tensor&) { return loss_dis(src, trg, d); }, w, sampled(k));
  });
  add_case("loss_ssn", [](std::uint64_t k) {
    const LossInstance li = loss_instance(k, 16);
    Rng rng(k + 3);
    const Tensor trg_logits = randn({li.n, 16, 16}, rng, 2);
    const LabelMap pseudo = random_labels(rng, li.n, 16, 16, 0.5);
    const DiscriminatorD d = small_discriminator(li.n, k);
    const Real beta = std::uniform_real_distribution<Real>(0.001, 1)(rng);
    return grad_check(
        [&](const Tensor& v) {
          const std::vector<FusedPrediction> src{fused(li, v)}, trg{fused(li, add(trg_logits, v))};
          return loss_ssn(loss_adv(trg, d), loss_seg(src, std::vector<LabelMap>{li.labels}), beta,
                          loss_st(trg, std::vector<LabelMap>{pseudo}));
        },
        li.logits_l, sampled(k));
  });

  // Whole generator: input image, a conv weight and a target-domain gamma.
  auto generator_case = [](std::uint64_t k, int which) {
    Rng rng(k);
    SegNetG g = small_generator(k, rng);
    const Tensor image = uniform({3, 16, 16}, rng, 0, 1);
    const LabelMap labels = random_labels(rng, 3, 16, 16);
    const Real alpha = std::uniform_real_distribution<Real>(0, 1)(rng);
    const Domain domain = pick(rng, 0, 1) ? Domain::target : Domain::source;
    auto loss = [&](const Tensor& img) {
      auto [f_l, f_h] = g.forward(img, domain, StatsMode::batch_frozen);
      return loss_seg(std::vector<FusedPrediction>{fuse(f_l, f_h, alpha)}, std::vector<LabelMap>{labels});
    };
    if (which == 0) return grad_check(loss, image, sampled(k, 32));
    const NamedTensors params = g.named_parameters();
    const Tensor p = which == 1 ? find_parameter(params, "conv.weight", pick(rng, 0, 3))
                                : find_parameter(params, domain == Domain::target ? "target.gamma" : "source.gamma",
                                                 pick(rng, 0, 3));
    return grad_check([&](const Tensor&) { return loss(image); }, p, sampled(k, 32));
  };
  add_case("generator.image", [=](std::uint64_t k) { return generator_case(k, 0); });
  add_case("generator.conv_weight", [=](std::uint64_t k) { return generator_case(k, 1); });
  add_case("generator.gamma", [=](std::uint64_t k) { return generator_case(k, 2); });
  return s;
}

}  // namespace

const std::vector<GradSuiteCase>& gradient_suite() {
  static const std::vector<GradSuiteCase> suite = build_suite();
  return suite;
}

bool GradSuiteReport::passed(Real tolerance) const {
  if (entries.empty()) return false;
  for (const auto& e : entries) {
    if (!(e.max_rel_error < tolerance) || e.checked == 0) return false;
  }
  return true;
}

GradSuiteReport run_gradient_suite(std::size_t seeds, const std::function<void(const GradSuiteEntry&)>& observer) {
  GradSuiteReport report;
  for (const GradSuiteCase& c : gradient_suite()) {
    GradSuiteEntry e{c.name, 0, 0, 0};
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
      const GradCheckResult r = c.run(seed);
      e.max_rel_error = std::max(e.max_rel_error, r.max_rel_error);
      e.checked += r.checked;
      e.skipped += r.skipped_nondifferentiable;
    }
    report.worst = std::max(report.worst, e.max_rel_error);
    report.entries.push_back(e);
    if (observer) observer(e);
  }
  return report;
}

}  // namespace seatlab
