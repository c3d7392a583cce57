#include "seatlab/networks.hpp"

#include <cmath>
#include <stdexcept>

#include "seatlab/ops.hpp"

namespace seatlab {

ConvLayer::ConvLayer(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t stride_,
                     std::size_t padding_, std::mt19937_64& rng)
    : weight(Shape{c_out, c_in, kernel, kernel}), bias(Shape{c_out}), stride(stride_), padding(padding_) {
  const Real stddev = std::sqrt(Real{2} / static_cast<Real>(c_in * kernel * kernel));
  std::normal_distribution<Real> dist(0.0, stddev);
  for (Real& w : weight.data()) w = dist(rng);
  weight.set_requires_grad(true);
  bias.set_requires_grad(true);
}

Tensor ConvLayer::forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }

SegNetG::SegNetG(const SegNetConfig& config, std::uint64_t seed)
    : config_(config),
      lower_head_([&] {
        std::mt19937_64 head_rng(seed ^ 0x10e7ULL);
        return ConvLayer(config.widths[2], config.num_classes, 1, 1, 0, head_rng);
      }()),
      higher_head_([&] {
        std::mt19937_64 head_rng(seed ^ 0x41e7ULL);
        return ConvLayer(config.widths[3], config.num_classes, 1, 1, 0, head_rng);
      }()) {
  if (config.num_classes < 2) throw std::invalid_argument("SegNetG: need at least 2 classes");
  if (config.height == 0 || config.width == 0 || config.height % kDownsampling != 0 ||
      config.width % kDownsampling != 0) {
    throw std::invalid_argument("SegNetG: input size " + std::to_string(config.height) + "x" +
                                std::to_string(config.width) + " is not divisible by " +
                                std::to_string(kDownsampling));
  }
  if (config.blocks_per_group == 0) throw std::invalid_argument("SegNetG: blocks_per_group must be positive");
  std::mt19937_64 rng(seed);
  std::size_t in_ch = 3;
  for (int g = 0; g < kGroups; ++g) {
    const std::size_t out_ch = config.widths[static_cast<std::size_t>(g)];
    for (std::size_t b = 0; b < config.blocks_per_group; ++b) {
      const std::size_t stride = (g > 0 && b == 0) ? 2 : 1;
      std::string name = group_name(g + 1) + ".block" + std::to_string(b);
      groups_[static_cast<std::size_t>(g)].push_back(
          Block{ConvLayer(in_ch, out_ch, 3, stride, 1, rng), DomainNormLayer(name + ".norm", out_ch, config.norm_mode)});
      in_ch = out_ch;
    }
  }
}

std::string SegNetG::group_name(int group_index_1based) { return "layer" + std::to_string(group_index_1based); }

std::pair<Tensor, Tensor> SegNetG::forward(const Tensor& image, Domain domain, StatsMode stats,
                                           const PreAffineHook* hook) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != config_.height || image.dim(2) != config_.width) {
    throw std::invalid_argument("SegNetG: expected image of shape (3," + std::to_string(config_.height) + "," +
                                std::to_string(config_.width) + "), got " + shape_to_string(image.shape()));
  }
  Tensor x = image;
  Tensor lower_feat;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (Block& block : groups_[g]) {
      x = leaky_relu(block.norm.forward(block.conv.forward(x), domain, stats, hook), config_.leaky_slope);
    }
    if (g == 2) lower_feat = x;
  }
  auto head = [&](const ConvLayer& classifier, const Tensor& feat) {
    return softmax_channels(bilinear_upsample(classifier.forward(feat), config_.height, config_.width));
  };
  return {head(lower_head_, lower_feat), head(higher_head_, x)};
}

NamedTensors SegNetG::named_parameters() const {
  NamedTensors out;
  for (const auto& group : groups_) {
    for (const Block& block : group) {
      const std::string prefix = block.norm.name().substr(0, block.norm.name().size() - 5);
      out.emplace_back(prefix + ".conv.weight", block.conv.weight);
      out.emplace_back(prefix + ".conv.bias", block.conv.bias);
      for (auto& p : block.norm.named_parameters()) out.push_back(std::move(p));
    }
  }
  out.emplace_back("lower_head.weight", lower_head_.weight);
  out.emplace_back("lower_head.bias", lower_head_.bias);
  out.emplace_back("higher_head.weight", higher_head_.weight);
  out.emplace_back("higher_head.bias", higher_head_.bias);
  return out;
}

NamedTensors SegNetG::named_state() const {
  NamedTensors out;
  for (const auto& group : groups_) {
    for (const Block& block : group) {
      const std::string prefix = block.norm.name().substr(0, block.norm.name().size() - 5);
      out.emplace_back(prefix + ".conv.weight", block.conv.weight);
      out.emplace_back(prefix + ".conv.bias", block.conv.bias);
      for (auto& p : block.norm.named_state()) out.push_back(std::move(p));
    }
  }
  out.emplace_back("lower_head.weight", lower_head_.weight);
  out.emplace_back("lower_head.bias", lower_head_.bias);
  out.emplace_back("higher_head.weight", higher_head_.weight);
  out.emplace_back("higher_head.bias", higher_head_.bias);
  return out;
}

std::vector<Tensor> SegNetG::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::string> SegNetG::norm_layer_names() const {
  std::vector<std::string> out;
  for (const auto& group : groups_) {
    for (const Block& block : group) out.push_back(block.norm.name());
  }
  return out;
}

DomainNormLayer* SegNetG::find_norm(const std::string& name) {
  for (auto& group : groups_) {
    for (Block& block : group) {
      if (block.norm.name() == name) return &block.norm;
    }
  }
  return nullptr;
}

std::vector<DomainNormLayer*> SegNetG::group_norms(int group_index_1based) {
  if (group_index_1based < 1 || group_index_1based > kGroups) {
    throw std::out_of_range("SegNetG: group index " + std::to_string(group_index_1based) + " out of range");
  }
  std::vector<DomainNormLayer*> out;
  for (Block& block : groups_[static_cast<std::size_t>(group_index_1based - 1)]) out.push_back(&block.norm);
  return out;
}

DiscriminatorD::DiscriminatorD(const DiscriminatorConfig& config, std::uint64_t seed)
    : config_(config), classifier_([&] {
        std::mt19937_64 cls_rng(seed ^ 0xd15cULL);
        return ConvLayer(config.widths[3], 1, 3, 1, 1, cls_rng);
      }()) {
  if (config.in_channels == 0) throw std::invalid_argument("DiscriminatorD: zero input channels");
  std::mt19937_64 rng(seed);
  std::size_t in_ch = config.in_channels;
  for (std::size_t w : config.widths) {
    convs_.emplace_back(in_ch, w, 4, 2, 1, rng);
    in_ch = w;
  }
}

Tensor DiscriminatorD::logits(const Tensor& probs) const {
  if (probs.rank() != 3 || probs.dim(0) != config_.in_channels) {
    throw std::invalid_argument("DiscriminatorD: expected " + std::to_string(config_.in_channels) +
                                " input channels, got shape " + shape_to_string(probs.shape()));
  }
  Tensor x = probs;
  for (const ConvLayer& conv : convs_) x = leaky_relu(conv.forward(x), config_.leaky_slope);
  return classifier_.forward(x);
}

Tensor DiscriminatorD::forward(const Tensor& probs) const {
  return clamp(sigmoid(logits(probs)), kLogEps, 1 - kLogEps);
}

NamedTensors DiscriminatorD::named_parameters() const {
  NamedTensors out;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    out.emplace_back("conv" + std::to_string(i) + ".weight", convs_[i].weight);
    out.emplace_back("conv" + std::to_string(i) + ".bias", convs_[i].bias);
  }
  out.emplace_back("classifier.weight", classifier_.weight);
  out.emplace_back("classifier.bias", classifier_.bias);
  return out;
}

std::vector<Tensor> DiscriminatorD::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

FusedPrediction fuse(const Tensor& f_lower, const Tensor& f_higher, Real alpha) {
  if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("fuse: alpha must lie in [0, 1]");
  if (f_lower.shape() != f_higher.shape()) {
    throw std::invalid_argument("fuse: shape mismatch " + shape_to_string(f_lower.shape()) + " vs " +
                                shape_to_string(f_higher.shape()));
  }
  return {add(scalar_mul(f_lower, alpha), scalar_mul(f_higher, 1 - alpha)), alpha};
}

}  // namespace seatlab
