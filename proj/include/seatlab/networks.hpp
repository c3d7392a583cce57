#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "seatlab/normalization.hpp"
#include "seatlab/tensor.hpp"

namespace seatlab {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct ConvLayer {
  Tensor weight;  // C_out×C_in×k×k
  Tensor bias;    // C_out
  std::size_t stride = 1;
  std::size_t padding = 0;

  // He-normal weights, zero bias.
  ConvLayer(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t stride, std::size_t padding,
            std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

struct SegNetConfig {
  std::size_t num_classes = 5;
  std::size_t height = 64;
  std::size_t width = 64;
  std::array<std::size_t, 4> widths{16, 32, 64, 64};
  std::size_t blocks_per_group = 2;
  Real leaky_slope = 0.2;
  NormMode norm_mode = NormMode::seat;
};

// Segmentation generator: four conv/norm/leaky-relu groups with a stride-2
// conv opening groups 2-4 (total downsampling 8), and two 1×1 classifier
// heads after groups 3 and 4 that are upsampled to input size and
// softmaxed.
class SegNetG : public LayerGroups {
 public:
  static constexpr int kGroups = 4;
  static constexpr std::size_t kDownsampling = 8;

  SegNetG(const SegNetConfig& config, std::uint64_t seed);

  // Returns (lower-level, higher-level) probability maps, each N×H×W.
  std::pair<Tensor, Tensor> forward(const Tensor& image, Domain domain, StatsMode stats,
                                    const PreAffineHook* hook = nullptr);

  const SegNetConfig& config() const { return config_; }
  NamedTensors named_parameters() const;
  NamedTensors named_state() const;
  std::vector<Tensor> parameters() const;

  static std::string group_name(int group_index_1based);
  std::vector<std::string> norm_layer_names() const;
  DomainNormLayer* find_norm(const std::string& name);

  int group_count() const override { return kGroups; }
  std::vector<DomainNormLayer*> group_norms(int group_index_1based) override;

 private:
  struct Block {
    ConvLayer conv;
    DomainNormLayer norm;
  };
  SegNetConfig config_;
  std::array<std::vector<Block>, kGroups> groups_;
  ConvLayer lower_head_;
  ConvLayer higher_head_;
};

struct DiscriminatorConfig {
  std::size_t in_channels = 5;
  std::array<std::size_t, 4> widths{16, 32, 64, 64};
  Real leaky_slope = 0.2;
};

// Fully convolutional discriminator over class-probability maps: four
// stride-2 4×4 convs with leaky relu and a 3×3 single-channel classifier.
// Outputs are sigmoid probabilities of "target", clamped into
// [kLogEps, 1 - kLogEps].
class DiscriminatorD {
 public:
  DiscriminatorD(const DiscriminatorConfig& config, std::uint64_t seed);

  Tensor forward(const Tensor& probs) const;
  Tensor logits(const Tensor& probs) const;

  const DiscriminatorConfig& config() const { return config_; }
  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;
  ConvLayer& classifier() { return classifier_; }

 private:
  DiscriminatorConfig config_;
  std::vector<ConvLayer> convs_;
  ConvLayer classifier_;
};

// alpha·f_l + (1−alpha)·f_h
struct FusedPrediction {
  Tensor probs;
  Real alpha = 0;
};

FusedPrediction fuse(const Tensor& f_lower, const Tensor& f_higher, Real alpha);

}  // namespace seatlab
