#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seatlab/ops.hpp"
#include "seatlab/tensor.hpp"

namespace seatlab {

enum class Domain { source, target };
enum class NormMode { sat, seat };

std::string_view to_string(Domain d);
std::string_view to_string(NormMode m);
Domain parse_domain(std::string_view text);
NormMode parse_norm_mode(std::string_view text);

// How a forward pass treats normalization statistics.
enum class StatsMode {
  batch_update,  // training: batch statistics, running statistics updated
  batch_frozen,  // batch statistics, running statistics left alone
  running,       // evaluation: running statistics
};

// Statistics and affine transformation owned by one domain (or shared by
// both in SAT mode).
struct NormParams {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;

  explicit NormParams(std::size_t channels);
};

// Receives the normalized, pre-affine activations of a norm layer.
using PreAffineHook = std::function<void(std::string_view layer, Domain domain, std::span<const Real> values)>;

// Batch normalization with either one shared parameter set (SAT) or separate
// source and target sets (SEAT). Statistics are computed over the batch and
// spatial axes, so a single C×H×W image uses spatial statistics.
class DomainNormLayer {
 public:
  DomainNormLayer(std::string name, std::size_t channels, NormMode mode, Real eps = 1e-5, Real momentum = 0.1);

  Tensor forward(const Tensor& x, Domain domain, StatsMode stats, const PreAffineHook* hook = nullptr);

  // The parameter set a forward of the given domain uses, honouring the
  // evaluation-time switch for target inputs.
  NormParams& active(Domain domain);
  NormParams& params(Domain domain) { return domain == Domain::source ? *source_ : *target_; }
  const NormParams& params(Domain domain) const { return domain == Domain::source ? *source_ : *target_; }

  NormMode mode() const { return mode_; }
  const std::string& name() const { return name_; }
  std::size_t channels() const { return channels_; }
  Real eps() const { return eps_; }
  Real momentum() const { return momentum_; }

  bool switch_to_source() const { return switch_to_source_; }
  void set_switch_to_source(bool on) { switch_to_source_ = on; }

  // Trainable gamma/beta, each listed once even when SAT aliases them.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  // Parameters and running statistics, labelled by domain ("shared" in SAT).
  std::vector<std::pair<std::string, Tensor>> named_state() const;

 private:
  std::string name_;
  std::size_t channels_;
  NormMode mode_;
  Real eps_;
  Real momentum_;
  bool switch_to_source_ = false;
  std::shared_ptr<NormParams> source_;
  std::shared_ptr<NormParams> target_;
};

// Contiguous, 1-based, inclusive range of layer groups whose target
// normalization is replaced by the source one at evaluation. Empty means no
// switch.
struct LayerSwitchSpec {
  std::optional<std::pair<int, int>> range;

  bool empty() const { return !range.has_value(); }
  // "" or "none" -> empty; "i-j" -> [i, j]; "k" -> [k, k].
  static LayerSwitchSpec parse(std::string_view text);
  std::string to_string() const;
  void validate(int group_count) const;
  bool operator==(const LayerSwitchSpec&) const = default;
};

// Anything exposing its norm layers partitioned into ordered groups.
class LayerGroups {
 public:
  virtual ~LayerGroups() = default;
  virtual int group_count() const = 0;
  virtual std::vector<DomainNormLayer*> group_norms(int group_index_1based) = 0;
};

// Sets switch_to_source on every norm layer of the switched groups and clears
// it everywhere else.
void apply_layer_switch(LayerGroups& net, const LayerSwitchSpec& spec);

// Applies a switch for the lifetime of the object, then restores the flags.
class ScopedLayerSwitch {
 public:
  ScopedLayerSwitch(LayerGroups& net, const LayerSwitchSpec& spec);
  ~ScopedLayerSwitch();
  ScopedLayerSwitch(const ScopedLayerSwitch&) = delete;
  ScopedLayerSwitch& operator=(const ScopedLayerSwitch&) = delete;

 private:
  std::vector<std::pair<DomainNormLayer*, bool>> saved_;
};

}  // namespace seatlab
