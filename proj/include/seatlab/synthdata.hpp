#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seatlab/label_map.hpp"
#include "seatlab/normalization.hpp"
#include "seatlab/tensor.hpp"

namespace seatlab {

using Rgb = std::array<Real, 3>;

// Domain-specific rendering parameters. Geometry never depends on these.
struct Appearance {
  std::vector<Rgb> palette;  // one colour per class, class 0 is background
  Real color_jitter = 0.04;  // per-shape uniform colour perturbation
  Real texture_amplitude = 0.06;
  Real texture_frequency = 4.0;  // stripe cycles across the image
  Real noise_sigma = 0.03;
  Real brightness = 0.0;  // additive, after contrast
  Real contrast = 1.0;    // scales around 0.5
};

struct SceneSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t num_classes = 5;
  std::size_t min_shapes = 2;
  std::size_t max_shapes = 6;
  // Probability that a shape's one-pixel outline is labelled 255.
  Real boundary_ignore_probability = 0.25;
  Appearance source;
  Appearance target;
  // Render source geometry with the target appearance (style-transferred
  // source); the domain tag stays "source".
  bool style_transfer = false;

  static SceneSpec defaults(std::size_t size = 64, std::size_t num_classes = 5);
  void validate() const;
};

struct DomainBatch {
  Tensor image;  // 3×H×W in [0, 1]
  std::optional<LabelMap> label;
  Domain domain = Domain::source;
};

// Target training images: the label is not carried at all.
struct UnlabeledBatch {
  Tensor image;
  Domain domain = Domain::target;
};

// Renders one scene. Shape layout and labels come from a stream keyed by the
// seed alone; colours, texture and noise use the domain's appearance.
DomainBatch generate_scene(std::uint64_t seed, Domain domain, const SceneSpec& spec);

enum class Split { source_train = 0, target_train = 1, target_eval = 2, source_eval = 3 };
std::string_view to_string(Split s);

// Index-addressed splits with disjoint seed ranges; scenes are rendered on
// demand so a split is reproducible bit for bit.
class SyntheticDataset {
 public:
  static constexpr std::uint64_t kSplitStride = 1'000'000;

  SyntheticDataset(SceneSpec spec, std::size_t n_train_src, std::size_t n_train_trg, std::size_t n_eval_trg,
                   std::size_t n_eval_src, std::uint64_t seed);

  DomainBatch source_train(std::size_t i) const;
  UnlabeledBatch target_train(std::size_t i) const;
  DomainBatch target_eval(std::size_t i) const;
  DomainBatch source_eval(std::size_t i) const;

  std::size_t size(Split s) const;
  std::uint64_t scene_seed(Split s, std::size_t i) const;
  const SceneSpec& spec() const { return spec_; }

 private:
  SceneSpec spec_;
  std::array<std::size_t, 4> sizes_;
  std::uint64_t seed_;
};

SyntheticDataset dataset_split(const SceneSpec& spec, std::size_t n_train_src, std::size_t n_train_trg,
                               std::size_t n_eval_trg, std::uint64_t seed, std::size_t n_eval_src = 0);

// --- Netpbm I/O ----------------------------------------------------------------

// Binary P6, maxval 255; values rounded from [0, 1].
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);
// Binary P5, maxval 255.
void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_pgm(const std::filesystem::path& path);

struct ManifestRecord {
  std::string image_path;
  std::string label_path;  // "-" when absent
  Domain domain = Domain::source;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

// Writes every split of a dataset as PPM/PGM files plus manifest.txt.
// Target-train labels are not written.
void export_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace seatlab
