#include "seatlab/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace seatlab {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rgb hue_color(Real hue, Real sat, Real val) {
  const Real h = std::fmod(hue, 1.0) * 6;
  const int sector = static_cast<int>(h);
  const Real f = h - sector;
  const Real p = val * (1 - sat), q = val * (1 - sat * f), t = val * (1 - sat * (1 - f));
  switch (sector % 6) {
    case 0: return {val, t, p};
    case 1: return {q, val, p};
    case 2: return {p, val, t};
    case 3: return {p, q, val};
    case 4: return {t, p, val};
    default: return {val, p, q};
  }
}

std::vector<Rgb> source_palette(std::size_t n) {
  std::vector<Rgb> base{{0.35, 0.40, 0.35}, {0.85, 0.25, 0.20}, {0.20, 0.45, 0.85}, {0.90, 0.80, 0.25},
                        {0.30, 0.75, 0.35}};
  std::vector<Rgb> out;
  for (std::size_t k = 0; k < n; ++k) {
    if (k < base.size()) {
      out.push_back(base[k]);
    } else {
      out.push_back(hue_color(0.13 + 0.618033988749895 * static_cast<Real>(k), 0.65, 0.85));
    }
  }
  return out;
}

// Colour cross-talk plus a cast: the target camera sees every class colour
// through the same 3×3 mixing and offset.
Rgb target_color(const Rgb& c) {
  constexpr Real mix[3][3] = {{0.55, 0.30, 0.15}, {0.20, 0.60, 0.20}, {0.30, 0.15, 0.55}};
  constexpr Real offset[3] = {0.06, 0.02, -0.04};
  Rgb out{};
  for (int r = 0; r < 3; ++r) {
    out[r] = std::clamp(mix[r][0] * c[0] + mix[r][1] * c[1] + mix[r][2] * c[2] + offset[r], 0.0, 1.0);
  }
  return out;
}

enum class ShapeKind { ellipse, rectangle, triangle, ring };

struct ShapeGeom {
  std::uint8_t cls;
  ShapeKind kind;
  Real cx, cy, radius, aspect;
  bool ignore_outline;

  bool contains(Real x, Real y) const {
    const Real dx = x - cx, dy = y - cy;
    const Real rx = radius * aspect, ry = radius;
    switch (kind) {
      case ShapeKind::ellipse: return (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1;
      case ShapeKind::rectangle: return std::abs(dx) <= rx && std::abs(dy) <= 0.8 * ry;
      case ShapeKind::triangle: {
        if (dy < -ry || dy > ry) return false;
        return std::abs(dx) <= rx * (dy + ry) / (2 * ry);
      }
      case ShapeKind::ring: {
        const Real e = (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry);
        return e <= 1 && e >= 0.3;
      }
    }
    return false;
  }
};

}  // namespace

SceneSpec SceneSpec::defaults(std::size_t size, std::size_t num_classes) {
  SceneSpec s;
  s.height = size;
  s.width = size;
  s.num_classes = num_classes;
  s.source.palette = source_palette(num_classes);
  s.target.palette.clear();
  for (const Rgb& c : s.source.palette) s.target.palette.push_back(target_color(c));
  s.target.color_jitter = 0.05;
  s.target.texture_amplitude = 0.10;
  s.target.texture_frequency = 9.0;
  s.target.noise_sigma = 0.07;
  s.target.brightness = 0.10;
  s.target.contrast = 0.70;
  return s;
}

void SceneSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("SceneSpec: need at least 2 classes (N >= 2)");
  if (num_classes > 255) throw std::invalid_argument("SceneSpec: at most 255 classes");
  if (height == 0 || width == 0) throw std::invalid_argument("SceneSpec: empty image");
  if (min_shapes > max_shapes) throw std::invalid_argument("SceneSpec: min_shapes > max_shapes");
  if (source.palette.size() != num_classes || target.palette.size() != num_classes) {
    throw std::invalid_argument("SceneSpec: palette size must equal class count");
  }
}

DomainBatch generate_scene(std::uint64_t seed, Domain domain, const SceneSpec& spec) {
  spec.validate();
  const std::size_t h = spec.height, w = spec.width;

  std::mt19937_64 geo(splitmix64(seed));
  std::uniform_int_distribution<std::size_t> count_dist(spec.min_shapes, spec.max_shapes);
  std::uniform_int_distribution<int> class_dist(1, static_cast<int>(spec.num_classes) - 1);
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  const Real side = static_cast<Real>(std::min(h, w));
  std::vector<ShapeGeom> shapes(count_dist(geo));
  for (ShapeGeom& s : shapes) {
    s.cls = static_cast<std::uint8_t>(class_dist(geo));
    s.kind = static_cast<ShapeKind>((s.cls - 1) % 4);
    s.cx = unit(geo) * static_cast<Real>(w);
    s.cy = unit(geo) * static_cast<Real>(h);
    s.radius = (0.10 + 0.14 * unit(geo)) * side;
    s.aspect = 0.7 + 0.6 * unit(geo);
    s.ignore_outline = unit(geo) < spec.boundary_ignore_probability;
  }

  // Later shapes are painted over earlier ones.
  std::vector<int> instance(h * w, -1);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const Real px = static_cast<Real>(x) + 0.5, py = static_cast<Real>(y) + 0.5;
      for (std::size_t s = shapes.size(); s-- > 0;) {
        if (shapes[s].contains(px, py)) {
          instance[y * w + x] = static_cast<int>(s);
          break;
        }
      }
    }
  }

  LabelMap label(h, w, 0);
  for (std::size_t i = 0; i < h * w; ++i) {
    if (instance[i] >= 0) label.data[i] = shapes[static_cast<std::size_t>(instance[i])].cls;
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const int id = instance[y * w + x];
      if (id < 0 || !shapes[static_cast<std::size_t>(id)].ignore_outline) continue;
      const bool edge = (x > 0 && instance[y * w + x - 1] != id) || (x + 1 < w && instance[y * w + x + 1] != id) ||
                        (y > 0 && instance[(y - 1) * w + x] != id) || (y + 1 < h && instance[(y + 1) * w + x] != id);
      if (edge) label.at(y, x) = kIgnoreIndex;
    }
  }

  const bool target_look = domain == Domain::target || spec.style_transfer;
  const Appearance& look = target_look ? spec.target : spec.source;
  std::mt19937_64 app(splitmix64(seed ^ (target_look ? 0x7a26e7ULL : 0x50a7ceULL)));
  std::uniform_real_distribution<Real> jitter(-look.color_jitter, look.color_jitter);
  std::normal_distribution<Real> noise(0.0, look.noise_sigma);
  struct Paint {
    Rgb color;
    Real cos_t, sin_t, phase;
  };
  auto make_paint = [&](const Rgb& base) {
    Paint p{};
    for (int c = 0; c < 3; ++c) p.color[c] = base[c] + jitter(app);
    const Real theta = unit(app) * std::numbers::pi;
    p.cos_t = std::cos(theta);
    p.sin_t = std::sin(theta);
    p.phase = unit(app) * 2 * std::numbers::pi;
    return p;
  };
  const Paint background = make_paint(look.palette[0]);
  std::vector<Paint> paints;
  for (const ShapeGeom& s : shapes) paints.push_back(make_paint(look.palette[s.cls]));

  Tensor image(Shape{3, h, w});
  auto img = image.data();
  const Real freq = 2 * std::numbers::pi * look.texture_frequency / static_cast<Real>(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const int id = instance[y * w + x];
      const Paint& p = id < 0 ? background : paints[static_cast<std::size_t>(id)];
      const Real tex = look.texture_amplitude *
                       std::sin(freq * (static_cast<Real>(x) * p.cos_t + static_cast<Real>(y) * p.sin_t) + p.phase);
      for (std::size_t c = 0; c < 3; ++c) {
        Real v = p.color[c] + tex;
        v = look.contrast * (v - 0.5) + 0.5 + look.brightness + noise(app);
        img[(c * h + y) * w + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return DomainBatch{std::move(image), std::move(label), domain};
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::source_train: return "source_train";
    case Split::target_train: return "target_train";
    case Split::target_eval: return "target_eval";
    case Split::source_eval: return "source_eval";
  }
  return "unknown";
}

SyntheticDataset::SyntheticDataset(SceneSpec spec, std::size_t n_train_src, std::size_t n_train_trg,
                                   std::size_t n_eval_trg, std::size_t n_eval_src, std::uint64_t seed)
    : spec_(std::move(spec)), sizes_{n_train_src, n_train_trg, n_eval_trg, n_eval_src}, seed_(seed) {
  spec_.validate();
  for (std::size_t n : sizes_) {
    if (n >= kSplitStride) throw std::invalid_argument("SyntheticDataset: split larger than seed range");
  }
}

std::uint64_t SyntheticDataset::scene_seed(Split s, std::size_t i) const {
  if (i >= size(s)) {
    throw std::out_of_range("SyntheticDataset: index " + std::to_string(i) + " outside split " +
                            std::string(to_string(s)));
  }
  return seed_ * 4 * kSplitStride + static_cast<std::uint64_t>(s) * kSplitStride + i;
}

std::size_t SyntheticDataset::size(Split s) const { return sizes_[static_cast<std::size_t>(s)]; }

DomainBatch SyntheticDataset::source_train(std::size_t i) const {
  return generate_scene(scene_seed(Split::source_train, i), Domain::source, spec_);
}

UnlabeledBatch SyntheticDataset::target_train(std::size_t i) const {
  SceneSpec plain = spec_;
  plain.style_transfer = false;
  DomainBatch b = generate_scene(scene_seed(Split::target_train, i), Domain::target, plain);
  return UnlabeledBatch{std::move(b.image), Domain::target};
}

DomainBatch SyntheticDataset::target_eval(std::size_t i) const {
  SceneSpec plain = spec_;
  plain.style_transfer = false;
  return generate_scene(scene_seed(Split::target_eval, i), Domain::target, plain);
}

DomainBatch SyntheticDataset::source_eval(std::size_t i) const {
  SceneSpec plain = spec_;
  plain.style_transfer = false;
  return generate_scene(scene_seed(Split::source_eval, i), Domain::source, plain);
}

SyntheticDataset dataset_split(const SceneSpec& spec, std::size_t n_train_src, std::size_t n_train_trg,
                               std::size_t n_eval_trg, std::uint64_t seed, std::size_t n_eval_src) {
  if (n_train_src == 0 || n_train_trg == 0 || n_eval_trg == 0) {
    throw std::invalid_argument("dataset_split: split counts must be at least 1");
  }
  return SyntheticDataset(spec, n_train_src, n_train_trg, n_eval_trg, n_eval_src, seed);
}

namespace {

std::string read_token(std::istream& in) {
  std::string tok;
  while (in) {
    int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

struct PnmHeader {
  std::size_t width, height;
};

PnmHeader read_pnm_header(std::istream& in, const std::string& magic, const std::filesystem::path& path) {
  if (read_token(in) != magic) throw std::runtime_error(path.string() + ": not a " + magic + " file");
  PnmHeader hdr{};
  hdr.width = std::stoul(read_token(in));
  hdr.height = std::stoul(read_token(in));
  if (std::stoul(read_token(in)) != 255) throw std::runtime_error(path.string() + ": maxval must be 255");
  in.get();  // single whitespace before raster
  return hdr;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("write_ppm: expected 3×H×W image");
  const std::size_t h = image.dim(1), w = image.dim(2);
  auto out = open_out(path);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  const auto d = image.data();
  std::vector<char> raster(h * w * 3);
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const Real v = std::clamp(d[c * h * w + i], 0.0, 1.0);
      raster[i * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255)));
    }
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
}

Tensor read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const PnmHeader hdr = read_pnm_header(in, "P6", path);
  std::vector<unsigned char> raster(hdr.width * hdr.height * 3);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated raster");
  Tensor image(Shape{3, hdr.height, hdr.width});
  auto d = image.data();
  const std::size_t plane = hdr.width * hdr.height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) d[c * plane + i] = raster[i * 3 + c] / 255.0;
  }
  return image;
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels) {
  auto out = open_out(path);
  out << "P5\n" << labels.width << ' ' << labels.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(labels.data.data()), static_cast<std::streamsize>(labels.data.size()));
}

LabelMap read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const PnmHeader hdr = read_pnm_header(in, "P5", path);
  LabelMap labels(hdr.height, hdr.width);
  in.read(reinterpret_cast<char*>(labels.data.data()), static_cast<std::streamsize>(labels.data.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated raster");
  return labels;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  auto out = open_out(path);
  for (const auto& r : records) out << r.image_path << ' ' << r.label_path << ' ' << to_string(r.domain) << '\n';
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestRecord r;
    std::string domain;
    if (!(fields >> r.image_path >> r.label_path >> domain)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed manifest record");
    }
    r.domain = parse_domain(domain);
    out.push_back(std::move(r));
  }
  return out;
}

void export_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::vector<ManifestRecord> records;
  auto emit = [&](Split split, std::size_t i, const Tensor& image, const LabelMap* label, Domain domain) {
    const std::string stem = std::string(to_string(split)) + "/" + std::to_string(i);
    write_ppm(dir / (stem + ".ppm"), image);
    std::string label_path = "-";
    if (label) {
      label_path = stem + ".pgm";
      write_pgm(dir / label_path, *label);
    }
    records.push_back({stem + ".ppm", label_path, domain});
  };
  for (std::size_t i = 0; i < data.size(Split::source_train); ++i) {
    auto b = data.source_train(i);
    emit(Split::source_train, i, b.image, &*b.label, b.domain);
  }
  for (std::size_t i = 0; i < data.size(Split::target_train); ++i) {
    auto b = data.target_train(i);
    emit(Split::target_train, i, b.image, nullptr, b.domain);
  }
  for (std::size_t i = 0; i < data.size(Split::target_eval); ++i) {
    auto b = data.target_eval(i);
    emit(Split::target_eval, i, b.image, &*b.label, b.domain);
  }
  for (std::size_t i = 0; i < data.size(Split::source_eval); ++i) {
    auto b = data.source_eval(i);
    emit(Split::source_eval, i, b.image, &*b.label, b.domain);
  }
  write_manifest(dir / "manifest.txt", records);
}

}  // namespace seatlab
