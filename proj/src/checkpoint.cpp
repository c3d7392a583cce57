#include "seatlab/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "seatlab/config.hpp"

namespace seatlab {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'E', 'A', 'T', 'L', 'A', 'B', '\0'};

enum class BlobKind : std::uint8_t { reals = 0, bytes = 1 };

struct Blob {
  BlobKind kind = BlobKind::reals;
  Shape shape;
  std::vector<Real> reals;
  std::string bytes;
};

// Everything a checkpoint carries as tensors, in file order.
NamedTensors state_tensors(const TrainingState& s) {
  NamedTensors out;
  auto append = [&](const std::string& prefix, const NamedTensors& src) {
    for (const auto& [name, t] : src) out.emplace_back(prefix + name, t);
  };
  append("g.", s.g.named_state());
  append("d.", s.d.named_parameters());
  append("opt_g.", s.opt_g.named_state());
  append("opt_d.", s.opt_d.named_state());
  return out;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_bytes(std::string_view b) { out_.append(b); }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string data, std::string origin) : data_(std::move(data)), origin_(std::move(origin)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes(std::uint64_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& what) const { throw std::runtime_error(origin_ + ": " + what); }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) fail("truncated checkpoint");
  }
  std::string data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

void put_blob(Writer& w, const std::string& name, const Blob& b) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
  w.put_bytes(name);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(b.kind));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(b.shape.size()));
  for (std::size_t e : b.shape) w.put<std::uint64_t>(e);
  if (b.kind == BlobKind::reals) {
    w.put<std::uint64_t>(b.reals.size());
    for (Real v : b.reals) w.put<Real>(v);
  } else {
    w.put<std::uint64_t>(b.bytes.size());
    w.put_bytes(b.bytes);
  }
}

struct Parsed {
  CheckpointInfo info;
  std::vector<std::pair<std::string, Blob>> blobs;
};

Parsed parse(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str(), path.string());

  if (r.get_bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) r.fail("not a seatlab checkpoint");
  Parsed p;
  p.info.version = r.get<std::uint32_t>();
  if (p.info.version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(p.info.version) + " (expected " +
           std::to_string(kCheckpointVersion) + ")");
  }
  p.info.config_hash = r.get<std::uint64_t>();
  p.info.iteration = r.get<std::uint64_t>();
  const std::uint32_t count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_bytes(r.get<std::uint32_t>());
    Blob b;
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) r.fail("blob '" + name + "' has unknown kind " + std::to_string(kind));
    b.kind = static_cast<BlobKind>(kind);
    const std::uint32_t rank = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < rank; ++k) b.shape.push_back(r.get<std::uint64_t>());
    const std::uint64_t n = r.get<std::uint64_t>();
    if (b.kind == BlobKind::reals) {
      if (n != shape_numel(b.shape)) r.fail("blob '" + name + "' length does not match its shape");
      b.reals.resize(n);
      for (auto& v : b.reals) v = r.get<Real>();
    } else {
      b.bytes = r.get_bytes(n);
    }
    p.blobs.emplace_back(std::move(name), std::move(b));
  }
  if (!r.done()) r.fail("trailing bytes after last blob");

  const auto cfg = std::find_if(p.blobs.begin(), p.blobs.end(), [](const auto& e) { return e.first == "config"; });
  if (cfg == p.blobs.end() || cfg->second.kind != BlobKind::bytes) r.fail("missing embedded config");
  apply_config_text(p.info.config, cfg->second.bytes, path.string() + "#config");
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state, const TrainConfig& config) {
  TrainConfig stored = config;
  stored.layer_switch = {};

  std::vector<std::pair<std::string, Blob>> blobs;
  Blob cfg{BlobKind::bytes, {}, {}, config_to_text(stored)};
  blobs.emplace_back("config", std::move(cfg));
  std::ostringstream rng;
  rng << state.sampler;
  blobs.emplace_back("sampler", Blob{BlobKind::bytes, {}, {}, rng.str()});
  blobs.emplace_back("opt_g.steps", Blob{BlobKind::reals, {1}, {static_cast<Real>(state.opt_g.steps())}, {}});
  blobs.emplace_back("opt_d.steps", Blob{BlobKind::reals, {1}, {static_cast<Real>(state.opt_d.steps())}, {}});
  for (const auto& [name, t] : state_tensors(state)) {
    blobs.emplace_back(name, Blob{BlobKind::reals, t.shape(), std::vector<Real>(t.data().begin(), t.data().end()), {}});
  }

  Writer w;
  w.put_bytes(std::string_view(kMagic, sizeof kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(config_hash(stored));
  w.put<std::uint64_t>(state.iteration);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(blobs.size()));
  for (const auto& [name, b] : blobs) put_blob(w, name, b);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) { return parse(path).info; }

CheckpointInfo load_checkpoint(const std::filesystem::path& path, TrainingState& state) {
  Parsed p = parse(path);
  std::map<std::string, Blob*> by_name;
  for (auto& [name, b] : p.blobs) {
    if (!by_name.emplace(name, &b).second) throw std::runtime_error(path.string() + ": duplicate blob '" + name + "'");
  }
  auto take = [&](const std::string& name, BlobKind kind) -> Blob& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error(path.string() + ": missing blob '" + name + "'");
    if (it->second->kind != kind) throw std::runtime_error(path.string() + ": blob '" + name + "' has the wrong kind");
    Blob& b = *it->second;
    by_name.erase(it);
    return b;
  };

  take("config", BlobKind::bytes);
  std::istringstream rng(take("sampler", BlobKind::bytes).bytes);
  std::mt19937_64 sampler;
  if (!(rng >> sampler)) throw std::runtime_error(path.string() + ": corrupt sampler state");
  const Real g_steps = take("opt_g.steps", BlobKind::reals).reals.at(0);
  const Real d_steps = take("opt_d.steps", BlobKind::reals).reals.at(0);

  // Validate everything before touching the state.
  NamedTensors tensors = state_tensors(state);
  std::vector<const Blob*> sources;
  for (const auto& [name, t] : tensors) {
    const Blob& b = take(name, BlobKind::reals);
    if (b.shape != t.shape()) {
      throw std::runtime_error(path.string() + ": blob '" + name + "' has shape " + shape_to_string(b.shape) +
                               ", network expects " + shape_to_string(t.shape()));
    }
    sources.push_back(&b);
  }
  if (!by_name.empty()) throw std::runtime_error(path.string() + ": unexpected blob '" + by_name.begin()->first + "'");

  for (std::size_t i = 0; i < tensors.size(); ++i) {
    std::copy(sources[i]->reals.begin(), sources[i]->reals.end(), tensors[i].second.data().begin());
  }
  state.sampler = sampler;
  state.opt_g.set_steps(static_cast<std::uint64_t>(g_steps));
  state.opt_d.set_steps(static_cast<std::uint64_t>(d_steps));
  state.iteration = p.info.iteration;
  return p.info;
}

std::unique_ptr<TrainingState> load_checkpoint(const std::filesystem::path& path, TrainConfig* config) {
  const CheckpointInfo info = read_checkpoint_info(path);
  auto state = std::make_unique<TrainingState>(info.config);
  load_checkpoint(path, *state);
  if (config) *config = info.config;
  return state;
}

}  // namespace seatlab
