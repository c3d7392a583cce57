#include "seatlab/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace seatlab {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw std::invalid_argument("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                              std::string(expected));
}

Real parse_real(std::string_view key, std::string_view text) {
  Real v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) bad_value(key, text, "a number");
  return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) bad_value(key, text, "an unsigned integer");
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  bad_value(key, text, "true/false");
}

std::string format_real(Real v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_widths(const std::array<std::size_t, 4>& w) {
  return std::to_string(w[0]) + "," + std::to_string(w[1]) + "," + std::to_string(w[2]) + "," + std::to_string(w[3]);
}

std::array<std::size_t, 4> parse_widths(std::string_view key, std::string_view text) {
  std::array<std::size_t, 4> out{};
  std::size_t i = 0;
  std::string_view rest = text;
  while (true) {
    const auto comma = rest.find(',');
    if (i == out.size()) bad_value(key, text, "four comma-separated widths");
    out[i++] = parse_uint(key, trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  if (i != out.size()) bad_value(key, text, "four comma-separated widths");
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

#define SEATLAB_REAL_FIELD(name) \
  Field{#name, [](const TrainConfig& c) { return format_real(c.name); }, \
        [](TrainConfig& c, std::string_view v) { c.name = parse_real(#name, v); }}
#define SEATLAB_UINT_FIELD(name) \
  Field{#name, [](const TrainConfig& c) { return std::to_string(c.name); }, \
        [](TrainConfig& c, std::string_view v) { c.name = parse_uint(#name, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SEATLAB_REAL_FIELD(alpha),
      SEATLAB_REAL_FIELD(beta),
      SEATLAB_REAL_FIELD(psi),
      SEATLAB_UINT_FIELD(max_iters),
      SEATLAB_UINT_FIELD(seed),
      Field{"stage", [](const TrainConfig& c) { return std::to_string(c.stage); },
            [](TrainConfig& c, std::string_view v) { c.stage = static_cast<int>(parse_uint("stage", v)); }},
      Field{"layer_switch", [](const TrainConfig& c) { return c.layer_switch.to_string(); },
            [](TrainConfig& c, std::string_view v) { c.layer_switch = LayerSwitchSpec::parse(v); }},
      Field{"norm_mode", [](const TrainConfig& c) { return std::string(to_string(c.norm_mode)); },
            [](TrainConfig& c, std::string_view v) { c.norm_mode = parse_norm_mode(v); }},
      SEATLAB_REAL_FIELD(lr_g),
      SEATLAB_REAL_FIELD(lr_d),
      SEATLAB_UINT_FIELD(eval_interval),
      SEATLAB_UINT_FIELD(image_size),
      SEATLAB_UINT_FIELD(num_classes),
      Field{"widths", [](const TrainConfig& c) { return format_widths(c.widths); },
            [](TrainConfig& c, std::string_view v) { c.widths = parse_widths("widths", v); }},
      SEATLAB_UINT_FIELD(n_train_src),
      SEATLAB_UINT_FIELD(n_train_trg),
      SEATLAB_UINT_FIELD(n_eval_trg),
      SEATLAB_UINT_FIELD(n_eval_src),
      SEATLAB_UINT_FIELD(data_seed),
      Field{"style_transfer", [](const TrainConfig& c) { return std::string(c.style_transfer ? "true" : "false"); },
            [](TrainConfig& c, std::string_view v) { c.style_transfer = parse_bool("style_transfer", v); }},
  };
  return table;
}

#undef SEATLAB_REAL_FIELD
#undef SEATLAB_UINT_FIELD

const Field& find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (f.key == key) return f;
  }
  throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
  find_field(key).set(config, trim(value));
}

std::string get_config_value(const TrainConfig& config, std::string_view key) { return find_field(key).get(config); }

void apply_config_text(TrainConfig& config, std::string_view text, const std::string& origin,
                       std::vector<std::string>* keys_set) {
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    try {
      set_config_value(config, key, std::string_view(line).substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (keys_set) keys_set->push_back(key);
  }
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  TrainConfig c;
  apply_config_text(c, ss.str(), path.string());
  return c;
}

std::string config_to_text(const TrainConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += f.key + "=" + f.get(config) + "\n";
  return out;
}

void save_config(const std::filesystem::path& path, const TrainConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << config_to_text(config);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::uint64_t config_hash(const TrainConfig& config) {
  TrainConfig c = config;
  c.layer_switch = {};
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_text(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_fingerprint(const TrainConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

}  // namespace seatlab
