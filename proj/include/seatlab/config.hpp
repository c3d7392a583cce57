#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "seatlab/training.hpp"

namespace seatlab {

// Field names accepted in config files, in the order config_to_text emits
// them.
const std::vector<std::string>& config_keys();

// Sets one field from its text form. Unknown keys and malformed values throw
// std::invalid_argument naming the key.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const TrainConfig& config, std::string_view key);

// Flat "key=value" lines; blank lines and lines starting with '#' are
// skipped. Keys not mentioned keep their current values. The keys that were
// set are appended to `keys_set` when given.
void apply_config_text(TrainConfig& config, std::string_view text, const std::string& origin = "config",
                       std::vector<std::string>* keys_set = nullptr);
TrainConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const TrainConfig& config);
void save_config(const std::filesystem::path& path, const TrainConfig& config);

// FNV-1a over the canonical text of every field that influences training
// (the evaluation-time layer switch is left out).
std::uint64_t config_hash(const TrainConfig& config);
std::string config_fingerprint(const TrainConfig& config);

}  // namespace seatlab
