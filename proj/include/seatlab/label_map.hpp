#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace seatlab {

inline constexpr std::uint8_t kIgnoreIndex = 255;

// H×W class map; 255 marks ignored pixels.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), data(h * w, fill) {}
  std::uint8_t& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
  bool operator==(const LabelMap&) const = default;
};

// Throws when a label is neither a class id below num_classes nor 255.
void validate_labels(const LabelMap& labels, std::size_t num_classes);

}  // namespace seatlab
