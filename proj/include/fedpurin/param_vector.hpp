#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedpurin {

/// Contiguous slice of the flat parameter vector owned by one dense layer
/// (weights followed by bias).
struct LayerRange {
  std::size_t layer_id = 0;
  std::size_t offset = 0;
  std::size_t length = 0;

  std::size_t end() const noexcept { return offset + length; }
  bool operator==(const LayerRange&) const = default;
};

using Layout = std::vector<LayerRange>;

/// Total length covered by `layout`. Throws ConfigError unless the ranges
/// are contiguous from 0 and sorted by layer id.
std::size_t validate_layout(const Layout& layout);

/// Flat model parameters with their per-layer layout.
struct ParamVector {
  std::vector<double> values;
  Layout layout;

  ParamVector() = default;
  ParamVector(std::vector<double> v, Layout l);

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t j) { return values[j]; }
  double operator[](std::size_t j) const { return values[j]; }
  std::span<const double> layer(std::size_t k) const {
    return std::span<const double>(values).subspan(layout[k].offset, layout[k].length);
  }
  std::size_t nonzeros() const noexcept;

  bool operator==(const ParamVector&) const = default;
};

/// Bit vector aligned to a ParamVector. Bit j set means parameter j is
/// critical.
class Mask {
 public:
  Mask() = default;
  explicit Mask(std::size_t size, bool value = false);
  static Mask from_bits(std::span<const int> bits);

  std::size_t size() const noexcept { return size_; }
  bool test(std::size_t j) const noexcept { return (words_[j >> 6] >> (j & 63)) & 1U; }
  void set(std::size_t j, bool value = true) noexcept {
    const std::uint64_t bit = std::uint64_t{1} << (j & 63);
    if (value) {
      words_[j >> 6] |= bit;
    } else {
      words_[j >> 6] &= ~bit;
    }
  }

  std::size_t popcount() const noexcept;
  /// Set bits within [begin, end).
  std::size_t popcount(std::size_t begin, std::size_t end) const noexcept;
  /// Number of positions where the masks differ; ||a - b||_1.
  std::size_t hamming(const Mask& other) const;
  /// popcount(a AND b).
  std::size_t intersection(const Mask& other) const;
  Mask complement() const;
  /// Packed size when transmitted at one bit per element.
  std::size_t packed_bytes() const noexcept { return (size_ + 7) / 8; }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool operator==(const Mask&) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// theta ⊙ mask: value where the bit is set, +0.0 elsewhere.
ParamVector apply_mask(const ParamVector& theta, const Mask& mask);

}  // namespace fedpurin
