#include "fedpurin/param_vector.hpp"

#include <algorithm>
#include <string>

#include "fedpurin/errors.hpp"

namespace fedpurin {

std::size_t validate_layout(const Layout& layout) {
  std::size_t next = 0;
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto& r = layout[k];
    if (r.offset != next) {
      throw ConfigError("layout range " + std::to_string(k) + " starts at " +
                        std::to_string(r.offset) + ", expected " + std::to_string(next));
    }
    if (k > 0 && r.layer_id <= layout[k - 1].layer_id) {
      throw ConfigError("layout ranges must be sorted by layer id");
    }
    next = r.end();
  }
  return next;
}

ParamVector::ParamVector(std::vector<double> v, Layout l) : values(std::move(v)), layout(std::move(l)) {
  if (validate_layout(layout) != values.size()) {
    throw ConfigError("layout covers " + std::to_string(validate_layout(layout)) +
                      " parameters but vector has " + std::to_string(values.size()));
  }
}

std::size_t ParamVector::nonzeros() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](double x) { return x != 0.0; }));
}

Mask::Mask(std::size_t size, bool value)
    : size_(size), words_((size + 63) / 64, value ? ~std::uint64_t{0} : 0) {
  if (value && (size_ & 63) != 0) {
    words_.back() &= (std::uint64_t{1} << (size_ & 63)) - 1;
  }
}

Mask Mask::from_bits(std::span<const int> bits) {
  Mask m(bits.size());
  for (std::size_t j = 0; j < bits.size(); ++j) m.set(j, bits[j] != 0);
  return m;
}

std::size_t Mask::popcount() const noexcept {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::size_t Mask::popcount(std::size_t begin, std::size_t end) const noexcept {
  std::size_t n = 0;
  for (std::size_t j = begin; j < end; ++j) n += test(j) ? 1 : 0;
  return n;
}

std::size_t Mask::hamming(const Mask& other) const {
  if (other.size_ != size_) throw ConfigError("mask length mismatch");
  std::size_t n = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    n += static_cast<std::size_t>(std::popcount(words_[w] ^ other.words_[w]));
  }
  return n;
}

std::size_t Mask::intersection(const Mask& other) const {
  if (other.size_ != size_) throw ConfigError("mask length mismatch");
  std::size_t n = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    n += static_cast<std::size_t>(std::popcount(words_[w] & other.words_[w]));
  }
  return n;
}

Mask Mask::complement() const {
  Mask out(size_, true);
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] &= ~words_[w];
  return out;
}

ParamVector apply_mask(const ParamVector& theta, const Mask& mask) {
  if (mask.size() != theta.size()) throw ConfigError("mask length does not match parameters");
  ParamVector out = theta;
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (!mask.test(j)) out.values[j] = 0.0;
  }
  return out;
}

}  // namespace fedpurin
