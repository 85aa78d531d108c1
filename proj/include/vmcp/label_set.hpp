#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace vmcp {

inline constexpr int kMaxClasses = 64;

/// Subset of the classes {0, ..., K-1}, K <= 64, stored as one bitmask.
class LabelSet {
 public:
  constexpr LabelSet() noexcept = default;
  constexpr explicit LabelSet(std::uint64_t bits) noexcept : bits_(bits) {}
  LabelSet(std::initializer_list<int> classes) {
    for (int k : classes) *this = with(k);
  }

  static LabelSet full(int num_classes) {
    check_count(num_classes);
    return LabelSet(num_classes == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << num_classes) - 1);
  }

  static LabelSet from_indices(const std::vector<int>& classes) {
    LabelSet s;
    for (int k : classes) s = s.with(k);
    return s;
  }

  constexpr std::uint64_t bits() const noexcept { return bits_; }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr int size() const noexcept { return std::popcount(bits_); }

  bool contains(int k) const { return (bits_ >> checked(k)) & 1U; }
  LabelSet with(int k) const { return LabelSet(bits_ | (std::uint64_t{1} << checked(k))); }
  LabelSet without(int k) const { return LabelSet(bits_ & ~(std::uint64_t{1} << checked(k))); }

  constexpr LabelSet operator&(LabelSet o) const noexcept { return LabelSet(bits_ & o.bits_); }
  constexpr LabelSet operator|(LabelSet o) const noexcept { return LabelSet(bits_ | o.bits_); }
  /// Set difference.
  constexpr LabelSet operator-(LabelSet o) const noexcept { return LabelSet(bits_ & ~o.bits_); }
  constexpr bool operator==(const LabelSet&) const noexcept = default;

  constexpr bool subset_of(LabelSet o) const noexcept { return (bits_ & ~o.bits_) == 0; }

  /// Members in ascending order.
  std::vector<int> indices() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) out.push_back(std::countr_zero(b));
    return out;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) fn(std::countr_zero(b));
  }

  std::string to_string() const {
    std::string s = "{";
    bool first = true;
    for_each([&](int k) {
      if (!first) s += ',';
      s += std::to_string(k);
      first = false;
    });
    return s + "}";
  }

  static void check_count(int num_classes) {
    if (num_classes < 1 || num_classes > kMaxClasses)
      throw std::invalid_argument("number of classes must be in [1, 64]");
  }

 private:
  static int checked(int k) {
    if (k < 0 || k >= kMaxClasses) throw std::out_of_range("class index out of range");
    return k;
  }

  std::uint64_t bits_ = 0;
};

/// A calibrated probability vector with its true label set.
struct Sample {
  std::vector<double> probs;
  LabelSet labels;

  int num_classes() const noexcept { return static_cast<int>(probs.size()); }
};

}  // namespace vmcp
