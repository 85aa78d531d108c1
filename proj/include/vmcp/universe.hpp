#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "vmcp/label_set.hpp"
#include "vmcp/set_functions.hpp"

namespace vmcp {

enum class UniverseKind { Full, Prob, Value, RatioAdditive, RatioGeneral };

std::string_view to_string(UniverseKind kind);

/// Largest class count accepted by full_universe().
inline constexpr int kMaxFullUniverseClasses = 20;

/// Candidate prediction sets for one instance. The empty set is always
/// first; greedy kinds form a nested chain of length K + 1 and Full is
/// ordered by ascending proxy cost.
struct UniverseSeq {
  std::vector<LabelSet> sets;
  UniverseKind kind = UniverseKind::Prob;

  std::size_t size() const noexcept { return sets.size(); }
  /// True when each set extends its predecessor by exactly one class.
  bool nested() const;
};

/// All 2^K subsets, sorted by proxy cost (ties by bitmask).
UniverseSeq full_universe(const SetProxy& cost_proxy);

/// Chain ordered by descending probability.
UniverseSeq greedy_prob(std::span<const double> probs);

/// Chain ordered by descending p_k * v_k.
UniverseSeq greedy_value(std::span<const double> probs, std::span<const double> value_weights);

/// Chain ordered by descending r_k = p_k v_k / ĉ_k. Classes with zero
/// marginal cost come first, by descending p_k v_k.
UniverseSeq greedy_ratio_additive(std::span<const double> probs, std::span<const double> value_weights,
                                  std::span<const double> marginal_costs);

/// Chain grown one class at a time by the best marginal value / marginal
/// cost ratio relative to the current set. Zero-cost steps rank above all
/// others, by marginal value.
UniverseSeq greedy_ratio_general(const SetProxy& value_proxy, const SetProxy& cost_proxy);

}  // namespace vmcp
