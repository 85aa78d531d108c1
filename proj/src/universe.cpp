#include "vmcp/universe.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace vmcp {

namespace {

// Candidate score for greedy selection. Zero (or negative) marginal cost
// makes the ratio unbounded; such candidates rank first by marginal value.
struct GreedyScore {
  bool free = false;
  double key = 0.0;
};

GreedyScore ratio_score(double marginal_value, double marginal_cost) {
  if (marginal_cost <= 0.0) return {true, marginal_value};
  return {false, marginal_value / marginal_cost};
}

bool better(const GreedyScore& a, const GreedyScore& b) {
  if (a.free != b.free) return a.free;
  return a.key > b.key;
}

UniverseSeq chain_from_order(const std::vector<int>& order, UniverseKind kind) {
  UniverseSeq out;
  out.kind = kind;
  out.sets.reserve(order.size() + 1);
  LabelSet current;
  out.sets.push_back(current);
  for (int k : order) {
    current = current.with(k);
    out.sets.push_back(current);
  }
  return out;
}

// Stable sort by descending score keeps ascending class index among ties.
UniverseSeq chain_by_scores(const std::vector<GreedyScore>& scores, UniverseKind kind) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return better(scores[static_cast<std::size_t>(a)], scores[static_cast<std::size_t>(b)]);
  });
  return chain_from_order(order, kind);
}

void check_probs(std::span<const double> probs) {
  LabelSet::check_count(static_cast<int>(probs.size()));
}

}  // namespace

std::string_view to_string(UniverseKind kind) {
  switch (kind) {
    case UniverseKind::Full: return "full";
    case UniverseKind::Prob: return "prob";
    case UniverseKind::Value: return "value";
    case UniverseKind::RatioAdditive: return "ratio-additive";
    case UniverseKind::RatioGeneral: return "ratio-general";
  }
  return "?";
}

bool UniverseSeq::nested() const {
  if (sets.empty() || !sets.front().empty()) return false;
  for (std::size_t j = 1; j < sets.size(); ++j) {
    if (!sets[j - 1].subset_of(sets[j]) || sets[j].size() != sets[j - 1].size() + 1) return false;
  }
  return true;
}

UniverseSeq full_universe(const SetProxy& cost_proxy) {
  const int num_classes = cost_proxy.num_classes();
  if (num_classes > kMaxFullUniverseClasses)
    throw std::invalid_argument("full universe limited to " + std::to_string(kMaxFullUniverseClasses) + " classes");
  const std::uint64_t count = std::uint64_t{1} << num_classes;

  std::vector<std::pair<double, std::uint64_t>> keyed;
  keyed.reserve(count);
  for (std::uint64_t bits = 0; bits < count; ++bits) keyed.emplace_back(cost_proxy(LabelSet(bits)), bits);
  std::sort(keyed.begin(), keyed.end());

  UniverseSeq out;
  out.kind = UniverseKind::Full;
  out.sets.reserve(count);
  for (const auto& [cost, bits] : keyed) out.sets.emplace_back(bits);
  // A zero-cost proxy can tie with the empty set; bitmask order keeps ∅ first.
  return out;
}

UniverseSeq greedy_prob(std::span<const double> probs) {
  check_probs(probs);
  std::vector<GreedyScore> scores;
  scores.reserve(probs.size());
  for (double p : probs) scores.push_back({false, p});
  return chain_by_scores(scores, UniverseKind::Prob);
}

UniverseSeq greedy_value(std::span<const double> probs, std::span<const double> value_weights) {
  check_probs(probs);
  if (value_weights.size() != probs.size()) throw std::invalid_argument("value weights length mismatch");
  std::vector<GreedyScore> scores;
  scores.reserve(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (value_weights[k] < 0.0) throw std::invalid_argument("value weights must be >= 0");
    scores.push_back({false, probs[k] * value_weights[k]});
  }
  return chain_by_scores(scores, UniverseKind::Value);
}

UniverseSeq greedy_ratio_additive(std::span<const double> probs, std::span<const double> value_weights,
                                  std::span<const double> marginal_costs) {
  check_probs(probs);
  if (value_weights.size() != probs.size() || marginal_costs.size() != probs.size())
    throw std::invalid_argument("ratio universe: vector lengths must equal the class count");
  std::vector<GreedyScore> scores;
  scores.reserve(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    scores.push_back(ratio_score(probs[k] * value_weights[k], marginal_costs[k]));
  }
  return chain_by_scores(scores, UniverseKind::RatioAdditive);
}

UniverseSeq greedy_ratio_general(const SetProxy& value_proxy, const SetProxy& cost_proxy) {
  const int num_classes = cost_proxy.num_classes();
  if (value_proxy.num_classes() != num_classes) throw std::invalid_argument("proxy class counts differ");

  UniverseSeq out;
  out.kind = UniverseKind::RatioGeneral;
  out.sets.reserve(static_cast<std::size_t>(num_classes) + 1);
  LabelSet current;
  out.sets.push_back(current);
  for (int step = 0; step < num_classes; ++step) {
    int best_k = -1;
    GreedyScore best;
    for (int k = 0; k < num_classes; ++k) {
      if (current.contains(k)) continue;
      const GreedyScore s = ratio_score(value_proxy.marginal(k, current), cost_proxy.marginal(k, current));
      if (best_k < 0 || better(s, best)) {
        best_k = k;
        best = s;
      }
    }
    current = current.with(best_k);
    out.sets.push_back(current);
  }
  return out;
}

}  // namespace vmcp
