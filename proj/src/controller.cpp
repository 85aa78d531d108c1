#include "vmcp/controller.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "vmcp/errors.hpp"

namespace vmcp {

ControlMode parse_control_mode(std::string_view name) {
  if (name == "expected") return ControlMode::Expected;
  if (name == "violation") return ControlMode::Violation;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "' (expected expected|violation)");
}

std::string_view to_string(ControlMode mode) {
  return mode == ControlMode::Expected ? "expected" : "violation";
}

SampleRecord make_record(std::vector<double> proxy_costs, std::vector<double> costs) {
  if (proxy_costs.empty() || proxy_costs.size() != costs.size())
    throw std::invalid_argument("record needs matching, non-empty proxy and true cost vectors");
  if (proxy_costs.front() != 0.0 || costs.front() != 0.0)
    throw std::invalid_argument("record must start with the empty set at zero cost");
  for (std::size_t j = 1; j < proxy_costs.size(); ++j) {
    if (!(proxy_costs[j] >= proxy_costs[j - 1]))
      throw std::invalid_argument("universe is not sorted by proxy cost");
  }

  SampleRecord r;
  r.running_max.resize(costs.size());
  r.weights.resize(costs.size());
  double worst = 0.0;
  for (std::size_t j = 0; j < costs.size(); ++j) {
    if (!(costs[j] >= 0.0)) throw std::invalid_argument("true costs must be non-negative");
    const double next = std::max(worst, costs[j]);
    r.weights[j] = j == 0 ? 0.0 : next - worst;
    r.running_max[j] = next;
    worst = next;
  }
  r.proxy_costs = std::move(proxy_costs);
  r.costs = std::move(costs);
  return r;
}

SampleRecord max_cost_curve(const UniverseSeq& universe, LabelSet labels, const SetFunction& cost,
                            const SetProxy& cost_proxy) {
  if (universe.sets.empty() || !universe.sets.front().empty())
    throw std::invalid_argument("universe must start with the empty set");
  std::vector<double> proxy_costs;
  std::vector<double> costs;
  proxy_costs.reserve(universe.size());
  costs.reserve(universe.size());
  for (LabelSet s : universe.sets) {
    proxy_costs.push_back(cost_proxy(s));
    costs.push_back(cost(s, labels));
  }
  return make_record(std::move(proxy_costs), std::move(costs));
}

double violation_point(const SampleRecord& record, double target_cost) {
  for (std::size_t j = 0; j < record.size(); ++j) {
    if (record.running_max[j] > target_cost) return record.proxy_costs[j];
  }
  return kAboveAll;
}

double max_cost_below(const SampleRecord& record, double t) {
  double worst = 0.0;
  for (std::size_t j = 0; j < record.size(); ++j) {
    if (record.proxy_costs[j] < t) worst = std::max(worst, record.costs[j]);
  }
  return worst;
}

std::size_t select_best(std::span<const double> proxy_costs, std::span<const double> proxy_values,
                        double threshold) {
  if (proxy_costs.size() != proxy_values.size()) throw std::invalid_argument("select_best: length mismatch");
  std::size_t best = 0;
  bool found = false;
  for (std::size_t j = 0; j < proxy_costs.size(); ++j) {
    if (!(proxy_costs[j] < threshold)) continue;
    if (!found || proxy_values[j] > proxy_values[best] ||
        (proxy_values[j] == proxy_values[best] && proxy_costs[j] < proxy_costs[best])) {
      best = j;
      found = true;
    }
  }
  return best;
}

OnlineController::OnlineController(ControllerConfig config) : config_(config) {
  if (!(config_.target_cost > 0.0)) throw std::invalid_argument("target cost must be positive");
  if (!(config_.max_cost > 0.0)) throw std::invalid_argument("max cost must be positive");
  if (config_.mode == ControlMode::Violation && !(config_.delta > 0.0 && config_.delta < 1.0))
    throw std::invalid_argument("delta must lie in (0, 1)");
  if (config_.window && *config_.window == 0) throw std::invalid_argument("window must be positive");
  if (config_.window) config_.retain_records = true;
}

OnlineController::Masses OnlineController::masses_for(const SampleRecord& record) const {
  Masses masses;
  if (config_.mode == ControlMode::Violation) {
    masses.emplace_back(violation_point(record, config_.target_cost), 1.0);
    return masses;
  }
  for (std::size_t j = 1; j < record.size(); ++j) {
    if (record.weights[j] > 0.0) masses.emplace_back(record.proxy_costs[j], record.weights[j]);
  }
  return masses;
}

OnlineController::RecordId OnlineController::observe(const SampleRecord& record) {
  Masses masses = masses_for(record);
  for (const auto& [value, weight] : masses) tree_.insert(value, weight);
  const RecordId id = next_id_++;
  if (config_.retain_records) cache_.emplace(id, std::move(masses));
  ++n_seen_;
  if (config_.window && n_seen_ > *config_.window) forget(cache_.begin()->first);
  return id;
}

void OnlineController::forget(RecordId id) {
  const auto it = cache_.find(id);
  if (it == cache_.end()) throw KeyNotFoundError("no cached record with id " + std::to_string(id));
  for (const auto& [value, weight] : it->second) tree_.remove(value, weight);
  cache_.erase(it);
  --n_seen_;
}

double OnlineController::threshold() const {
  return config_.mode == ControlMode::Expected ? threshold_expected() : threshold_violation();
}

double OnlineController::threshold_expected() const {
  const double budget = static_cast<double>(n_seen_ + 1) * config_.target_cost - config_.max_cost;
  if (budget <= 0.0) return kBelowAll;
  const double total = tree_.total_weight();
  // No stored mass: every past sample had zero cost everywhere.
  if (tree_.empty() || total <= 0.0) return kAboveAll;
  const double q = budget / total;
  if (q > 1.0) return kAboveAll;
  return tree_.query_quantile(q);
}

double OnlineController::threshold_violation() const {
  const double budget = static_cast<double>(n_seen_ + 1) * config_.delta - 1.0;
  if (budget <= 0.0) return kBelowAll;
  if (tree_.empty()) throw EmptyDistributionError("violation threshold on an empty tree");
  return tree_.query_quantile(std::min(1.0, budget / tree_.total_weight()));
}

std::optional<LabelSet> OnlineController::predict(const UniverseSeq& universe,
                                                  std::span<const double> proxy_costs,
                                                  std::span<const double> proxy_values) const {
  if (!ready()) return std::nullopt;
  if (proxy_costs.size() != universe.size()) throw std::invalid_argument("predict: proxy costs length mismatch");
  return universe.sets[select_best(proxy_costs, proxy_values, threshold())];
}

void OnlineController::write_snapshot(std::ostream& out) const {
  const auto old_precision = out.precision(17);
  out << "# mode=" << to_string(config_.mode) << '\n'
      << "# target_cost=" << config_.target_cost << '\n'
      << "# delta=" << config_.delta << '\n'
      << "# max_cost=" << config_.max_cost << '\n'
      << "# burn_in=" << config_.burn_in << '\n'
      << "# window=" << (config_.window ? std::to_string(*config_.window) : std::string("none")) << '\n'
      << "# n_seen=" << n_seen_ << '\n'
      << "# total_weight=" << tree_.total_weight() << '\n'
      << "# threshold=" << threshold() << '\n';
  out.precision(old_precision);
  tree_.write_csv(out);
}

std::size_t conformal_rank(double level, std::size_t n) {
  if (level <= 0.0) return 0;
  const double x = level * static_cast<double>(n + 1);
  const double r = std::ceil(x - 1e-9 * std::max(1.0, x));
  return std::max<std::size_t>(1, static_cast<std::size_t>(r));
}

std::vector<double> classwise_thresholds(std::span<const Sample> calibration, double target_cost,
                                         double max_cost) {
  if (!(target_cost > 0.0)) throw std::invalid_argument("target cost must be positive");
  if (calibration.empty()) throw std::invalid_argument("classwise thresholds need calibration samples");
  const int num_classes = calibration.front().num_classes();
  const double level = 1.0 - target_cost / max_cost;

  std::vector<double> thresholds(static_cast<std::size_t>(num_classes));
  std::vector<double> scores;
  for (int k = 0; k < num_classes; ++k) {
    scores.clear();
    for (const Sample& s : calibration) {
      if (s.num_classes() != num_classes) throw std::invalid_argument("calibration samples disagree on K");
      if (!s.labels.contains(k)) scores.push_back(s.probs[static_cast<std::size_t>(k)]);
    }
    double& t = thresholds[static_cast<std::size_t>(k)];
    const std::size_t rank = conformal_rank(level, scores.size());
    if (rank == 0) {
      t = kBelowAll;
    } else if (rank > scores.size()) {
      t = kAboveAll;
    } else {
      auto nth = scores.begin() + static_cast<std::ptrdiff_t>(rank - 1);
      std::nth_element(scores.begin(), nth, scores.end());
      t = *nth;
    }
  }
  return thresholds;
}

LabelSet classwise_predict(std::span<const double> probs, std::span<const double> thresholds) {
  if (probs.size() != thresholds.size()) throw std::invalid_argument("classwise_predict: length mismatch");
  LabelSet s;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] > thresholds[k]) s = s.with(static_cast<int>(k));
  }
  return s;
}

ClassWiseController::ClassWiseController(int num_classes, double target_cost, double max_cost)
    : level_(1.0 - target_cost / max_cost), negatives_(static_cast<std::size_t>(num_classes)) {
  LabelSet::check_count(num_classes);
  if (!(target_cost > 0.0)) throw std::invalid_argument("target cost must be positive");
}

void ClassWiseController::observe(const Sample& sample) {
  if (sample.probs.size() != negatives_.size()) throw std::invalid_argument("sample class count mismatch");
  for (std::size_t k = 0; k < negatives_.size(); ++k) {
    if (!sample.labels.contains(static_cast<int>(k))) negatives_[k].insert(sample.probs[k], 1.0);
  }
  ++n_seen_;
}

std::vector<double> ClassWiseController::thresholds() const {
  std::vector<double> out(negatives_.size());
  for (std::size_t k = 0; k < negatives_.size(); ++k) {
    const QuantileTree& tree = negatives_[k];
    const auto n = static_cast<std::size_t>(std::llround(tree.total_weight()));
    const std::size_t rank = conformal_rank(level_, n);
    if (rank == 0) {
      out[k] = kBelowAll;
    } else if (rank > n) {
      out[k] = kAboveAll;
    } else {
      // Mid-rank level: unit masses make the r-th smallest unambiguous.
      out[k] = tree.query_quantile((static_cast<double>(rank) - 0.5) / static_cast<double>(n));
    }
  }
  return out;
}

namespace {

std::vector<double> candidate_thresholds(std::span<const SampleRecord> records) {
  std::vector<double> candidates;
  for (const SampleRecord& r : records) candidates.insert(candidates.end(), r.proxy_costs.begin(), r.proxy_costs.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.empty() || candidates.back() != kAboveAll) candidates.push_back(kAboveAll);
  return candidates;
}

// Largest index whose candidate satisfies a predicate that holds on a prefix.
template <typename Pred>
std::size_t last_satisfying(const std::vector<double>& candidates, Pred&& ok) {
  std::size_t lo = 0;
  std::size_t hi = candidates.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (ok(candidates[mid])) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace

OracleThreshold oracle_threshold_expected(std::span<const SampleRecord> records, double target_cost,
                                          double max_cost) {
  const double budget = static_cast<double>(records.size() + 1) * target_cost - max_cost;
  if (budget < 0.0) return {kBelowAll, false};

  auto aggregate = [&](double t) {
    double total = 0.0;
    for (const SampleRecord& r : records) total += max_cost_below(r, t);
    return total;
  };
  const std::vector<double> candidates = candidate_thresholds(records);
  // The aggregate is 0 at the smallest candidate, so index 0 always qualifies.
  const std::size_t i = last_satisfying(candidates, [&](double c) { return aggregate(c) <= budget; });
  // Rounding in the telescoped tree weights can move an exact hit to either
  // side, so a hit at the successor counts as well.
  const bool hit = nearly_equal(aggregate(candidates[i]), budget) ||
                   (i + 1 < candidates.size() && nearly_equal(aggregate(candidates[i + 1]), budget));
  return {candidates[i], hit};
}

OracleThreshold oracle_threshold_violation(std::span<const SampleRecord> records, double target_cost,
                                           double delta) {
  const double n = static_cast<double>(records.size());
  const double needed = (1.0 - delta) * (n + 1.0);
  if (n < needed) return {kBelowAll, false};

  auto within = [&](double t) {
    std::size_t count = 0;
    for (const SampleRecord& r : records) count += max_cost_below(r, t) <= target_cost ? 1 : 0;
    return static_cast<double>(count);
  };
  const std::vector<double> candidates = candidate_thresholds(records);
  const std::size_t i = last_satisfying(candidates, [&](double c) { return within(c) >= needed; });
  const bool hit = nearly_equal(within(candidates[i]), needed) ||
                   (i + 1 < candidates.size() && nearly_equal(within(candidates[i + 1]), needed));
  return {candidates[i], hit};
}

}  // namespace vmcp
