#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "vmcp/label_set.hpp"
#include "vmcp/quantile_tree.hpp"
#include "vmcp/set_functions.hpp"
#include "vmcp/universe.hpp"

namespace vmcp {

enum class ControlMode { Expected, Violation };

ControlMode parse_control_mode(std::string_view name);
std::string_view to_string(ControlMode mode);

/// Per-sample calibration data derived from one universe, sorted by proxy
/// cost. `running_max[j]` is the worst true cost among the first j+1 sets and
/// `weights[j]` its increment over j-1 (0 for j = 0), so the weights
/// telescope to running_max.back().
struct SampleRecord {
  std::vector<double> proxy_costs;
  std::vector<double> costs;
  std::vector<double> running_max;
  std::vector<double> weights;

  std::size_t size() const noexcept { return proxy_costs.size(); }
};

/// Builds the record from already-evaluated proxy and true costs. The first
/// entry must be the empty set (both costs 0) and proxy costs must be
/// non-decreasing; violations throw std::invalid_argument.
SampleRecord make_record(std::vector<double> proxy_costs, std::vector<double> costs);

/// Evaluates `cost` and `cost_proxy` on every set of `universe`.
SampleRecord max_cost_curve(const UniverseSeq& universe, LabelSet labels, const SetFunction& cost,
                            const SetProxy& cost_proxy);

/// Smallest proxy threshold t with C⁺(t) > target, i.e. the proxy cost of
/// the first set whose running max exceeds the target; kAboveAll if none.
double violation_point(const SampleRecord& record, double target_cost);

/// C⁺(t) evaluated directly: worst true cost among sets with proxy < t.
double max_cost_below(const SampleRecord& record, double t);

/// Index of the admissible set (proxy cost < threshold) with the largest
/// proxy value; ties go to the smaller proxy cost, then the earlier index.
/// Falls back to index 0 (the empty set) when nothing is admissible.
std::size_t select_best(std::span<const double> proxy_costs, std::span<const double> proxy_values,
                        double threshold);

struct ControllerConfig {
  ControlMode mode = ControlMode::Expected;
  double target_cost = 10.0;
  double delta = 0.1;
  double max_cost = kNormalizedBound;
  std::size_t burn_in = 1000;
  /// Rolling window size; unset keeps an expanding window.
  std::optional<std::size_t> window;
  /// Keep inserted masses per record so they can be deleted later. Always
  /// on when a window is set.
  bool retain_records = true;
};

/**
 * Online conformal cost control over a stream of sample records.
 *
 * Expected mode stores every positive (proxy cost, weight) pair of each
 * record; the threshold is the weighted quantile at
 * ((N+1) c - C_max) / total_weight. Violation mode stores one unit mass per
 * record at its violation point; the threshold is the quantile at
 * ((N+1) delta - 1) / N.
 *
 * An exact hit of the queried level on a stored cumulative weight is not
 * stepped to the successor value, which makes the threshold at most one
 * candidate smaller than the supremum form.
 */
class OnlineController {
 public:
  using RecordId = std::uint64_t;

  explicit OnlineController(ControllerConfig config);

  /// Adds a record; evicts the oldest one when the window overflows.
  RecordId observe(const SampleRecord& record);
  /// Removes a previously observed record. Throws KeyNotFoundError.
  void forget(RecordId id);

  double threshold() const;
  double threshold_expected() const;
  double threshold_violation() const;

  /// Past burn-in: n_seen() >= burn_in.
  bool ready() const noexcept { return n_seen_ >= config_.burn_in; }

  /// std::nullopt during burn-in; otherwise the selected set.
  std::optional<LabelSet> predict(const UniverseSeq& universe, std::span<const double> proxy_costs,
                                  std::span<const double> proxy_values) const;

  std::size_t n_seen() const noexcept { return n_seen_; }
  const QuantileTree& tree() const noexcept { return tree_; }
  const ControllerConfig& config() const noexcept { return config_; }

  /// Scalar fields as `# key=value` lines followed by the tree CSV.
  void write_snapshot(std::ostream& out) const;

 private:
  using Masses = std::vector<std::pair<double, double>>;

  Masses masses_for(const SampleRecord& record) const;

  ControllerConfig config_;
  QuantileTree tree_;
  std::size_t n_seen_ = 0;
  RecordId next_id_ = 0;
  std::map<RecordId, Masses> cache_;
};

/// Per-class split-conformal thresholds at level 1 - c / C_max computed
/// from the scores of calibration samples where the class is absent. With
/// a normalized false-positive cost each class carries C_max / K, so this
/// splits the budget c evenly across classes.
std::vector<double> classwise_thresholds(std::span<const Sample> calibration, double target_cost,
                                         double max_cost = kNormalizedBound);

/// {k : p_k > t_k}.
LabelSet classwise_predict(std::span<const double> probs, std::span<const double> thresholds);

/// Online form of classwise_thresholds() keeping one QuantileTree of
/// negative-class scores per class.
class ClassWiseController {
 public:
  ClassWiseController(int num_classes, double target_cost, double max_cost = kNormalizedBound);

  void observe(const Sample& sample);
  std::vector<double> thresholds() const;
  LabelSet predict(std::span<const double> probs) const { return classwise_predict(probs, thresholds()); }
  std::size_t n_seen() const noexcept { return n_seen_; }

 private:
  double level_;
  std::vector<QuantileTree> negatives_;
  std::size_t n_seen_ = 0;
};

/// Conformal rank ceil(level * (n + 1)), guarded against rounding up an
/// exact integer product.
std::size_t conformal_rank(double level, std::size_t n);

struct OracleThreshold {
  double threshold = kBelowAll;
  /// The aggregate at the threshold or at the next candidate equals the
  /// budget (within rounding), so the supremum and the weighted-quantile
  /// forms may differ by one candidate.
  bool boundary = false;
};

/// sup{t : (C_max + sum_i C⁺(t; Z_i)) / (N+1) <= c} by binary search over all
/// candidate proxy costs, evaluating C⁺ from the raw (proxy, cost) pairs.
OracleThreshold oracle_threshold_expected(std::span<const SampleRecord> records, double target_cost,
                                          double max_cost = kNormalizedBound);

/// sup{t : #{i : C⁺(t; Z_i) <= c} >= (1 - delta)(N+1)} by the same search.
OracleThreshold oracle_threshold_violation(std::span<const SampleRecord> records, double target_cost,
                                           double delta);

}  // namespace vmcp
