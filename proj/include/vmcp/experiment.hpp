#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vmcp/controller.hpp"
#include "vmcp/label_set.hpp"
#include "vmcp/set_functions.hpp"
#include "vmcp/synth.hpp"
#include "vmcp/universe.hpp"

namespace vmcp {

/// Candidate family used by the harness. Ratio picks the closed-form
/// ordering when both proxies are analytic and the general one otherwise.
enum class UniverseChoice { Full, Prob, Value, Ratio };

enum class Method { Conformal, ClassWise };

UniverseChoice parse_universe_choice(std::string_view name);
std::string_view to_string(UniverseChoice choice);
Method parse_method(std::string_view name);
std::string_view to_string(Method method);

struct RunConfig {
  ControlMode mode = ControlMode::Expected;
  std::vector<double> cost_targets{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  double delta = 0.1;
  UniverseChoice universe = UniverseChoice::Ratio;
  Method method = Method::Conformal;
  SetFunctionKind value = SetFunctionKind::TruePositiveWeighted;
  SetFunctionKind cost = SetFunctionKind::FalsePositive;
  /// Class weights for tpc/fpc; empty means mnist_weights(K).
  std::vector<double> class_weights;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t n_test = 3000;
  std::size_t burn_in = 1000;
  std::optional<std::size_t> window;
  int mc_samples = 100;

  /// Throws ConfigError.
  void validate() const;
};

/// Parses a JSON run config; unknown keys are rejected. Throws ConfigError.
RunConfig parse_run_config(std::string_view json_text);
GeneratorConfig parse_generator_config(std::string_view json_text);
std::string to_json(const RunConfig& config);
std::string to_json(const GeneratorConfig& config);

/// Per (seed, target) outcome. The `_se` fields are standard errors of the
/// mean over that slice's predictions.
struct MetricsRow {
  std::uint64_t seed = 0;
  double target = 0.0;
  std::size_t n_predictions = 0;
  double mean_value = 0.0;
  double value_se = 0.0;
  double excess_cost = 0.0;
  double cost_se = 0.0;
  double violation_freq = 0.0;
  double mean_update_us = 0.0;
};

/// Mean and standard deviation across seeds for one target; `target` is
/// unset for the row averaged over all targets.
struct AggregateRow {
  std::optional<double> target;
  std::size_t n_seeds = 0;
  double value_mean = 0.0, value_std = 0.0;
  double excess_mean = 0.0, excess_std = 0.0;
  double violation_mean = 0.0, violation_std = 0.0;
  double update_us_mean = 0.0;
};

struct PredictionEntry {
  std::uint64_t seed = 0;
  double target = 0.0;
  std::size_t index = 0;  // position within the seed's slice
  LabelSet set;
  double value = 0.0;
  double cost = 0.0;
};

struct RunOptions {
  bool keep_log = false;
  bool timing = false;
  /// 0 reads VMCP_THREADS, falling back to the hardware concurrency.
  unsigned threads = 0;
};

struct RunResult {
  std::vector<MetricsRow> rows;  // sorted by (seed position, target)
  std::vector<PredictionEntry> log;
};

/// Streams every seed's slice (rows [i * n_test, (i + 1) * n_test) for the
/// i-th seed) through one controller per target. Throws DataError when the
/// stream is too short or its class count is unusable.
RunResult run_experiment(const RunConfig& config, std::span<const Sample> stream, const RunOptions& options = {});

std::vector<AggregateRow> aggregate(std::span<const MetricsRow> rows);

/// Metrics CSV: `seed` rows (errors are standard errors) then `aggregate`
/// rows per target and for `all` targets (errors are standard deviations
/// across seeds). The update-time column is written only with `timing`.
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows, std::span<const AggregateRow> aggregates,
                       bool timing);
void write_prediction_log(std::ostream& out, std::span<const PredictionEntry> log);

/// Human-readable mean ± std table.
void print_summary(std::ostream& out, const RunConfig& config, std::span<const AggregateRow> aggregates);

/// Acceptance bounds used by `run --assert`: expected mode needs each
/// target's mean excess cost in [-0.6, 0.3]; violation mode needs the overall
/// violation frequency within 1.5 points of delta. Returns failure messages.
std::vector<std::string> check_run_assertions(const RunConfig& config, std::span<const AggregateRow> aggregates);

/// Everything the controller needs about one instance.
struct PreparedSample {
  UniverseSeq universe;
  std::vector<double> proxy_values;
  SampleRecord record;
};

/// Shared per-instance pipeline: proxies (Monte-Carlo seeded by
/// `proxy_seed`), universe, proxy values and the max-cost record.
PreparedSample prepare_sample(const Sample& sample, const SetFunction& value_fn, const SetFunction& cost_fn,
                              UniverseChoice choice, int mc_samples, std::uint64_t proxy_seed);

UniverseSeq build_universe(UniverseChoice choice, std::span<const double> probs, const SetProxy& value_proxy,
                           const SetProxy& cost_proxy);

struct OracleCheckReport {
  std::size_t comparisons = 0;
  std::size_t mismatches = 0;
  std::size_t boundary_cases = 0;
  std::vector<std::string> details;  // first few mismatches
};

/// Replays every (seed, target) slice, comparing the tree threshold with
/// the direct-search threshold at `checkpoints` evenly spaced positions.
OracleCheckReport oracle_check(const RunConfig& config, std::span<const Sample> stream, std::size_t checkpoints);

struct BenchConfig {
  std::vector<std::size_t> n_grid{1000, 10000, 100000, 1000000};
  std::size_t updates = 200;
  double oracle_budget_seconds = 30.0;
  int num_classes = 10;
  double target_cost = 10.0;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string method;  // "tree" or "oracle"
  std::size_t n = 0;
  std::size_t updates = 0;
  double per_update_us = 0.0;
  bool finished = true;
};

/// Per-update calibration cost (threshold query plus insertion) of the
/// tree and of the direct search, at each calibration size in the grid. The
/// oracle stops with a did-not-finish row once one point exceeds the budget.
std::vector<BenchRow> run_bench(const BenchConfig& config);
void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace vmcp
