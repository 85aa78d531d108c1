#include "vmcp/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "vmcp/errors.hpp"
#include "vmcp/synth.hpp"

namespace {

using vmcp::RunConfig;

RunConfig small_config() {
  RunConfig c;
  c.cost_targets = {10, 30};
  c.seeds = {0, 1, 2};
  c.n_test = 300;
  c.burn_in = 100;
  return c;
}

std::vector<vmcp::Sample> stream(std::size_t n, std::uint64_t seed = 0) {
  vmcp::GeneratorConfig g;
  g.n = n;
  g.seed = seed;
  return vmcp::generate(g);
}

TEST(RunConfig, DefaultsFollowExperimentProtocol) {
  const RunConfig c;
  EXPECT_EQ(c.cost_targets.size(), 10u);
  EXPECT_EQ(c.cost_targets.front(), 5.0);
  EXPECT_EQ(c.cost_targets.back(), 50.0);
  EXPECT_EQ(c.delta, 0.1);
  EXPECT_EQ(c.n_test, 3000u);
  EXPECT_EQ(c.burn_in, 1000u);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, ParsesAndRoundTrips) {
  const RunConfig c = vmcp::parse_run_config(R"({"mode": "violation", "cost_targets": [5, 25], "delta": 0.2,
      "universe": "prob", "value": "tp", "cost": "fpc", "seeds": [3], "n_test": 500, "burn_in": 50,
      "window": 100, "mc_samples": 20})");
  EXPECT_EQ(c.mode, vmcp::ControlMode::Violation);
  EXPECT_EQ(c.cost_targets, (std::vector<double>{5, 25}));
  EXPECT_EQ(c.universe, vmcp::UniverseChoice::Prob);
  EXPECT_EQ(c.value, vmcp::SetFunctionKind::TruePositive);
  EXPECT_EQ(c.cost, vmcp::SetFunctionKind::FalsePositiveWeighted);
  EXPECT_EQ(c.window, std::optional<std::size_t>(100));
  const RunConfig again = vmcp::parse_run_config(vmcp::to_json(c));
  EXPECT_EQ(vmcp::to_json(again), vmcp::to_json(c));
}

TEST(RunConfig, RejectsInvalidInput) {
  EXPECT_THROW(vmcp::parse_run_config(R"({"bogus": 1})"), vmcp::ConfigError);
  EXPECT_THROW(vmcp::parse_run_config(R"({"mode": "sometimes"})"), vmcp::ConfigError);
  EXPECT_THROW(vmcp::parse_run_config(R"({"cost_targets": [0]})"), vmcp::ConfigError);
  EXPECT_THROW(vmcp::parse_run_config(R"({"cost_targets": [120]})"), vmcp::ConfigError);
  EXPECT_THROW(vmcp::parse_run_config(R"({"n_test": 100, "burn_in": 100})"), vmcp::ConfigError);
  EXPECT_THROW(vmcp::parse_run_config(R"({"delta": "x"})"), vmcp::ConfigError);
  EXPECT_THROW(vmcp::parse_run_config("[1, 2]"), vmcp::ConfigError);
  EXPECT_THROW(vmcp::parse_run_config("{"), vmcp::ConfigError);
  EXPECT_THROW(vmcp::parse_run_config(R"({"method": "classwise", "cost": "fpc"})"), vmcp::ConfigError);
}

TEST(GeneratorConfig, ParsesAndValidates) {
  const auto g = vmcp::parse_generator_config(R"({"num_classes": 3, "n": 10, "seed": 4})");
  EXPECT_EQ(g.num_classes, 3);
  EXPECT_EQ(g.n, 10u);
  EXPECT_EQ(vmcp::to_json(vmcp::parse_generator_config(vmcp::to_json(g))), vmcp::to_json(g));
  EXPECT_THROW(vmcp::parse_generator_config(R"({"base_rate": 2})"), vmcp::ConfigError);
  EXPECT_THROW(vmcp::parse_generator_config(R"({"k": 3})"), vmcp::ConfigError);
}

TEST(Run, ShortStreamIsDataError) {
  EXPECT_THROW(vmcp::run_experiment(small_config(), stream(899)), vmcp::DataError);
}

TEST(Run, FullUniverseNeedsFewClasses) {
  RunConfig c = small_config();
  c.universe = vmcp::UniverseChoice::Full;
  vmcp::GeneratorConfig g;
  g.num_classes = 21;
  g.n = 900;
  EXPECT_THROW(vmcp::run_experiment(c, vmcp::generate(g)), vmcp::ConfigError);
}

TEST(Run, NoTruePositivesMeansZeroValue) {
  auto s = stream(900);
  for (auto& x : s) x.labels = vmcp::LabelSet{};
  RunConfig c = small_config();
  c.value = vmcp::SetFunctionKind::TruePositive;
  const auto result = vmcp::run_experiment(c, s);
  for (const auto& row : result.rows) {
    EXPECT_EQ(row.mean_value, 0.0);
    EXPECT_EQ(row.n_predictions, 200u);
  }
  for (const auto& a : vmcp::aggregate(result.rows)) EXPECT_LE(a.excess_mean, 0.0);
}

TEST(Run, MetricsMatchPredictionLog) {
  RunConfig c = small_config();
  c.value = vmcp::SetFunctionKind::General;
  c.cost = vmcp::SetFunctionKind::FalsePositiveWeighted;
  c.mc_samples = 20;
  vmcp::RunOptions options;
  options.keep_log = true;
  const auto result = vmcp::run_experiment(c, stream(900, 8), options);
  ASSERT_EQ(result.log.size(), 3u * 2u * 200u);

  std::map<std::pair<std::uint64_t, double>, std::tuple<double, double, double, std::size_t>> acc;
  for (const auto& e : result.log) {
    auto& [v, cost, viol, n] = acc[{e.seed, e.target}];
    v += e.value;
    cost += e.cost;
    viol += e.cost > e.target ? 1.0 : 0.0;
    ++n;
  }
  ASSERT_EQ(acc.size(), result.rows.size());
  for (const auto& row : result.rows) {
    const auto& [v, cost, viol, n] = acc.at({row.seed, row.target});
    EXPECT_EQ(row.n_predictions, n);
    EXPECT_NEAR(row.mean_value, v / n, 1e-9);
    EXPECT_NEAR(row.excess_cost, cost / n - row.target, 1e-9);
    EXPECT_NEAR(row.violation_freq, viol / n, 1e-12);
    EXPECT_GE(row.violation_freq, 0.0);
    EXPECT_LE(row.violation_freq, 1.0);
  }
}

TEST(Run, MetricsFileIsByteIdentical) {
  const RunConfig c = small_config();
  const auto s = stream(900, 2);
  std::string first;
  for (unsigned threads : {1U, 3U}) {
    vmcp::RunOptions options;
    options.threads = threads;
    const auto result = vmcp::run_experiment(c, s, options);
    std::ostringstream out;
    vmcp::write_metrics_csv(out, result.rows, vmcp::aggregate(result.rows), false);
    if (first.empty()) {
      first = out.str();
    } else {
      EXPECT_EQ(out.str(), first);
    }
  }
  EXPECT_EQ(first.substr(0, first.find('\n')),
            "row,seed,target,n,value,value_err,excess_cost,excess_cost_err,violation_freq,violation_freq_err");
}

TEST(Run, SeedSlicesAreDisjointChunks) {
  RunConfig c = small_config();
  c.seeds = {5};
  auto s = stream(900, 3);
  const auto alone = vmcp::run_experiment(c, std::span(s).subspan(0, 300));
  c.seeds = {5, 6, 7};
  const auto all = vmcp::run_experiment(c, s);
  ASSERT_EQ(alone.rows.size(), 2u);
  EXPECT_EQ(all.rows[0].mean_value, alone.rows[0].mean_value);
  EXPECT_EQ(all.rows[1].excess_cost, alone.rows[1].excess_cost);
}

TEST(Run, ClassWiseNeedsFalsePositiveCost) {
  RunConfig c = small_config();
  c.method = vmcp::Method::ClassWise;
  const auto result = vmcp::run_experiment(c, stream(900));
  EXPECT_EQ(result.rows.size(), 6u);
  c.cost = vmcp::SetFunctionKind::FalsePositiveWeighted;
  EXPECT_THROW(vmcp::run_experiment(c, stream(900)), vmcp::ConfigError);
}

TEST(Aggregate, MeanAndStdAcrossSeeds) {
  std::vector<vmcp::MetricsRow> rows(4);
  rows[0] = {0, 10.0, 5, 1.0, 0.0, -1.0, 0.0, 0.1, 0.0};
  rows[1] = {1, 10.0, 5, 3.0, 0.0, 1.0, 0.0, 0.3, 0.0};
  rows[2] = {0, 20.0, 5, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  rows[3] = {1, 20.0, 5, 7.0, 0.0, 2.0, 0.0, 0.2, 0.0};
  const auto agg = vmcp::aggregate(rows);
  ASSERT_EQ(agg.size(), 3u);
  EXPECT_EQ(*agg[0].target, 10.0);
  EXPECT_DOUBLE_EQ(agg[0].value_mean, 2.0);
  EXPECT_DOUBLE_EQ(agg[0].value_std, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(agg[1].excess_mean, 1.0);
  EXPECT_FALSE(agg[2].target.has_value());
  // Seed means over targets: values 3 and 5.
  EXPECT_DOUBLE_EQ(agg[2].value_mean, 4.0);
  EXPECT_DOUBLE_EQ(agg[2].value_std, std::sqrt(2.0));
  EXPECT_EQ(agg[2].n_seeds, 2u);
}

TEST(Aggregate, AssertionBounds) {
  RunConfig c;
  vmcp::AggregateRow ok;
  ok.target = 10.0;
  ok.excess_mean = -0.5;
  vmcp::AggregateRow bad = ok;
  bad.excess_mean = 0.4;
  EXPECT_TRUE(vmcp::check_run_assertions(c, std::vector{ok}).empty());
  EXPECT_EQ(vmcp::check_run_assertions(c, std::vector{ok, bad}).size(), 1u);
  c.mode = vmcp::ControlMode::Violation;
  vmcp::AggregateRow all;
  all.violation_mean = 0.11;
  EXPECT_TRUE(vmcp::check_run_assertions(c, std::vector{all}).empty());
  all.violation_mean = 0.08;
  EXPECT_EQ(vmcp::check_run_assertions(c, std::vector{all}).size(), 1u);
}

TEST(OracleCheck, ThreeSampleStream) {
  RunConfig c;
  c.cost_targets = {20, 40};
  c.seeds = {0};
  c.n_test = 3;
  c.burn_in = 0;
  const auto report = vmcp::oracle_check(c, stream(3, 1), 3);
  EXPECT_EQ(report.comparisons, 6u);
  EXPECT_EQ(report.mismatches, 0u);
}

TEST(OracleCheck, ThousandSamplesTenCheckpoints) {
  RunConfig c;
  c.cost_targets = {5, 15, 30};
  c.seeds = {0};
  c.n_test = 1000;
  c.burn_in = 0;
  c.cost = vmcp::SetFunctionKind::FalsePositiveWeighted;
  for (auto mode : {vmcp::ControlMode::Expected, vmcp::ControlMode::Violation}) {
    c.mode = mode;
    const auto report = vmcp::oracle_check(c, stream(1000, 4), 10);
    EXPECT_EQ(report.comparisons, 30u);
    EXPECT_EQ(report.mismatches, 0u);
  }
}

TEST(OracleCheck, DiscretizedProxiesCountBoundaryCases) {
  auto s = stream(400, 6);
  for (auto& x : s) {
    for (double& p : x.probs) p = 0.5;
  }
  RunConfig c;
  c.cost_targets = {10, 20, 30};
  c.seeds = {0};
  c.n_test = 400;
  c.burn_in = 0;
  c.universe = vmcp::UniverseChoice::Prob;
  const auto report = vmcp::oracle_check(c, s, 20);
  EXPECT_EQ(report.mismatches, 0u);
  EXPECT_GT(report.boundary_cases, 0u);
}

TEST(Bench, OneRowPerMethodAndSize) {
  vmcp::BenchConfig b;
  b.n_grid = {200, 2000};
  b.updates = 20;
  b.oracle_budget_seconds = 5.0;
  const auto rows = vmcp::run_bench(b);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].method, "tree");
  EXPECT_EQ(rows[1].method, "oracle");
  EXPECT_EQ(rows[2].n, 2000u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.finished);
    EXPECT_GT(r.per_update_us, 0.0);
  }
  std::ostringstream out;
  vmcp::write_bench_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "method,n,updates,per_update_us,status");
}

TEST(Bench, LogLogSlope) {
  const std::vector<double> x{1e3, 1e4, 1e5};
  const std::vector<double> y{std::sqrt(1e3), std::sqrt(1e4), std::sqrt(1e5)};
  EXPECT_NEAR(vmcp::loglog_slope(x, y), 0.5, 1e-12);
  EXPECT_THROW(vmcp::loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), std::invalid_argument);
}

}  // namespace
