// vmcp: generate synthetic streams, run cost-controlled prediction
// experiments, cross-check thresholds against direct search, benchmark.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vmcp/errors.hpp"
#include "vmcp/experiment.hpp"
#include "vmcp/io.hpp"
#include "vmcp/set_functions.hpp"
#include "vmcp/synth.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kAssert = 3 };

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vmcp::ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw vmcp::DataError("cannot write " + path);
  return out;
}

std::vector<vmcp::Sample> load_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vmcp::DataError("cannot open " + path);
  try {
    return vmcp::read_stream_csv(in);
  } catch (const vmcp::DataError& e) {
    throw vmcp::DataError(path + ": " + e.what());
  }
}

struct GenerateArgs {
  std::string config_path;
  std::string out_path;
  std::optional<int> num_classes;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<double> base_rate;
  std::optional<double> heterogeneity;
  std::optional<double> miscalibration;
};

struct RunArgs {
  std::string config_path;
  std::string stream_path;
  std::string out_path;
  std::string log_path;
  std::string weights_path;
  std::optional<std::string> mode, universe, method, value, cost;
  std::vector<double> targets;
  std::vector<std::uint64_t> seeds;
  std::optional<double> delta;
  std::optional<std::size_t> n_test, burn_in, window;
  std::optional<int> mc_samples;
  bool assert_bounds = false;
  bool timing = false;
  std::size_t checkpoints = 10;
};

struct BenchArgs {
  std::vector<std::size_t> n_grid{1000, 10000, 100000, 1000000};
  std::string out_path;
  double budget_seconds = 30.0;
  std::size_t updates = 200;
  std::uint64_t seed = 0;
  bool assert_shape = false;
};

void add_run_overrides(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--config", a.config_path, "Run config JSON");
  cmd->add_option("--stream", a.stream_path, "Stream CSV")->required();
  cmd->add_option("--mode", a.mode, "expected|violation");
  cmd->add_option("--targets", a.targets, "Cost targets, comma separated")->delimiter(',');
  cmd->add_option("--delta", a.delta, "Violation level");
  cmd->add_option("--universe", a.universe, "full|prob|value|ratio");
  cmd->add_option("--method", a.method, "conformal|classwise");
  cmd->add_option("--value", a.value, "tp|tpc|gen");
  cmd->add_option("--cost", a.cost, "fp|fpc");
  cmd->add_option("--weights", a.weights_path, "Class weight CSV (class,weight)");
  cmd->add_option("--seeds", a.seeds, "Seeds, comma separated")->delimiter(',');
  cmd->add_option("--n-test", a.n_test, "Samples per seed slice");
  cmd->add_option("--burn-in", a.burn_in, "Samples observed before predicting");
  cmd->add_option("--window", a.window, "Rolling calibration window");
  cmd->add_option("--mc-samples", a.mc_samples, "Monte-Carlo draws for non-additive proxies");
}

vmcp::RunConfig resolve_run_config(const RunArgs& a, int num_classes) {
  vmcp::RunConfig c = a.config_path.empty() ? vmcp::RunConfig{} : vmcp::parse_run_config(read_file(a.config_path));
  try {
    if (a.mode) c.mode = vmcp::parse_control_mode(*a.mode);
    if (a.universe) c.universe = vmcp::parse_universe_choice(*a.universe);
    if (a.method) c.method = vmcp::parse_method(*a.method);
    if (a.value) c.value = vmcp::parse_set_function_kind(*a.value);
    if (a.cost) c.cost = vmcp::parse_set_function_kind(*a.cost);
  } catch (const std::invalid_argument& e) {
    throw vmcp::ConfigError(e.what());
  }
  if (!a.targets.empty()) c.cost_targets = a.targets;
  if (!a.seeds.empty()) c.seeds = a.seeds;
  if (a.delta) c.delta = *a.delta;
  if (a.n_test) c.n_test = *a.n_test;
  if (a.burn_in) c.burn_in = *a.burn_in;
  if (a.window) c.window = *a.window;
  if (a.mc_samples) c.mc_samples = *a.mc_samples;
  if (!a.weights_path.empty()) {
    std::ifstream in(a.weights_path);
    if (!in) throw vmcp::ConfigError("cannot open " + a.weights_path);
    c.class_weights = vmcp::load_weights_csv(in, num_classes);
  }
  c.validate();
  return c;
}

int cmd_generate(const GenerateArgs& a) {
  vmcp::GeneratorConfig g =
      a.config_path.empty() ? vmcp::GeneratorConfig{} : vmcp::parse_generator_config(read_file(a.config_path));
  if (a.num_classes) g.num_classes = *a.num_classes;
  if (a.n) g.n = *a.n;
  if (a.seed) g.seed = *a.seed;
  if (a.base_rate) g.base_rate = *a.base_rate;
  if (a.heterogeneity) g.heterogeneity = *a.heterogeneity;
  if (a.miscalibration) g.miscalibration = *a.miscalibration;
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw vmcp::ConfigError(e.what());
  }
  if (g.n == 0) throw vmcp::ConfigError("n must be positive");
  const auto samples = vmcp::generate(g);
  auto out = open_out(a.out_path);
  vmcp::write_stream_csv(out, samples);
  std::cerr << "wrote " << samples.size() << " samples (K=" << g.num_classes << ") to " << a.out_path << '\n';
  return kOk;
}

int cmd_run(const RunArgs& a) {
  const auto stream = load_stream(a.stream_path);
  if (stream.empty()) throw vmcp::DataError(a.stream_path + ": no data rows");
  const vmcp::RunConfig config = resolve_run_config(a, stream.front().num_classes());

  vmcp::RunOptions options;
  options.keep_log = !a.log_path.empty();
  options.timing = a.timing;
  const auto start = std::chrono::steady_clock::now();
  const vmcp::RunResult result = vmcp::run_experiment(config, stream, options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto aggregates = vmcp::aggregate(result.rows);

  if (a.out_path.empty()) {
    vmcp::write_metrics_csv(std::cout, result.rows, aggregates, a.timing);
  } else {
    auto out = open_out(a.out_path);
    vmcp::write_metrics_csv(out, result.rows, aggregates, a.timing);
    vmcp::print_summary(std::cout, config, aggregates);
  }
  if (options.keep_log) {
    auto log = open_out(a.log_path);
    vmcp::write_prediction_log(log, result.log);
  }
  std::fprintf(stderr, "run finished in %.2f s\n", seconds);

  if (a.assert_bounds) {
    const auto failures = vmcp::check_run_assertions(config, aggregates);
    for (const auto& f : failures) std::cerr << "assertion failed: " << f << '\n';
    if (!failures.empty()) return kAssert;
  }
  return kOk;
}

int cmd_oracle_check(const RunArgs& a) {
  const auto stream = load_stream(a.stream_path);
  if (stream.empty()) throw vmcp::DataError(a.stream_path + ": no data rows");
  const vmcp::RunConfig config = resolve_run_config(a, stream.front().num_classes());
  const auto report = vmcp::oracle_check(config, stream, a.checkpoints);
  std::cout << "comparisons=" << report.comparisons << " mismatches=" << report.mismatches
            << " boundary_cases=" << report.boundary_cases << '\n';
  for (const auto& d : report.details) std::cout << "  mismatch: " << d << '\n';
  return a.assert_bounds && report.mismatches > 0 ? kAssert : kOk;
}

int cmd_bench(const BenchArgs& a) {
  vmcp::BenchConfig config;
  config.n_grid = a.n_grid;
  config.oracle_budget_seconds = a.budget_seconds;
  config.updates = a.updates;
  config.seed = a.seed;
  const auto rows = vmcp::run_bench(config);
  if (a.out_path.empty()) {
    vmcp::write_bench_csv(std::cout, rows);
  } else {
    auto out = open_out(a.out_path);
    vmcp::write_bench_csv(out, rows);
  }

  std::vector<double> tree_n, tree_t, oracle_n, oracle_t;
  bool oracle_dnf = false;
  for (const auto& r : rows) {
    if (r.method == "tree") {
      tree_n.push_back(static_cast<double>(r.n));
      tree_t.push_back(r.per_update_us);
    } else if (r.finished) {
      oracle_n.push_back(static_cast<double>(r.n));
      oracle_t.push_back(r.per_update_us);
    } else {
      oracle_dnf = true;
    }
  }
  std::optional<double> tree_slope, oracle_slope;
  if (tree_n.size() >= 2) tree_slope = vmcp::loglog_slope(tree_n, tree_t);
  if (oracle_n.size() >= 2) oracle_slope = vmcp::loglog_slope(oracle_n, oracle_t);
  std::cerr << "tree exponent: " << (tree_slope ? std::to_string(*tree_slope) : "n/a")
            << "  oracle exponent: " << (oracle_slope ? std::to_string(*oracle_slope) : "n/a")
            << (oracle_dnf ? " (did not finish at largest N)" : "") << '\n';
  if (a.assert_shape) {
    const bool tree_ok = tree_slope && *tree_slope < 0.3;
    const bool oracle_ok = oracle_dnf || (oracle_slope && *oracle_slope > 0.8);
    if (!tree_ok || !oracle_ok) return kAssert;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Value-maximizing prediction sets with online conformal cost control"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic stream CSV");
  generate->add_option("--config", gen.config_path, "Generator config JSON");
  generate->add_option("--out", gen.out_path, "Output CSV")->required();
  generate->add_option("--num-classes", gen.num_classes, "Number of classes K");
  generate->add_option("-n,--n", gen.n, "Number of samples");
  generate->add_option("--seed", gen.seed, "RNG seed");
  generate->add_option("--base-rate", gen.base_rate, "Mean label probability");
  generate->add_option("--heterogeneity", gen.heterogeneity, "Logit spread");
  generate->add_option("--miscalibration", gen.miscalibration, "Multiplier applied to emitted probabilities");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run controllers over seed slices and write metrics");
  add_run_overrides(run_cmd, run);
  run_cmd->add_option("--out", run.out_path, "Metrics CSV (stdout when omitted)");
  run_cmd->add_option("--log", run.log_path, "Per-prediction log CSV");
  run_cmd->add_flag("--assert", run.assert_bounds, "Exit 3 when the guarantee bounds are missed");
  run_cmd->add_flag("--timing", run.timing, "Add the per-update time column");

  RunArgs check;
  auto* check_cmd = app.add_subcommand("oracle-check", "Compare tree thresholds with direct search");
  add_run_overrides(check_cmd, check);
  check_cmd->add_option("--checkpoints", check.checkpoints, "Comparisons per (seed, target) slice");
  check_cmd->add_flag("--assert", check.assert_bounds, "Exit 3 on any mismatch");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time per-update threshold maintenance");
  bench_cmd->add_option("--n-grid", bench.n_grid, "Calibration sizes, comma separated")->delimiter(',');
  bench_cmd->add_option("--out", bench.out_path, "Timing CSV (stdout when omitted)");
  bench_cmd->add_option("--budget-seconds", bench.budget_seconds, "Oracle wall-clock budget per update");
  bench_cmd->add_option("--updates", bench.updates, "Timed updates per grid point");
  bench_cmd->add_option("--seed", bench.seed, "Stream seed");
  bench_cmd->add_flag("--assert", bench.assert_shape, "Exit 3 unless the scaling exponents match");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*run_cmd) return cmd_run(run);
    if (*check_cmd) return cmd_oracle_check(check);
    if (*bench_cmd) return cmd_bench(bench);
  } catch (const vmcp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const vmcp::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
