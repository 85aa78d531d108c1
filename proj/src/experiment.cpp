#include "vmcp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "vmcp/errors.hpp"
#include "vmcp/seeding.hpp"

namespace vmcp {

using nlohmann::json;

UniverseChoice parse_universe_choice(std::string_view name) {
  if (name == "full") return UniverseChoice::Full;
  if (name == "prob") return UniverseChoice::Prob;
  if (name == "value") return UniverseChoice::Value;
  if (name == "ratio") return UniverseChoice::Ratio;
  throw std::invalid_argument("unknown universe '" + std::string(name) + "' (expected full|prob|value|ratio)");
}

std::string_view to_string(UniverseChoice choice) {
  switch (choice) {
    case UniverseChoice::Full: return "full";
    case UniverseChoice::Prob: return "prob";
    case UniverseChoice::Value: return "value";
    case UniverseChoice::Ratio: return "ratio";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "conformal") return Method::Conformal;
  if (name == "classwise") return Method::ClassWise;
  throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected conformal|classwise)");
}

std::string_view to_string(Method method) { return method == Method::Conformal ? "conformal" : "classwise"; }

void RunConfig::validate() const {
  if (cost_targets.empty()) throw ConfigError("cost_targets must not be empty");
  for (double c : cost_targets) {
    if (!(c > 0.0 && c <= kNormalizedBound)) throw ConfigError("cost targets must lie in (0, 100]");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (n_test == 0) throw ConfigError("n_test must be positive");
  if (burn_in >= n_test) throw ConfigError("burn_in must be smaller than n_test");
  if (window && *window == 0) throw ConfigError("window must be positive");
  if (mc_samples < 1) throw ConfigError("mc_samples must be >= 1");
  if (method == Method::ClassWise && cost != SetFunctionKind::FalsePositive)
    throw ConfigError("classwise baseline only controls the fp cost");
}

namespace {

template <typename Fn>
auto config_errors(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json parse_object(std::string_view text) {
  json j = json::parse(text.begin(), text.end());
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  return j;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  return config_errors([&] {
    const json j = parse_object(json_text);
    RunConfig c;
    for (const auto& [key, v] : j.items()) {
      if (key == "mode") {
        c.mode = parse_control_mode(v.get<std::string>());
      } else if (key == "cost_targets") {
        c.cost_targets = v.get<std::vector<double>>();
      } else if (key == "delta") {
        c.delta = v.get<double>();
      } else if (key == "universe") {
        c.universe = parse_universe_choice(v.get<std::string>());
      } else if (key == "method") {
        c.method = parse_method(v.get<std::string>());
      } else if (key == "value") {
        c.value = parse_set_function_kind(v.get<std::string>());
      } else if (key == "cost") {
        c.cost = parse_set_function_kind(v.get<std::string>());
      } else if (key == "class_weights") {
        c.class_weights = v.get<std::vector<double>>();
      } else if (key == "seeds") {
        c.seeds = v.get<std::vector<std::uint64_t>>();
      } else if (key == "n_test") {
        c.n_test = v.get<std::size_t>();
      } else if (key == "burn_in") {
        c.burn_in = v.get<std::size_t>();
      } else if (key == "window") {
        if (v.is_null()) {
          c.window.reset();
        } else {
          c.window = v.get<std::size_t>();
        }
      } else if (key == "mc_samples") {
        c.mc_samples = v.get<int>();
      } else {
        throw ConfigError("unknown run config key '" + key + "'");
      }
    }
    c.validate();
    return c;
  });
}

GeneratorConfig parse_generator_config(std::string_view json_text) {
  return config_errors([&] {
    const json j = parse_object(json_text);
    GeneratorConfig g;
    for (const auto& [key, v] : j.items()) {
      if (key == "num_classes") {
        g.num_classes = v.get<int>();
      } else if (key == "base_rate") {
        g.base_rate = v.get<double>();
      } else if (key == "heterogeneity") {
        g.heterogeneity = v.get<double>();
      } else if (key == "miscalibration") {
        g.miscalibration = v.get<double>();
      } else if (key == "seed") {
        g.seed = v.get<std::uint64_t>();
      } else if (key == "n") {
        g.n = v.get<std::size_t>();
      } else {
        throw ConfigError("unknown generator config key '" + key + "'");
      }
    }
    g.validate();
    return g;
  });
}

std::string to_json(const RunConfig& c) {
  json j;
  j["mode"] = std::string(to_string(c.mode));
  j["cost_targets"] = c.cost_targets;
  j["delta"] = c.delta;
  j["universe"] = std::string(to_string(c.universe));
  j["method"] = std::string(to_string(c.method));
  j["value"] = std::string(to_string(c.value));
  j["cost"] = std::string(to_string(c.cost));
  if (!c.class_weights.empty()) j["class_weights"] = c.class_weights;
  j["seeds"] = c.seeds;
  j["n_test"] = c.n_test;
  j["burn_in"] = c.burn_in;
  j["window"] = c.window ? json(*c.window) : json(nullptr);
  j["mc_samples"] = c.mc_samples;
  return j.dump(2);
}

std::string to_json(const GeneratorConfig& g) {
  json j;
  j["num_classes"] = g.num_classes;
  j["base_rate"] = g.base_rate;
  j["heterogeneity"] = g.heterogeneity;
  j["miscalibration"] = g.miscalibration;
  j["seed"] = g.seed;
  j["n"] = g.n;
  return j.dump(2);
}

UniverseSeq build_universe(UniverseChoice choice, std::span<const double> probs, const SetProxy& value_proxy,
                           const SetProxy& cost_proxy) {
  const int num_classes = static_cast<int>(probs.size());
  switch (choice) {
    case UniverseChoice::Full:
      return full_universe(cost_proxy);
    case UniverseChoice::Prob:
      return greedy_prob(probs);
    case UniverseChoice::Value: {
      if (value_proxy.analytic()) {
        std::vector<double> v(probs.size());
        for (int k = 0; k < num_classes; ++k) v[static_cast<std::size_t>(k)] = value_proxy.function().unit(k);
        return greedy_value(probs, v);
      }
      // Non-additive value: rank by the estimated value of each singleton,
      // which already folds in the probability.
      std::vector<double> ones(probs.size(), 1.0);
      std::vector<double> singleton(probs.size());
      for (int k = 0; k < num_classes; ++k) singleton[static_cast<std::size_t>(k)] = value_proxy.marginal(k, LabelSet{});
      for (double& s : singleton) s = std::max(0.0, s);
      return greedy_value(ones, singleton);
    }
    case UniverseChoice::Ratio: {
      if (value_proxy.analytic() && cost_proxy.analytic()) {
        std::vector<double> v(probs.size());
        std::vector<double> marginal_costs(probs.size());
        for (int k = 0; k < num_classes; ++k) {
          v[static_cast<std::size_t>(k)] = value_proxy.function().unit(k);
          marginal_costs[static_cast<std::size_t>(k)] = cost_proxy.marginal(k, LabelSet{});
        }
        return greedy_ratio_additive(probs, v, marginal_costs);
      }
      return greedy_ratio_general(value_proxy, cost_proxy);
    }
  }
  throw std::logic_error("unhandled universe choice");
}

PreparedSample prepare_sample(const Sample& sample, const SetFunction& value_fn, const SetFunction& cost_fn,
                              UniverseChoice choice, int mc_samples, std::uint64_t proxy_seed) {
  const ProxyOptions options{mc_samples, proxy_seed, false};
  const SetProxy cost_proxy(cost_fn, sample.probs, options);
  const SetProxy value_proxy(value_fn, sample.probs, options);
  PreparedSample out;
  out.universe = build_universe(choice, sample.probs, value_proxy, cost_proxy);
  out.proxy_values.reserve(out.universe.size());
  for (LabelSet s : out.universe.sets) out.proxy_values.push_back(value_proxy(s));
  out.record = max_cost_curve(out.universe, sample.labels, cost_fn, cost_proxy);
  return out;
}

namespace {

unsigned resolve_threads(unsigned requested, std::size_t jobs) {
  unsigned n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("VMCP_THREADS"); env != nullptr && *env != '\0') {
      n = static_cast<unsigned>(std::max(1L, std::strtol(env, nullptr, 10)));
    } else {
      n = std::max(1U, std::thread::hardware_concurrency());
    }
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Runs fn(i) for i in [0, jobs) on a small worker pool; rethrows the first
// failure after all workers stop.
template <typename Fn>
void parallel_for(std::size_t jobs, unsigned threads, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(jobs);
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

struct Accumulator {
  std::size_t n = 0;
  double value_sum = 0.0, value_sq = 0.0;
  double cost_sum = 0.0, cost_sq = 0.0;
  std::size_t violations = 0;
  double update_ns = 0.0;
  std::size_t updates = 0;

  void add(double value, double cost, double target) {
    ++n;
    value_sum += value;
    value_sq += value * value;
    cost_sum += cost;
    cost_sq += cost * cost;
    violations += cost > target ? 1 : 0;
  }

  MetricsRow finish(std::uint64_t seed, double target, bool timing) const {
    MetricsRow r;
    r.seed = seed;
    r.target = target;
    r.n_predictions = n;
    if (n > 0) {
      const double dn = static_cast<double>(n);
      auto se = [&](double sum, double sq) {
        if (n < 2) return 0.0;
        const double mean = sum / dn;
        const double var = std::max(0.0, (sq - dn * mean * mean) / (dn - 1.0));
        return std::sqrt(var / dn);
      };
      r.mean_value = value_sum / dn;
      r.value_se = se(value_sum, value_sq);
      r.excess_cost = cost_sum / dn - target;
      r.cost_se = se(cost_sum, cost_sq);
      r.violation_freq = static_cast<double>(violations) / dn;
    }
    if (timing && updates > 0) r.mean_update_us = update_ns / static_cast<double>(updates) / 1000.0;
    return r;
  }
};

struct SeedResult {
  std::vector<MetricsRow> rows;
  std::vector<PredictionEntry> log;
};

std::vector<double> resolve_weights(const RunConfig& config, int num_classes) {
  if (config.class_weights.empty()) return mnist_weights(num_classes);
  if (static_cast<int>(config.class_weights.size()) != num_classes)
    throw ConfigError("class_weights length does not match the stream's class count");
  return config.class_weights;
}

std::span<const Sample> seed_slice(const RunConfig& config, std::span<const Sample> stream, std::size_t position) {
  const std::size_t needed = config.n_test * config.seeds.size();
  if (stream.size() < needed)
    throw DataError("stream has " + std::to_string(stream.size()) + " rows; " + std::to_string(config.seeds.size()) +
                    " seeds x n_test=" + std::to_string(config.n_test) + " need " + std::to_string(needed));
  return stream.subspan(position * config.n_test, config.n_test);
}

int stream_classes(std::span<const Sample> stream) {
  if (stream.empty()) throw DataError("empty stream");
  const int k = stream.front().num_classes();
  LabelSet::check_count(k);
  for (const Sample& s : stream) {
    if (s.num_classes() != k) throw DataError("samples disagree on the class count");
  }
  return k;
}

SeedResult run_seed(const RunConfig& config, std::span<const Sample> slice, std::uint64_t seed,
                    const SetFunction& value_fn, const SetFunction& cost_fn, const RunOptions& options) {
  using Clock = std::chrono::steady_clock;
  const std::size_t n_targets = config.cost_targets.size();
  std::vector<Accumulator> acc(n_targets);
  SeedResult out;

  auto record_prediction = [&](std::size_t t, std::size_t index, LabelSet s, const Sample& sample) {
    const double value = value_fn(s, sample.labels);
    const double cost = cost_fn(s, sample.labels);
    acc[t].add(value, cost, config.cost_targets[t]);
    if (options.keep_log) out.log.push_back({seed, config.cost_targets[t], index, s, value, cost});
  };

  if (config.method == Method::ClassWise) {
    std::vector<ClassWiseController> controllers;
    controllers.reserve(n_targets);
    for (double c : config.cost_targets) controllers.emplace_back(cost_fn.num_classes(), c, cost_fn.bound());
    for (std::size_t i = 0; i < slice.size(); ++i) {
      for (std::size_t t = 0; t < n_targets; ++t) {
        const auto start = Clock::now();
        std::optional<LabelSet> chosen;
        if (controllers[t].n_seen() >= config.burn_in) chosen = controllers[t].predict(slice[i].probs);
        controllers[t].observe(slice[i]);
        if (options.timing) {
          acc[t].update_ns += std::chrono::duration<double, std::nano>(Clock::now() - start).count();
          ++acc[t].updates;
        }
        if (chosen) record_prediction(t, i, *chosen, slice[i]);
      }
    }
  } else {
    std::vector<OnlineController> controllers;
    controllers.reserve(n_targets);
    for (double c : config.cost_targets) {
      ControllerConfig cc;
      cc.mode = config.mode;
      cc.target_cost = c;
      cc.delta = config.delta;
      cc.max_cost = cost_fn.bound();
      cc.burn_in = config.burn_in;
      cc.window = config.window;
      cc.retain_records = config.window.has_value();
      controllers.emplace_back(cc);
    }
    for (std::size_t i = 0; i < slice.size(); ++i) {
      const PreparedSample prepared =
          prepare_sample(slice[i], value_fn, cost_fn, config.universe, config.mc_samples, derive_seed(seed, i));
      for (std::size_t t = 0; t < n_targets; ++t) {
        OnlineController& ctrl = controllers[t];
        const auto start = Clock::now();
        std::optional<LabelSet> chosen;
        if (ctrl.ready()) {
          const double threshold = ctrl.threshold();
          chosen = prepared.universe.sets[select_best(prepared.record.proxy_costs, prepared.proxy_values, threshold)];
        }
        ctrl.observe(prepared.record);
        if (options.timing) {
          acc[t].update_ns += std::chrono::duration<double, std::nano>(Clock::now() - start).count();
          ++acc[t].updates;
        }
        if (chosen) record_prediction(t, i, *chosen, slice[i]);
      }
    }
  }

  for (std::size_t t = 0; t < n_targets; ++t) out.rows.push_back(acc[t].finish(seed, config.cost_targets[t], options.timing));
  return out;
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

RunResult run_experiment(const RunConfig& config, std::span<const Sample> stream, const RunOptions& options) {
  config.validate();
  const int num_classes = stream_classes(stream);
  const std::vector<double> weights = resolve_weights(config, num_classes);
  const SetFunction value_fn(config.value, num_classes, weights);
  const SetFunction cost_fn(config.cost, num_classes, weights);
  if (config.universe == UniverseChoice::Full && num_classes > kMaxFullUniverseClasses)
    throw ConfigError("full universe needs at most 20 classes");
  if (value_fn.is_cost()) throw ConfigError("value must be one of tp|tpc|gen");
  if (!cost_fn.is_cost()) throw ConfigError("cost must be one of fp|fpc");

  const std::size_t jobs = config.seeds.size();
  std::vector<std::span<const Sample>> slices;
  for (std::size_t i = 0; i < jobs; ++i) slices.push_back(seed_slice(config, stream, i));

  std::vector<SeedResult> results(jobs);
  parallel_for(jobs, resolve_threads(options.threads, jobs), [&](std::size_t i) {
    results[i] = run_seed(config, slices[i], config.seeds[i], value_fn, cost_fn, options);
  });

  RunResult out;
  for (auto& r : results) {
    out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
    out.log.insert(out.log.end(), r.log.begin(), r.log.end());
  }
  return out;
}

std::vector<AggregateRow> aggregate(std::span<const MetricsRow> rows) {
  std::vector<double> targets;
  for (const MetricsRow& r : rows) {
    if (std::find(targets.begin(), targets.end(), r.target) == targets.end()) targets.push_back(r.target);
  }
  std::vector<std::uint64_t> seeds;
  for (const MetricsRow& r : rows) {
    if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
  }

  auto summarize = [](const std::vector<const MetricsRow*>& group, std::optional<double> target) {
    std::vector<double> v, e, viol, t;
    for (const MetricsRow* r : group) {
      v.push_back(r->mean_value);
      e.push_back(r->excess_cost);
      viol.push_back(r->violation_freq);
      t.push_back(r->mean_update_us);
    }
    AggregateRow a;
    a.target = target;
    a.n_seeds = group.size();
    a.value_mean = mean_of(v);
    a.value_std = std_of(v);
    a.excess_mean = mean_of(e);
    a.excess_std = std_of(e);
    a.violation_mean = mean_of(viol);
    a.violation_std = std_of(viol);
    a.update_us_mean = mean_of(t);
    return a;
  };

  std::vector<AggregateRow> out;
  for (double target : targets) {
    std::vector<const MetricsRow*> group;
    for (const MetricsRow& r : rows) {
      if (r.target == target) group.push_back(&r);
    }
    out.push_back(summarize(group, target));
  }

  // Overall row: average each seed over the targets first, then across seeds.
  std::vector<MetricsRow> per_seed;
  for (std::uint64_t seed : seeds) {
    MetricsRow m;
    m.seed = seed;
    std::size_t count = 0;
    for (const MetricsRow& r : rows) {
      if (r.seed != seed) continue;
      m.mean_value += r.mean_value;
      m.excess_cost += r.excess_cost;
      m.violation_freq += r.violation_freq;
      m.mean_update_us += r.mean_update_us;
      ++count;
    }
    const double dc = static_cast<double>(std::max<std::size_t>(count, 1));
    m.mean_value /= dc;
    m.excess_cost /= dc;
    m.violation_freq /= dc;
    m.mean_update_us /= dc;
    per_seed.push_back(m);
  }
  std::vector<const MetricsRow*> all;
  for (const MetricsRow& m : per_seed) all.push_back(&m);
  if (!all.empty()) out.push_back(summarize(all, std::nullopt));
  return out;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows, std::span<const AggregateRow> aggregates,
                       bool timing) {
  out << "row,seed,target,n,value,value_err,excess_cost,excess_cost_err,violation_freq,violation_freq_err";
  if (timing) out << ",update_us";
  out << '\n';
  for (const MetricsRow& r : rows) {
    const double n = static_cast<double>(std::max<std::size_t>(r.n_predictions, 1));
    const double viol_se = std::sqrt(r.violation_freq * (1.0 - r.violation_freq) / n);
    out << "seed," << r.seed << ',' << num(r.target) << ',' << r.n_predictions << ',' << num(r.mean_value) << ','
        << num(r.value_se) << ',' << num(r.excess_cost) << ',' << num(r.cost_se) << ',' << num(r.violation_freq) << ','
        << num(viol_se);
    if (timing) out << ',' << num(r.mean_update_us);
    out << '\n';
  }
  for (const AggregateRow& a : aggregates) {
    out << "aggregate,," << (a.target ? num(*a.target) : std::string("all")) << ',' << a.n_seeds << ','
        << num(a.value_mean) << ',' << num(a.value_std) << ',' << num(a.excess_mean) << ',' << num(a.excess_std) << ','
        << num(a.violation_mean) << ',' << num(a.violation_std);
    if (timing) out << ',' << num(a.update_us_mean);
    out << '\n';
  }
}

void write_prediction_log(std::ostream& out, std::span<const PredictionEntry> log) {
  out << "seed,target,index,set,value,cost\n";
  for (const PredictionEntry& e : log) {
    char value[64];
    char cost[64];
    std::snprintf(value, sizeof value, "%.17g", e.value);
    std::snprintf(cost, sizeof cost, "%.17g", e.cost);
    out << e.seed << ',' << num(e.target) << ',' << e.index << ',' << e.set.bits() << ',' << value << ',' << cost
        << '\n';
  }
}

void print_summary(std::ostream& out, const RunConfig& config, std::span<const AggregateRow> aggregates) {
  out << "mode=" << to_string(config.mode) << " method=" << to_string(config.method)
      << " universe=" << to_string(config.universe) << " value=" << to_string(config.value)
      << " cost=" << to_string(config.cost) << " seeds=" << config.seeds.size() << '\n';
  char line[160];
  std::snprintf(line, sizeof line, "%8s  %18s  %18s  %18s\n", "target", "value", "excess cost", "violation %");
  out << line;
  for (const AggregateRow& a : aggregates) {
    char target[16];
    if (a.target) {
      std::snprintf(target, sizeof target, "%.2f", *a.target);
    } else {
      std::snprintf(target, sizeof target, "all");
    }
    std::snprintf(line, sizeof line, "%8s  %9.2f ± %6.2f  %9.2f ± %6.2f  %9.2f ± %6.2f\n", target, a.value_mean,
                  a.value_std, a.excess_mean, a.excess_std, 100.0 * a.violation_mean, 100.0 * a.violation_std);
    out << line;
  }
}

std::vector<std::string> check_run_assertions(const RunConfig& config, std::span<const AggregateRow> aggregates) {
  std::vector<std::string> failures;
  for (const AggregateRow& a : aggregates) {
    if (config.mode == ControlMode::Expected && a.target) {
      if (a.excess_mean < -0.6 || a.excess_mean > 0.3)
        failures.push_back("target " + num(*a.target) + ": mean excess cost " + num(a.excess_mean) +
                           " outside [-0.6, 0.3]");
    }
    if (config.mode == ControlMode::Violation && !a.target) {
      if (std::abs(a.violation_mean - config.delta) > 0.015)
        failures.push_back("violation frequency " + num(a.violation_mean) + " not within 0.015 of delta " +
                           num(config.delta));
    }
  }
  return failures;
}

OracleCheckReport oracle_check(const RunConfig& config, std::span<const Sample> stream, std::size_t checkpoints) {
  config.validate();
  if (config.method != Method::Conformal) throw ConfigError("oracle-check applies to the conformal method");
  if (checkpoints == 0) throw ConfigError("need at least one checkpoint");
  const int num_classes = stream_classes(stream);
  const std::vector<double> weights = resolve_weights(config, num_classes);
  const SetFunction value_fn(config.value, num_classes, weights);
  const SetFunction cost_fn(config.cost, num_classes, weights);

  OracleCheckReport report;
  for (std::size_t pos = 0; pos < config.seeds.size(); ++pos) {
    const std::span<const Sample> slice = seed_slice(config, stream, pos);
    const std::uint64_t seed = config.seeds[pos];
    std::vector<OnlineController> controllers;
    for (double c : config.cost_targets) {
      ControllerConfig cc;
      cc.mode = config.mode;
      cc.target_cost = c;
      cc.delta = config.delta;
      cc.burn_in = 0;
      cc.window = config.window;
      cc.retain_records = config.window.has_value();
      controllers.emplace_back(cc);
    }
    std::deque<SampleRecord> live;
    std::size_t next_checkpoint = 0;
    for (std::size_t i = 0; i < slice.size(); ++i) {
      PreparedSample prepared =
          prepare_sample(slice[i], value_fn, cost_fn, config.universe, config.mc_samples, derive_seed(seed, i));
      for (auto& ctrl : controllers) ctrl.observe(prepared.record);
      live.push_back(std::move(prepared.record));
      if (config.window && live.size() > *config.window) live.pop_front();

      const std::size_t due = (next_checkpoint + 1) * slice.size() / checkpoints;
      if (next_checkpoint >= checkpoints || i + 1 != due) continue;
      ++next_checkpoint;
      const std::vector<SampleRecord> records(live.begin(), live.end());
      for (std::size_t t = 0; t < controllers.size(); ++t) {
        const double c = config.cost_targets[t];
        const double tree_threshold = controllers[t].threshold();
        const OracleThreshold oracle = config.mode == ControlMode::Expected
                                           ? oracle_threshold_expected(records, c, cost_fn.bound())
                                           : oracle_threshold_violation(records, c, config.delta);
        ++report.comparisons;
        if (oracle.boundary) {
          ++report.boundary_cases;
        } else if (tree_threshold != oracle.threshold) {
          ++report.mismatches;
          if (report.details.size() < 20) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "seed " << seed << " target " << c << " N=" << records.size() << ": tree " << tree_threshold
                << " vs oracle " << oracle.threshold;
            report.details.push_back(msg.str());
          }
        }
      }
    }
  }
  return report;
}

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  using Clock = std::chrono::steady_clock;
  if (config.n_grid.empty()) throw ConfigError("bench needs a non-empty N grid");
  if (config.updates == 0) throw ConfigError("bench needs at least one update per point");
  std::vector<std::size_t> grid = config.n_grid;
  std::sort(grid.begin(), grid.end());

  GeneratorConfig gen;
  gen.num_classes = config.num_classes;
  gen.seed = config.seed;
  SampleStream stream(gen);
  const std::vector<double> weights = mnist_weights(config.num_classes);
  const SetFunction value_fn(SetFunctionKind::TruePositiveWeighted, config.num_classes, weights);
  const SetFunction cost_fn(SetFunctionKind::FalsePositive, config.num_classes, weights);
  std::uint64_t produced = 0;
  auto next_record = [&] {
    const Sample s = stream.next();
    return prepare_sample(s, value_fn, cost_fn, UniverseChoice::Ratio, 1, produced++).record;
  };
  // The oracle reads only proxy and true costs.
  auto slim = [](SampleRecord r) {
    std::vector<double>().swap(r.running_max);
    std::vector<double>().swap(r.weights);
    return r;
  };

  ControllerConfig cc;
  cc.mode = ControlMode::Expected;
  cc.target_cost = config.target_cost;
  cc.burn_in = 0;
  cc.retain_records = true;
  OnlineController controller(cc);
  std::vector<SampleRecord> oracle_records;
  bool oracle_alive = true;

  std::vector<BenchRow> rows;
  for (std::size_t n : grid) {
    while (controller.n_seen() < n) {
      SampleRecord r = next_record();
      controller.observe(r);
      if (oracle_alive) oracle_records.push_back(slim(std::move(r)));
    }

    // Timed: threshold query + insertion of one fresh record. The record is
    // removed again (untimed) so every update sees exactly n samples.
    std::vector<SampleRecord> batch;
    batch.reserve(config.updates);
    for (std::size_t u = 0; u < config.updates; ++u) batch.push_back(next_record());
    for (std::size_t u = 0; u < std::min<std::size_t>(config.updates, 100); ++u) {
      controller.forget(controller.observe(batch[u]));
    }
    double elapsed_ns = 0.0;
    volatile double sink = 0.0;
    for (const SampleRecord& r : batch) {
      const auto start = Clock::now();
      sink = controller.threshold();
      const auto id = controller.observe(r);
      elapsed_ns += std::chrono::duration<double, std::nano>(Clock::now() - start).count();
      controller.forget(id);
    }
    (void)sink;
    rows.push_back({"tree", n, config.updates, elapsed_ns / static_cast<double>(config.updates) / 1000.0, true});

    if (!oracle_alive) {
      rows.push_back({"oracle", n, 0, 0.0, false});
      continue;
    }
    double oracle_ns = 0.0;
    std::size_t reps = 0;
    bool dnf = false;
    const double budget_ns = config.oracle_budget_seconds * 1e9;
    while (reps < config.updates) {
      const auto start = Clock::now();
      sink = oracle_threshold_expected(oracle_records, config.target_cost).threshold;
      const double took = std::chrono::duration<double, std::nano>(Clock::now() - start).count();
      if (took > budget_ns) {
        dnf = true;
        break;
      }
      oracle_ns += took;
      ++reps;
      if (oracle_ns > std::min(budget_ns, 1e9)) break;
    }
    if (dnf) {
      rows.push_back({"oracle", n, 0, 0.0, false});
      oracle_alive = false;
      std::vector<SampleRecord>().swap(oracle_records);
    } else {
      rows.push_back({"oracle", n, reps, oracle_ns / static_cast<double>(reps) / 1000.0, true});
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows) {
  out << "method,n,updates,per_update_us,status\n";
  for (const BenchRow& r : rows) {
    out << r.method << ',' << r.n << ',' << r.updates << ',' << (r.finished ? num(r.per_update_us) : std::string(""))
        << ',' << (r.finished ? "ok" : "dnf") << '\n';
  }
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope needs >= 2 paired points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace vmcp
