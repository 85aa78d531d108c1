#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vmcp/controller.hpp"
#include "vmcp/errors.hpp"
#include "vmcp/experiment.hpp"
#include "vmcp/quantile_tree.hpp"
#include "vmcp/set_functions.hpp"
#include "vmcp/synth.hpp"
#include "vmcp/universe.hpp"

namespace py = pybind11;

namespace {

using vmcp::LabelSet;

LabelSet to_set(const std::vector<int>& classes) { return LabelSet::from_indices(classes); }

std::vector<std::vector<int>> to_lists(const vmcp::UniverseSeq& u) {
  std::vector<std::vector<int>> out;
  out.reserve(u.size());
  for (LabelSet s : u.sets) out.push_back(s.indices());
  return out;
}

using ProbArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

std::vector<vmcp::Sample> to_samples(const ProbArray& probs, const LabelArray& labels) {
  if (probs.ndim() != 2 || labels.ndim() != 2 || probs.shape(0) != labels.shape(0) ||
      probs.shape(1) != labels.shape(1))
    throw std::invalid_argument("probs and labels must be 2-D arrays of equal shape");
  const auto n = static_cast<std::size_t>(probs.shape(0));
  const auto k = static_cast<int>(probs.shape(1));
  LabelSet::check_count(k);
  auto p = probs.unchecked<2>();
  auto y = labels.unchecked<2>();
  std::vector<vmcp::Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].probs.resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      out[i].probs[static_cast<std::size_t>(j)] = p(i, j);
      if (y(i, j)) out[i].labels = out[i].labels.with(j);
    }
  }
  return out;
}

vmcp::SampleRecord record_from(const std::pair<std::vector<double>, std::vector<double>>& pc) {
  return vmcp::make_record(pc.first, pc.second);
}

std::vector<vmcp::SampleRecord> records_from(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& in) {
  std::vector<vmcp::SampleRecord> out;
  out.reserve(in.size());
  for (const auto& pc : in) out.push_back(record_from(pc));
  return out;
}

py::dict row_dict(const vmcp::MetricsRow& r) {
  py::dict d;
  d["seed"] = r.seed;
  d["target"] = r.target;
  d["n"] = r.n_predictions;
  d["value"] = r.mean_value;
  d["value_se"] = r.value_se;
  d["excess_cost"] = r.excess_cost;
  d["excess_cost_se"] = r.cost_se;
  d["violation_freq"] = r.violation_freq;
  return d;
}

py::dict aggregate_dict(const vmcp::AggregateRow& a) {
  py::dict d;
  d["target"] = a.target ? py::cast(*a.target) : py::none();
  d["n_seeds"] = a.n_seeds;
  d["value_mean"] = a.value_mean;
  d["value_std"] = a.value_std;
  d["excess_mean"] = a.excess_mean;
  d["excess_std"] = a.excess_std;
  d["violation_mean"] = a.violation_mean;
  d["violation_std"] = a.violation_std;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Value-maximizing prediction sets with online conformal cost control";

  py::register_exception<vmcp::EmptyDistributionError>(m, "EmptyDistributionError");
  py::register_exception<vmcp::KeyNotFoundError>(m, "KeyNotFoundError", PyExc_KeyError);
  py::register_exception<vmcp::WeightUnderflowError>(m, "WeightUnderflowError", PyExc_ValueError);
  py::register_exception<vmcp::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<vmcp::DataError>(m, "DataError", PyExc_ValueError);

  m.attr("BELOW_ALL") = vmcp::kBelowAll;
  m.attr("ABOVE_ALL") = vmcp::kAboveAll;

  py::class_<vmcp::QuantileTree>(m, "QuantileTree")
      .def(py::init<>())
      .def("insert", &vmcp::QuantileTree::insert, py::arg("value"), py::arg("weight"))
      .def("remove", &vmcp::QuantileTree::remove, py::arg("value"), py::arg("weight"))
      .def("query_quantile", &vmcp::QuantileTree::query_quantile, py::arg("q"))
      .def("cdf_at", &vmcp::QuantileTree::cdf_at, py::arg("t"))
      .def("total_weight", &vmcp::QuantileTree::total_weight)
      .def("height", &vmcp::QuantileTree::height)
      .def("weight_at", &vmcp::QuantileTree::weight_at, py::arg("value"))
      .def("clear", &vmcp::QuantileTree::clear)
      .def("validate", &vmcp::QuantileTree::validate, py::arg("sum_tolerance") = 1e-9)
      .def("entries",
           [](const vmcp::QuantileTree& t) {
             std::vector<std::tuple<double, double, double>> out;
             for (const auto& e : t.entries()) out.emplace_back(e.value, e.weight, e.cumulative);
             return out;
           })
      .def("__len__", &vmcp::QuantileTree::size);

  py::class_<vmcp::SetFunction>(m, "SetFunction")
      .def(py::init([](const std::string& kind, int num_classes, std::vector<double> weights) {
             return vmcp::SetFunction(vmcp::parse_set_function_kind(kind), num_classes, std::move(weights));
           }),
           py::arg("kind"), py::arg("num_classes"), py::arg("weights") = std::vector<double>{})
      .def(
          "__call__", [](const vmcp::SetFunction& f, const std::vector<int>& s, const std::vector<int>& y) {
            return f(to_set(s), to_set(y));
          },
          py::arg("s"), py::arg("y"))
      .def("raw", [](const vmcp::SetFunction& f, const std::vector<int>& s,
                     const std::vector<int>& y) { return f.raw(to_set(s), to_set(y)); })
      .def("unit", &vmcp::SetFunction::unit)
      .def_property_readonly("kind", [](const vmcp::SetFunction& f) { return std::string(to_string(f.kind())); })
      .def_property_readonly("num_classes", &vmcp::SetFunction::num_classes)
      .def_property_readonly("raw_max", &vmcp::SetFunction::raw_max)
      .def_property_readonly("is_cost", &vmcp::SetFunction::is_cost);

  m.def(
      "proxy",
      [](const vmcp::SetFunction& f, const std::vector<double>& probs, const std::vector<int>& s, int mc_samples,
         std::uint64_t seed) { return vmcp::SetProxy(f, probs, {mc_samples, seed, false})(to_set(s)); },
      py::arg("fn"), py::arg("probs"), py::arg("s"), py::arg("mc_samples") = 100, py::arg("seed") = 0,
      "Estimated f(S; Y) under independent labels with the given probabilities.");

  m.def(
      "build_universe",
      [](const std::string& choice, const std::vector<double>& probs, const vmcp::SetFunction& value_fn,
         const vmcp::SetFunction& cost_fn, int mc_samples, std::uint64_t seed) {
        const vmcp::ProxyOptions options{mc_samples, seed, false};
        const vmcp::SetProxy value_proxy(value_fn, probs, options);
        const vmcp::SetProxy cost_proxy(cost_fn, probs, options);
        return to_lists(vmcp::build_universe(vmcp::parse_universe_choice(choice), probs, value_proxy, cost_proxy));
      },
      py::arg("choice"), py::arg("probs"), py::arg("value_fn"), py::arg("cost_fn"), py::arg("mc_samples") = 100,
      py::arg("seed") = 0);

  m.def(
      "prepare_sample",
      [](const std::vector<double>& probs, const std::vector<int>& labels, const vmcp::SetFunction& value_fn,
         const vmcp::SetFunction& cost_fn, const std::string& choice, int mc_samples, std::uint64_t seed) {
        vmcp::Sample s{probs, to_set(labels)};
        const auto p =
            vmcp::prepare_sample(s, value_fn, cost_fn, vmcp::parse_universe_choice(choice), mc_samples, seed);
        py::dict d;
        d["universe"] = to_lists(p.universe);
        d["proxy_values"] = p.proxy_values;
        d["proxy_costs"] = p.record.proxy_costs;
        d["costs"] = p.record.costs;
        return d;
      },
      py::arg("probs"), py::arg("labels"), py::arg("value_fn"), py::arg("cost_fn"), py::arg("universe") = "ratio",
      py::arg("mc_samples") = 100, py::arg("seed") = 0,
      "Universe, proxy values and the (proxy cost, true cost) pairs of one instance.");

  py::class_<vmcp::OnlineController>(m, "OnlineController")
      .def(py::init([](const std::string& mode, double target_cost, double delta, double max_cost,
                       std::size_t burn_in, std::optional<std::size_t> window) {
             vmcp::ControllerConfig c;
             c.mode = vmcp::parse_control_mode(mode);
             c.target_cost = target_cost;
             c.delta = delta;
             c.max_cost = max_cost;
             c.burn_in = burn_in;
             c.window = window;
             return vmcp::OnlineController(c);
           }),
           py::arg("mode") = "expected", py::arg("target_cost") = 10.0, py::arg("delta") = 0.1,
           py::arg("max_cost") = vmcp::kNormalizedBound, py::arg("burn_in") = 0, py::arg("window") = py::none())
      .def(
          "observe",
          [](vmcp::OnlineController& c, std::vector<double> proxy_costs, std::vector<double> costs) {
            return c.observe(vmcp::make_record(std::move(proxy_costs), std::move(costs)));
          },
          py::arg("proxy_costs"), py::arg("costs"),
          "Adds one sample given the proxy and true costs of its universe (empty set first). Returns an id.")
      .def("forget", &vmcp::OnlineController::forget, py::arg("id"))
      .def("threshold", &vmcp::OnlineController::threshold)
      .def("ready", &vmcp::OnlineController::ready)
      .def(
          "select",
          [](const vmcp::OnlineController& c, const std::vector<double>& proxy_costs,
             const std::vector<double>& proxy_values) -> std::optional<std::size_t> {
            if (!c.ready()) return std::nullopt;
            return vmcp::select_best(proxy_costs, proxy_values, c.threshold());
          },
          py::arg("proxy_costs"), py::arg("proxy_values"), "Index of the chosen set, None during burn-in.")
      .def_property_readonly("n_seen", &vmcp::OnlineController::n_seen)
      .def_property_readonly("total_weight", [](const vmcp::OnlineController& c) { return c.tree().total_weight(); })
      .def("snapshot", [](const vmcp::OnlineController& c) {
        std::ostringstream out;
        c.write_snapshot(out);
        return out.str();
      });

  m.def(
      "oracle_threshold",
      [](const std::vector<std::pair<std::vector<double>, std::vector<double>>>& samples, const std::string& mode,
         double target_cost, double delta, double max_cost) {
        const auto records = records_from(samples);
        const auto r = vmcp::parse_control_mode(mode) == vmcp::ControlMode::Expected
                           ? vmcp::oracle_threshold_expected(records, target_cost, max_cost)
                           : vmcp::oracle_threshold_violation(records, target_cost, delta);
        return std::make_pair(r.threshold, r.boundary);
      },
      py::arg("samples"), py::arg("mode") = "expected", py::arg("target_cost") = 10.0, py::arg("delta") = 0.1,
      py::arg("max_cost") = vmcp::kNormalizedBound,
      "Direct-search threshold over (proxy_costs, costs) pairs; returns (threshold, boundary_hit).");

  m.def("mnist_weights", &vmcp::mnist_weights, py::arg("num_classes") = 10);

  m.def(
      "generate",
      [](int num_classes, std::size_t n, std::uint64_t seed, double base_rate, double heterogeneity,
         double miscalibration) {
        vmcp::GeneratorConfig g{num_classes, base_rate, heterogeneity, miscalibration, seed, n};
        const auto samples = vmcp::generate(g);
        ProbArray probs({n, static_cast<std::size_t>(num_classes)});
        LabelArray labels({n, static_cast<std::size_t>(num_classes)});
        auto p = probs.mutable_unchecked<2>();
        auto y = labels.mutable_unchecked<2>();
        for (std::size_t i = 0; i < n; ++i) {
          for (int k = 0; k < num_classes; ++k) {
            p(i, k) = samples[i].probs[static_cast<std::size_t>(k)];
            y(i, k) = samples[i].labels.contains(k);
          }
        }
        return py::make_tuple(probs, labels);
      },
      py::arg("num_classes") = 10, py::arg("n") = 1000, py::arg("seed") = 0, py::arg("base_rate") = 0.4,
      py::arg("heterogeneity") = 2.0, py::arg("miscalibration") = 1.0,
      "Synthetic stream as (probs, labels) arrays of shape (n, num_classes).");

  m.def(
      "run_experiment",
      [](const std::string& config_json, const ProbArray& probs, const LabelArray& labels, unsigned threads) {
        const vmcp::RunConfig config = vmcp::parse_run_config(config_json);
        const auto samples = to_samples(probs, labels);
        vmcp::RunOptions options;
        options.threads = threads;
        vmcp::RunResult result;
        {
          py::gil_scoped_release release;
          result = vmcp::run_experiment(config, samples, options);
        }
        py::list rows;
        for (const auto& r : result.rows) rows.append(row_dict(r));
        py::list aggregates;
        for (const auto& a : vmcp::aggregate(result.rows)) aggregates.append(aggregate_dict(a));
        return py::make_tuple(rows, aggregates);
      },
      py::arg("config_json"), py::arg("probs"), py::arg("labels"), py::arg("threads") = 0,
      "Runs the experiment harness; returns (per-seed rows, aggregate rows).");
}
