#include "vmcp/set_functions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <random>
#include <stdexcept>

#include "vmcp/errors.hpp"

namespace vmcp {

namespace {

double weighted_sum(LabelSet members, std::span<const double> weights) {
  double total = 0.0;
  members.for_each([&](int k) {
    if (static_cast<std::size_t>(k) >= weights.size())
      throw std::invalid_argument("class index beyond weight vector");
    total += weights[static_cast<std::size_t>(k)];
  });
  return total;
}

// Largest raw V_GEN over all label sets, i.e. max over T ⊆ [K] of gen(T).
double gen_raw_max(int num_classes) {
  if (num_classes > 20) throw std::invalid_argument("General value function supports at most 20 classes");
  const LabelSet all = LabelSet::full(num_classes);
  double best = 0.0;
  for (std::uint64_t bits = 0; bits <= all.bits(); ++bits) {
    best = std::max(best, value_gen(LabelSet(bits), all));
  }
  return best;
}

}  // namespace

SetFunctionKind parse_set_function_kind(std::string_view name) {
  if (name == "tp") return SetFunctionKind::TruePositive;
  if (name == "fp") return SetFunctionKind::FalsePositive;
  if (name == "tpc") return SetFunctionKind::TruePositiveWeighted;
  if (name == "fpc") return SetFunctionKind::FalsePositiveWeighted;
  if (name == "gen") return SetFunctionKind::General;
  throw std::invalid_argument("unknown set function '" + std::string(name) + "' (expected tp|fp|tpc|fpc|gen)");
}

std::string_view to_string(SetFunctionKind kind) {
  switch (kind) {
    case SetFunctionKind::TruePositive: return "tp";
    case SetFunctionKind::FalsePositive: return "fp";
    case SetFunctionKind::TruePositiveWeighted: return "tpc";
    case SetFunctionKind::FalsePositiveWeighted: return "fpc";
    case SetFunctionKind::General: return "gen";
  }
  return "?";
}

double value_tp(LabelSet s, LabelSet y) { return (s & y).size(); }

double cost_fp(LabelSet s, LabelSet y) { return (s - y).size(); }

double value_tpc(LabelSet s, LabelSet y, std::span<const double> weights) {
  return weighted_sum(s & y, weights);
}

double cost_fpc(LabelSet s, LabelSet y, std::span<const double> weights) {
  return weighted_sum(s - y, weights);
}

double value_gen(LabelSet s, LabelSet y) {
  double product = 1.0;
  double squares = 0.0;
  (s & y).for_each([&](int k) {
    product *= (k + 5) / 10.0;
    squares += static_cast<double>((k - 5) * (k - 5));
  });
  return product + squares;
}

SetFunction::SetFunction(SetFunctionKind kind, int num_classes, std::vector<double> weights)
    : kind_(kind), num_classes_(num_classes), weights_(std::move(weights)) {
  LabelSet::check_count(num_classes);
  const auto k = static_cast<std::size_t>(num_classes);
  switch (kind) {
    case SetFunctionKind::TruePositive:
    case SetFunctionKind::FalsePositive:
      weights_.assign(k, 1.0);
      raw_max_ = num_classes;
      break;
    case SetFunctionKind::TruePositiveWeighted:
    case SetFunctionKind::FalsePositiveWeighted:
      if (weights_.size() != k) throw std::invalid_argument("weight vector length must equal the class count");
      for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("class weights must be finite and >= 0");
      }
      raw_max_ = 0.0;
      for (double w : weights_) raw_max_ += w;
      if (!(raw_max_ > 0.0)) throw std::invalid_argument("class weights sum to zero");
      break;
    case SetFunctionKind::General:
      weights_.clear();
      raw_max_ = gen_raw_max(num_classes);
      break;
  }
  scale_ = kNormalizedBound / raw_max_;
}

double SetFunction::raw(LabelSet s, LabelSet y) const {
  switch (kind_) {
    case SetFunctionKind::TruePositive: return value_tp(s, y);
    case SetFunctionKind::FalsePositive: return cost_fp(s, y);
    case SetFunctionKind::TruePositiveWeighted: return value_tpc(s, y, weights_);
    case SetFunctionKind::FalsePositiveWeighted: return cost_fpc(s, y, weights_);
    case SetFunctionKind::General: return value_gen(s, y);
  }
  return 0.0;
}

double SetFunction::unit(int k) const {
  if (!additive()) throw std::logic_error("non-additive set function has no per-class unit");
  if (k < 0 || k >= num_classes_) throw std::out_of_range("class index out of range");
  return scale_ * weights_[static_cast<std::size_t>(k)];
}

SetProxy::SetProxy(const SetFunction& fn, std::span<const double> probs, ProxyOptions options) : fn_(fn) {
  if (static_cast<int>(probs.size()) != fn.num_classes())
    throw std::invalid_argument("probability vector length must equal the class count");
  if (fn.additive() && !options.force_monte_carlo) {
    terms_.resize(probs.size());
    for (int k = 0; k < fn.num_classes(); ++k) {
      const double p = probs[static_cast<std::size_t>(k)];
      terms_[static_cast<std::size_t>(k)] = (fn.is_cost() ? 1.0 - p : p) * fn.unit(k);
    }
    return;
  }
  if (options.mc_samples < 1) throw std::invalid_argument("Monte-Carlo proxy needs at least one sample");
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  draws_.reserve(static_cast<std::size_t>(options.mc_samples));
  for (int s = 0; s < options.mc_samples; ++s) {
    LabelSet y;
    for (int k = 0; k < fn.num_classes(); ++k) {
      if (uniform(rng) < probs[static_cast<std::size_t>(k)]) y = y.with(k);
    }
    draws_.push_back(y);
  }
}

double SetProxy::operator()(LabelSet s) const {
  if (analytic()) return weighted_sum(s, terms_);
  double total = 0.0;
  for (LabelSet y : draws_) total += fn_(s, y);
  return total / static_cast<double>(draws_.size());
}

double SetProxy::marginal(int k, LabelSet s) const {
  if (s.contains(k)) throw std::invalid_argument("marginal: class already in the set");
  if (analytic()) {
    if (k >= num_classes()) throw std::out_of_range("class index out of range");
    return terms_[static_cast<std::size_t>(k)];
  }
  const LabelSet grown = s.with(k);
  double total = 0.0;
  for (LabelSet y : draws_) total += fn_(grown, y) - fn_(s, y);
  return total / static_cast<double>(draws_.size());
}

double proxy_cost(LabelSet s, std::span<const double> probs, const SetFunction& spec) {
  if (!spec.is_cost()) throw std::invalid_argument("proxy_cost needs an additive cost (fp or fpc)");
  return SetProxy(spec, probs)(s);
}

double proxy_mc(LabelSet s, std::span<const double> probs, const SetFunction& fn, int n_samples,
                std::uint64_t seed) {
  return SetProxy(fn, probs, ProxyOptions{n_samples, seed, true})(s);
}

std::vector<double> load_weights_csv(std::istream& in, int num_classes) {
  LabelSet::check_count(num_classes);
  std::vector<double> weights(static_cast<std::size_t>(num_classes), 0.0);
  std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("expected 'class_index,weight'", line_no);
    const std::string_view idx_text(line.data(), comma);
    const std::string weight_text = line.substr(comma + 1);
    int idx = 0;
    const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
    if (ec != std::errc{} || ptr != idx_text.data() + idx_text.size()) {
      if (line_no == 1) continue;  // header
      throw DataError("bad class index '" + std::string(idx_text) + "'", line_no);
    }
    if (idx < 0 || idx >= num_classes) throw DataError("class index out of range", line_no);
    double w = 0.0;
    try {
      std::size_t used = 0;
      w = std::stod(weight_text, &used);
      if (used != weight_text.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw DataError("bad weight '" + weight_text + "'", line_no);
    }
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("weight must be finite and >= 0", line_no);
    if (seen[static_cast<std::size_t>(idx)]) throw DataError("duplicate class index", line_no);
    seen[static_cast<std::size_t>(idx)] = true;
    weights[static_cast<std::size_t>(idx)] = w;
  }
  for (int k = 0; k < num_classes; ++k) {
    if (!seen[static_cast<std::size_t>(k)]) throw DataError("missing weight for class " + std::to_string(k));
  }
  return weights;
}

}  // namespace vmcp
