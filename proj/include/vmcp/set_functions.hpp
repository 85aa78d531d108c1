#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vmcp/label_set.hpp"

namespace vmcp {

enum class SetFunctionKind {
  TruePositive,          // V_TP: |S ∩ y|
  FalsePositive,         // C_FP: |S \ y|
  TruePositiveWeighted,  // V_TPC: sum of w_k over S ∩ y
  FalsePositiveWeighted, // C_FPC: sum of w_k over S \ y
  General,               // V_GEN: prod (k+5)/10 + sum (k-5)^2 over S ∩ y
};

SetFunctionKind parse_set_function_kind(std::string_view name);
std::string_view to_string(SetFunctionKind kind);

// Raw (unnormalized) evaluations.
double value_tp(LabelSet s, LabelSet y);
double cost_fp(LabelSet s, LabelSet y);
double value_tpc(LabelSet s, LabelSet y, std::span<const double> weights);
double cost_fpc(LabelSet s, LabelSet y, std::span<const double> weights);
double value_gen(LabelSet s, LabelSet y);

/// Upper end of every normalized value and cost.
inline constexpr double kNormalizedBound = 100.0;

/**
 * A monotone set function over K classes, normalized to [0, 100] by
 * dividing by its largest achievable raw value, max_y f([K]; y).
 *
 * The additive kinds (everything except General) decompose as
 * f(S; y) = sum_{k in S} unit(k) * [k in y] for values, [k not in y] for
 * costs, with unit(k) = scale * w_k.
 */
class SetFunction {
 public:
  SetFunction(SetFunctionKind kind, int num_classes, std::vector<double> weights = {});

  double operator()(LabelSet s, LabelSet y) const { return scale_ * raw(s, y); }
  double raw(LabelSet s, LabelSet y) const;

  SetFunctionKind kind() const noexcept { return kind_; }
  int num_classes() const noexcept { return num_classes_; }
  bool additive() const noexcept { return kind_ != SetFunctionKind::General; }
  bool is_cost() const noexcept {
    return kind_ == SetFunctionKind::FalsePositive || kind_ == SetFunctionKind::FalsePositiveWeighted;
  }
  double bound() const noexcept { return kNormalizedBound; }
  double raw_max() const noexcept { return raw_max_; }
  double scale() const noexcept { return scale_; }
  /// Normalized contribution of class k in the additive form.
  double unit(int k) const;
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  SetFunctionKind kind_;
  int num_classes_;
  std::vector<double> weights_;
  double raw_max_ = 0.0;
  double scale_ = 0.0;
};

struct ProxyOptions {
  int mc_samples = 100;
  std::uint64_t seed = 0;
  /// Use the Monte-Carlo estimate even when an analytic form exists.
  bool force_monte_carlo = false;
};

/// Estimate of f(S; Y) from the predicted probabilities of one instance.
///
/// Additive functions use the closed form (sum of (1 - p_k) unit_k for
/// costs, p_k unit_k for values). Anything else is a Monte-Carlo average
/// over label vectors drawn class-independently from the probabilities; the
/// draws are fixed at construction, so every S is scored on the same
/// samples and a monotone f yields a monotone proxy.
class SetProxy {
 public:
  SetProxy(const SetFunction& fn, std::span<const double> probs, ProxyOptions options = {});

  double operator()(LabelSet s) const;
  /// f̂(S ∪ {k}) - f̂(S); throws std::invalid_argument when k ∈ S.
  double marginal(int k, LabelSet s) const;

  bool analytic() const noexcept { return draws_.empty(); }
  int num_classes() const noexcept { return fn_.num_classes(); }
  const SetFunction& function() const noexcept { return fn_; }

 private:
  SetFunction fn_;
  std::vector<double> terms_;
  std::vector<LabelSet> draws_;
};

/// Closed-form cost proxy; `spec` must be FalsePositive or FalsePositiveWeighted.
double proxy_cost(LabelSet s, std::span<const double> probs, const SetFunction& spec);

/// Monte-Carlo proxy: mean of fn(S; y_s) over n_samples label draws.
double proxy_mc(LabelSet s, std::span<const double> probs, const SetFunction& fn, int n_samples,
                std::uint64_t seed);

/// Loads class weights from CSV rows `class_index,weight` (header optional).
std::vector<double> load_weights_csv(std::istream& in, int num_classes);

}  // namespace vmcp
