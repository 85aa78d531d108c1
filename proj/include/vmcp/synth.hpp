#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "vmcp/label_set.hpp"

namespace vmcp {

inline constexpr double kMinProb = 0.001;
inline constexpr double kMaxProb = 0.999;

/// Synthetic stand-in for a trained multi-label classifier.
///
/// Each instance draws p_k = sigmoid(logit(base_rate) + heterogeneity * z_k)
/// with z_k ~ N(0, 1), clamps it to [0.001, 0.999], then samples every label
/// independently as Bernoulli(p_k). The emitted probabilities are p_k, so
/// they are calibrated by construction, unless `miscalibration` != 1, in
/// which case clamp(p_k * miscalibration) is emitted instead while labels
/// still follow p_k.
struct GeneratorConfig {
  int num_classes = 10;
  double base_rate = 0.4;
  double heterogeneity = 2.0;
  double miscalibration = 1.0;
  std::uint64_t seed = 0;
  std::size_t n = 1000;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Lazily produces the stream described by a GeneratorConfig; `next()`
/// ignores `n`.
class SampleStream {
 public:
  explicit SampleStream(const GeneratorConfig& config);
  Sample next();

 private:
  GeneratorConfig config_;
  double base_logit_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// `config.n` i.i.d. samples; identical configs give identical streams.
std::vector<Sample> generate(const GeneratorConfig& config);

/// Class weights w_k = k with class 0 counted as K (so it is nonzero);
/// for K = 10 this is [10, 1, 2, ..., 9].
std::vector<double> mnist_weights(int num_classes = 10);

}  // namespace vmcp
