#include "vmcp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vmcp {

void GeneratorConfig::validate() const {
  LabelSet::check_count(num_classes);
  if (!(base_rate > 0.0 && base_rate < 1.0)) throw std::invalid_argument("base_rate must lie in (0, 1)");
  if (!(heterogeneity >= 0.0) || !std::isfinite(heterogeneity))
    throw std::invalid_argument("heterogeneity must be finite and >= 0");
  if (!(miscalibration > 0.0) || !std::isfinite(miscalibration))
    throw std::invalid_argument("miscalibration must be finite and > 0");
}

SampleStream::SampleStream(const GeneratorConfig& config)
    : config_(config), base_logit_(0.0), rng_(config.seed) {
  config_.validate();
  base_logit_ = std::log(config_.base_rate / (1.0 - config_.base_rate));
}

Sample SampleStream::next() {
  Sample s;
  s.probs.resize(static_cast<std::size_t>(config_.num_classes));
  for (int k = 0; k < config_.num_classes; ++k) {
    double p = config_.base_rate;
    if (config_.heterogeneity > 0.0) {
      const double logit = base_logit_ + config_.heterogeneity * normal_(rng_);
      p = 1.0 / (1.0 + std::exp(-logit));
    }
    p = std::clamp(p, kMinProb, kMaxProb);
    if (uniform_(rng_) < p) s.labels = s.labels.with(k);
    s.probs[static_cast<std::size_t>(k)] =
        config_.miscalibration == 1.0 ? p : std::clamp(p * config_.miscalibration, kMinProb, kMaxProb);
  }
  return s;
}

std::vector<Sample> generate(const GeneratorConfig& config) {
  SampleStream stream(config);
  std::vector<Sample> out;
  out.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) out.push_back(stream.next());
  return out;
}

std::vector<double> mnist_weights(int num_classes) {
  LabelSet::check_count(num_classes);
  std::vector<double> w(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) w[static_cast<std::size_t>(k)] = k == 0 ? num_classes : k;
  return w;
}

}  // namespace vmcp
