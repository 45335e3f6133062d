#pragma once

// Random primitives shared by every sampler. All draws take an explicit
// engine; nothing here touches global state.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace dcgx {

using Rng = std::mt19937_64;

/// Independent, reproducible stream `stream` derived from a user seed.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9U};
  return Rng(seq);
}

/// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline double normal(Rng& rng, double mean, double sd) { return mean + sd * std_normal(rng); }

inline bool bernoulli(Rng& rng, double prob) { return uniform_open(rng) < prob; }

/// log of a Gamma(shape, 1) variate. Small shapes go through the
/// Gamma(a) = Gamma(a + 1) * U^(1/a) identity so that the result never
/// underflows to -inf.
inline double log_gamma_variate(Rng& rng, double shape) {
  if (shape < 1.0) {
    std::gamma_distribution<double> dist(shape + 1.0, 1.0);
    return std::log(dist(rng)) + std::log(uniform_open(rng)) / shape;
  }
  std::gamma_distribution<double> dist(shape, 1.0);
  return std::log(dist(rng));
}

inline double gamma_variate(Rng& rng, double shape, double rate) {
  return std::exp(log_gamma_variate(rng, shape)) / rate;
}

/// log of an inverse-gamma(shape, scale) variate, i.e. scale / Gamma(shape, 1).
inline double log_inv_gamma_variate(Rng& rng, double shape, double scale) {
  return std::log(scale) - log_gamma_variate(rng, shape);
}

/// Inverse-gamma draw clamped to the finite positive doubles.
inline double inv_gamma_variate(Rng& rng, double shape, double scale) {
  const double value = std::exp(log_inv_gamma_variate(rng, shape, scale));
  return std::clamp(value, std::numeric_limits<double>::min(), std::numeric_limits<double>::max());
}

/// Beta draw strictly inside (0, 1).
inline double beta_variate(Rng& rng, double a, double b) {
  const double la = log_gamma_variate(rng, a);
  const double lb = log_gamma_variate(rng, b);
  double value = 1.0 / (1.0 + std::exp(lb - la));
  if (value <= 0.0) value = std::numeric_limits<double>::denorm_min();
  if (value >= 1.0) value = std::nextafter(1.0, 0.0);
  return value;
}

inline double log_sum_exp(std::span<const double> values) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

/// Normalized probabilities from unnormalized log-weights.
inline std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
  const double total = log_sum_exp(log_weights);
  std::vector<double> probs(log_weights.size());
  for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = std::exp(log_weights[k] - total);
  return probs;
}

inline std::size_t sample_categorical(Rng& rng, std::span<const double> probs) {
  const double u = uniform_open(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  // Rounding left a sliver above the cumulative total; take the last
  // category with positive mass.
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return k;
  }
  return probs.size() - 1;
}

}  // namespace dcgx
