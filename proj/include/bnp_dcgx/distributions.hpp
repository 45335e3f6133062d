#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "error.hpp"
#include "model.hpp"
#include "random.hpp"
#include "stability.hpp"

namespace dcgx {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

inline double normal_logpdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(variance) + d * d / variance);
}

// ---------------------------------------------------------------------------
// GIG(a = 2, b = chi, shape 1/2)
//
// Density proportional to tau^{-1/2} exp(-(2 tau + chi / tau) / 2). For
// chi > 0 the reciprocal 1/tau is inverse Gaussian with mean sqrt(2 / chi)
// and shape 2, drawn with the one-root transformation of Michael, Schucany
// and Haas. For chi = 0 the density is Gamma(1/2, rate 1).
// ---------------------------------------------------------------------------

/// Inverse-Gaussian draw with mean `mu` and shape `shape`.
inline double sample_inverse_gaussian(Rng& rng, double mu, double shape) {
  const double nu = std_normal(rng);
  const double w = mu * nu * nu / (2.0 * shape);
  // mu * (1 + w - sqrt(w^2 + 2w)) without cancellation for large w.
  const double x = mu / (1.0 + w + std::sqrt(w * w + 2.0 * w));
  if (uniform_open(rng) <= mu / (mu + x)) return x;
  return mu * mu / x;
}

inline double sample_gig_half(double chi, Rng& rng) {
  if (!(chi >= 0.0)) throw Error(Errc::NegativeChi, "chi must be >= 0");
  // Below this the chi / tau term cannot matter at double precision and
  // sqrt(2 / chi) would overflow.
  if (chi < 1e-280) {
    std::gamma_distribution<double> gamma(0.5, 1.0);
    double tau = gamma(rng);
    while (tau <= 0.0) tau = gamma(rng);
    return tau;
  }
  const double mu = std::sqrt(2.0 / chi);
  const double recip = sample_inverse_gaussian(rng, mu, 2.0);
  return std::max(1.0 / recip, std::numeric_limits<double>::min());
}

// ---------------------------------------------------------------------------
// Multivariate t
// ---------------------------------------------------------------------------

inline double mvt_logpdf(const Eigen::VectorXd& x, double df, const Eigen::VectorXd& loc,
                         const Eigen::MatrixXd& scale) {
  const auto q = static_cast<double>(x.size());
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) throw Error(Errc::NotPD, "t scale matrix is not positive definite");
  const Eigen::VectorXd z = llt.matrixL().solve(x - loc);
  const double maha = z.squaredNorm();
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < scale.rows(); ++j) log_det += 2.0 * std::log(llt.matrixL()(j, j));
  return std::lgamma(0.5 * (df + q)) - std::lgamma(0.5 * df) -
         0.5 * q * std::log(df * std::numbers::pi) - 0.5 * log_det -
         0.5 * (df + q) * std::log1p(maha / df);
}

// ---------------------------------------------------------------------------
// Laplace noise with scale sqrt(sigma / 2)
// ---------------------------------------------------------------------------

inline double laplace_logpdf(double r, double sigma) {
  return -0.5 * std::log(2.0 * sigma) - std::sqrt(2.0 / sigma) * std::abs(r);
}

inline double laplace_loglik_vector(const Eigen::VectorXd& r, const Eigen::VectorXd& sigma) {
  if (r.size() != sigma.size()) throw Error(Errc::ShapeMismatch, "residual/scale length mismatch");
  double total = 0.0;
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    if (!(sigma(j) > 0.0)) throw Error(Errc::NonPositiveSigma, "noise scale must be > 0");
    total += laplace_logpdf(r(j), sigma(j));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Stable spike-and-slab prior
// ---------------------------------------------------------------------------

/// Draw B | gamma, eta from the spike-and-slab Gaussian truncated to stable
/// matrices, by redrawing until the stability predicate holds.
inline Eigen::MatrixXd sample_stable_spike_slab(const Eigen::MatrixXi& gamma, double eta, double nu0,
                                                double eps_stab, int max_tries, Rng& rng) {
  const auto p = gamma.rows();
  const double slab_sd = std::sqrt(eta);
  const double spike_sd = std::sqrt(nu0 * eta);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p, p);
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index k = 0; k < p; ++k) {
        if (j == k) continue;
        B(j, k) = std_normal(rng) * (gamma(j, k) ? slab_sd : spike_sd);
      }
    }
    if (is_stable_or_reject(B, eps_stab)) return B;
  }
  throw Error(Errc::StabilityRejectionExhausted,
              "no stable spike-and-slab draw after " + std::to_string(max_tries) + " tries");
}

/// Joint draw of (phi, gamma, eta, B) from the cascade prior.
///
/// The cascade normalizers make the joint density proportional to the
/// untruncated product Beta x Bernoulli x IG x spike-and-slab restricted to
/// stable B, so every component is redrawn until B is stable. B is formed
/// as sqrt(eta) * Z, which lets the stability test run on Z against a
/// rescaled threshold, with cheap spectral-radius bounds deciding most
/// tries before an eigensolve is needed.
struct CascadeDraw {
  Eigen::MatrixXd B;
  Eigen::MatrixXi gamma;
  double eta = 1.0;
  double phi = 0.5;
  int tries = 0;
};

inline CascadeDraw sample_cascade_prior(Eigen::Index p, const Hyperparams& hp, Rng& rng,
                                        int max_tries = 100000) {
  CascadeDraw draw;
  draw.gamma = Eigen::MatrixXi::Zero(p, p);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(p, p);
  const double spike_sd = std::sqrt(hp.nu0);
  const double log_limit = std::log1p(-hp.eps_stab);
  for (int attempt = 1; attempt <= max_tries; ++attempt) {
    const double phi = beta_variate(rng, hp.a_phi, hp.b_phi);
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index k = 0; k < p; ++k) {
        if (j == k) continue;
        const int edge = bernoulli(rng, phi) ? 1 : 0;
        draw.gamma(j, k) = edge;
        Z(j, k) = std_normal(rng) * (edge ? 1.0 : spike_sd);
      }
    }
    const double log_eta = log_inv_gamma_variate(rng, hp.a_eta, hp.b_eta);
    const double log_scale = 0.5 * log_eta;
    const RadiusBounds bounds = spectral_radius_bounds(Z);
    bool stable = false;
    if (bounds.upper == 0.0 || std::log(bounds.upper) + log_scale <= log_limit) {
      stable = true;
    } else if (bounds.lower > 0.0 && std::log(bounds.lower) + log_scale > log_limit) {
      stable = false;
    } else {
      try {
        const double rho = spectral_radius(Z);
        stable = rho == 0.0 || std::log(rho) + log_scale <= log_limit;
      } catch (const Error&) {
        stable = false;
      }
    }
    if (!stable) continue;
    draw.phi = phi;
    draw.eta = std::clamp(std::exp(log_eta), std::numeric_limits<double>::min(),
                          std::numeric_limits<double>::max());
    draw.B = std::exp(log_scale) * Z;
    draw.tries = attempt;
    return draw;
  }
  throw Error(Errc::StabilityRejectionExhausted, "cascade prior draw exhausted its tries");
}

/// A complete cluster drawn from the prior (M left at zero; it is always
/// integrated out where a prior cluster is needed).
inline ClusterParams sample_prior_cluster(Eigen::Index p, const Hyperparams& hp, Rng& rng) {
  ClusterParams cluster;
  cluster.sigma.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) cluster.sigma(j) = inv_gamma_variate(rng, hp.a_sigma, hp.b_sigma);
  CascadeDraw draw = sample_cascade_prior(p, hp, rng);
  cluster.B = std::move(draw.B);
  cluster.gamma = std::move(draw.gamma);
  cluster.eta = draw.eta;
  cluster.phi = draw.phi;
  cluster.M = Eigen::VectorXd::Zero(p);
  return cluster;
}

}  // namespace dcgx
