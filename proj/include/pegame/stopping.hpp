#pragma once

// GLRT statistic, stopping threshold, exploration bonus, confidence boxes,
// projection onto the model and optimistic upper confidence bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pegame/expfam.hpp"
#include "pegame/learners.hpp"
#include "pegame/problems.hpp"

namespace pegame {

enum class ThresholdKind { Stylised, Theoretical };

struct ThresholdConfig {
  ThresholdKind kind = ThresholdKind::Stylised;
  double delta = 0.1;
  double a = 1.0;  // concentration slack, theoretical bonus only
  double b = 1.0;
  // Replaces beta(t, delta) by a constant when set (used to force immediate stops).
  std::optional<double> fixed_threshold;

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("a and b must be positive");
  }
};

// GLR_t(not i) = inf over the alternative of sum_k N^k d(mu_hat^k, lambda^k).
inline double glr(const Query& q, const ExpFamily& fam, Answer i, std::span<const double> counts,
                  std::span<const double> mu_hat) {
  return best_response(q, fam, i, counts, mu_hat).value;
}

// Stopping threshold ln((1 + ln t) / delta).
inline double beta(double t, const ThresholdConfig& cfg) {
  if (cfg.fixed_threshold) return *cfg.fixed_threshold;
  if (!(t >= 1.0)) throw std::invalid_argument("beta: t must be >= 1");
  return std::log((1.0 + std::log(t)) / cfg.delta);
}

// Exploration bonus: ln t (stylised) or W-bar((1+a)(1+b) ln t) (theoretical).
inline double bonus_f(double t, const ThresholdConfig& cfg) {
  if (!(t >= 1.0)) throw std::invalid_argument("bonus_f: t must be >= 1");
  if (cfg.kind == ThresholdKind::Stylised) return std::log(t);
  return w_bar(std::max(1.0, (1.0 + cfg.a) * (1.0 + cfg.b) * std::log(t)));
}

struct ConfidenceBox {
  std::vector<double> kl_lo, kl_hi;  // {xi : N d(mu_hat, xi) <= f}, clamped
  std::vector<double> sg_lo, sg_hi;  // mu_hat -/+ sqrt(2 sigma^2 f / N), clamped

  std::size_t arms() const { return kl_lo.size(); }
};

inline ConfidenceBox confidence_box(const ExpFamily& fam, std::span<const double> counts,
                                    std::span<const double> mu_hat, double f_value) {
  const std::size_t K = counts.size();
  if (mu_hat.size() != K) throw std::invalid_argument("confidence_box: size mismatch");
  if (!(f_value >= 0.0)) throw std::invalid_argument("confidence_box: bonus must be nonnegative");
  ConfidenceBox box;
  box.kl_lo.resize(K);
  box.kl_hi.resize(K);
  box.sg_lo.resize(K);
  box.sg_hi.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (!(counts[k] >= 1.0)) throw std::logic_error("confidence_box: arm has never been pulled");
    const double bound = f_value / counts[k];
    box.kl_lo[k] = fam.kl_inverse(mu_hat[k], bound, Side::Lower);
    box.kl_hi[k] = fam.kl_inverse(mu_hat[k], bound, Side::Upper);
    const double r = fam.sub_gaussian_radius(bound);
    box.sg_lo[k] = fam.clamp(mu_hat[k] - r);
    box.sg_hi[k] = fam.clamp(mu_hat[k] + r);
  }
  return box;
}

struct Projection {
  std::vector<double> mu_tilde;
  bool feasible = true;
};

// Maximum-likelihood point of the box model inside the KL confidence box. Both
// sets are coordinate boxes and d is convex in lambda, so this is clamping.
inline Projection project_to_model(const ExpFamily& fam, std::span<const double> mu_hat,
                                   const ConfidenceBox& box) {
  Projection p;
  p.mu_tilde.resize(mu_hat.size());
  for (std::size_t k = 0; k < mu_hat.size(); ++k) {
    const double lo = std::max(box.kl_lo[k], fam.mu_min());
    const double hi = std::min(box.kl_hi[k], fam.mu_max());
    if (lo > hi) p.feasible = false;
    p.mu_tilde[k] = std::clamp(mu_hat[k], lo, std::max(lo, hi));
  }
  if (!p.feasible)
    for (std::size_t k = 0; k < mu_hat.size(); ++k) p.mu_tilde[k] = fam.clamp(mu_hat[k]);
  return p;
}

enum class UcbVariant { KL, SubGaussian };

// U^k = max(floor^k, max over the interval endpoints of E_q d(xi, lambda^k)).
// xi -> E_q d(xi, lambda^k) decreases then increases, so its maximum over an
// interval sits at an endpoint.
inline std::vector<double> optimistic_ucb(const ExpFamily& fam, UcbVariant variant,
                                          std::span<const Atom> atoms, const ConfidenceBox& box,
                                          std::span<const double> floor) {
  if (atoms.empty()) throw std::invalid_argument("optimistic_ucb: no atoms");
  const std::size_t K = box.arms();
  const auto& lo = variant == UcbVariant::KL ? box.kl_lo : box.sg_lo;
  const auto& hi = variant == UcbVariant::KL ? box.kl_hi : box.sg_hi;
  std::vector<double> u(K);
  for (std::size_t k = 0; k < K; ++k) {
    double at_lo = 0.0, at_hi = 0.0;
    for (const Atom& a : atoms) {
      at_lo += a.weight * fam.kl(lo[k], a.lambda[k]);
      at_hi += a.weight * fam.kl(hi[k], a.lambda[k]);
    }
    u[k] = std::max({floor[k], at_lo, at_hi});
  }
  return u;
}

}  // namespace pegame
