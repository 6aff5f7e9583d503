#pragma once

// One-parameter exponential families in mean parametrisation: divergences,
// confidence-interval inversion, the W-bar threshold function and sampling.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace pegame {

using Rng = std::mt19937_64;

enum class FamilyKind { Gaussian, Bernoulli };

enum class Side { Lower, Upper };

class ExpFamily {
 public:
  // Gaussian arms with known variance. The default clamp box is [-10 sigma, 10 sigma].
  static ExpFamily gaussian(double variance) {
    const double s = std::sqrt(variance);
    return gaussian(variance, -10.0 * s, 10.0 * s);
  }

  static ExpFamily gaussian(double variance, double mu_min, double mu_max) {
    if (!(variance > 0.0) || !std::isfinite(variance))
      throw std::invalid_argument("gaussian variance must be positive and finite");
    return ExpFamily(FamilyKind::Gaussian, variance, mu_min, mu_max);
  }

  static ExpFamily bernoulli(double mu_min = 0.001, double mu_max = 0.999) {
    if (!(mu_min > 0.0) || !(mu_max < 1.0))
      throw std::invalid_argument("bernoulli clamp box must lie strictly inside (0,1)");
    return ExpFamily(FamilyKind::Bernoulli, 0.25, mu_min, mu_max);
  }

  FamilyKind kind() const { return kind_; }
  std::string name() const { return kind_ == FamilyKind::Gaussian ? "gaussian" : "bernoulli"; }

  // Variance of a Gaussian arm; for Bernoulli this is the sub-Gaussian constant 1/4.
  double sigma2() const { return sigma2_; }
  double mu_min() const { return mu_min_; }
  double mu_max() const { return mu_max_; }

  // Lipschitz constant of x -> d(x, y) on the clamp box, uniformly in y.
  double lipschitz() const {
    if (kind_ == FamilyKind::Gaussian) return (mu_max_ - mu_min_) / sigma2_;
    return logit(mu_max_) - logit(mu_min_);
  }

  // Upper bound on d(x, y) for x, y in the clamp box.
  double divergence_bound() const {
    if (kind_ == FamilyKind::Gaussian) {
      const double w = mu_max_ - mu_min_;
      return w * w / (2.0 * sigma2_);
    }
    return std::max(kl(mu_min_, mu_max_), kl(mu_max_, mu_min_));
  }

  bool in_domain(double mu) const {
    if (kind_ == FamilyKind::Gaussian) return std::isfinite(mu);
    return mu > 0.0 && mu < 1.0;
  }

  bool in_box(double mu) const { return mu >= mu_min_ && mu <= mu_max_; }

  double clamp(double mu) const { return std::clamp(mu, mu_min_, mu_max_); }

  double kl(double mu, double lambda) const {
    if (!in_domain(mu) || !in_domain(lambda))
      throw std::invalid_argument("kl: mean outside the family's domain");
    if (kind_ == FamilyKind::Gaussian) {
      const double diff = mu - lambda;
      return diff * diff / (2.0 * sigma2_);
    }
    if (mu == lambda) return 0.0;
    const double v = mu * std::log(mu / lambda) + (1.0 - mu) * std::log((1.0 - mu) / (1.0 - lambda));
    return std::max(v, 0.0);
  }

  // Minimiser over lambda of w1 d(x1, lambda) + w2 d(x2, lambda). Divergences of an
  // exponential family are Bregman divergences in the mean parameter, so this is
  // the weighted mean regardless of the family.
  static double barycenter(double w1, double x1, double w2, double x2) {
    const double s = w1 + w2;
    if (!(s > 0.0)) return 0.5 * (x1 + x2);
    return (w1 * x1 + w2 * x2) / s;
  }

  // Endpoint of {xi : d(mu_hat, xi) <= bound} on the requested side, clamped to the box.
  double kl_inverse(double mu_hat, double bound, Side side) const {
    if (!in_box(mu_hat)) throw std::invalid_argument("kl_inverse: mu_hat outside the clamp box");
    if (!(bound >= 0.0)) throw std::invalid_argument("kl_inverse: bound must be nonnegative");
    if (bound == 0.0) return mu_hat;
    if (kind_ == FamilyKind::Gaussian) {
      const double r = sub_gaussian_radius(bound);
      return clamp(side == Side::Upper ? mu_hat + r : mu_hat - r);
    }
    // kl(mu_hat, .) is monotone on each side of mu_hat: bisect.
    const double edge = side == Side::Upper ? mu_max_ : mu_min_;
    if (kl(mu_hat, edge) <= bound) return edge;
    double inside = mu_hat;
    double outside = edge;
    while (std::abs(outside - inside) > 1e-12) {
      const double mid = 0.5 * (inside + outside);
      if (mid == inside || mid == outside) break;
      (kl(mu_hat, mid) <= bound ? inside : outside) = mid;
    }
    return inside;
  }

  // Half-width sqrt(2 sigma^2 bound) of the sub-Gaussian interval.
  double sub_gaussian_radius(double bound) const { return std::sqrt(2.0 * sigma2_ * bound); }

  double sample(double mu, Rng& rng) const {
    if (kind_ == FamilyKind::Gaussian) {
      std::normal_distribution<double> dist(mu, std::sqrt(sigma2_));
      return dist(rng);
    }
    if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("bernoulli mean outside [0,1]");
    std::bernoulli_distribution dist(mu);
    return dist(rng) ? 1.0 : 0.0;
  }

 private:
  ExpFamily(FamilyKind kind, double sigma2, double mu_min, double mu_max)
      : kind_(kind), sigma2_(sigma2), mu_min_(mu_min), mu_max_(mu_max) {
    if (!(mu_min < mu_max) || !std::isfinite(mu_min) || !std::isfinite(mu_max))
      throw std::invalid_argument("clamp box must be a nonempty finite interval");
  }

  static double logit(double p) { return std::log(p / (1.0 - p)); }

  FamilyKind kind_;
  double sigma2_;
  double mu_min_;
  double mu_max_;
};

// W-hat(y) = y + ln y, the lower end of the W-bar sandwich.
inline double w_hat(double y) { return y + std::log(y); }

// W-bar(y): the solution x >= 1 of x - ln x = y, i.e. -W_{-1}(-e^{-y}).
inline double w_bar(double y) {
  if (!(y >= 1.0) || !std::isfinite(y)) throw std::invalid_argument("w_bar: argument must be >= 1");
  if (y == 1.0) return 1.0;
  auto g = [y](double x) { return x - std::log(x) - y; };
  // g is increasing on [1, inf); W-hat(y) <= W-bar(y) <= W-hat(y) + 1/2.
  double lo = std::max(1.0, w_hat(y));
  double hi = w_hat(y) + 0.5;
  double x = std::clamp(w_hat(y) + 0.5 / std::sqrt(y), lo, hi);
  for (int it = 0; it < 50; ++it) {
    const double gx = g(x);
    if (gx == 0.0) return x;
    (gx < 0.0 ? lo : hi) = x;
    const double next = x - gx / (1.0 - 1.0 / x);
    if (std::abs(next - x) <= 1e-15 * x) return next;
    x = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
  }
  while (hi - lo > 1e-14 * hi) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Binary relative entropy, used for the kl(delta, 1 - delta) lower bound.
inline double bernoulli_kl(double p, double q) {
  auto term = [](double a, double b) { return a == 0.0 ? 0.0 : a * std::log(a / b); };
  return term(p, q) + term(1.0 - p, 1.0 - q);
}

}  // namespace pegame
