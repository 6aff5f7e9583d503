#pragma once

// No-regret players for the pure exploration game: AdaHedge for the arm
// player, Follow-The-Perturbed-Leader for the alternative player, and the
// zero-regret best-response arm pick.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "pegame/expfam.hpp"
#include "pegame/problems.hpp"

namespace pegame {

// AdaHedge: exponential weights on cumulative losses with learning rate
// ln K / Delta, where Delta is the running sum of mixability gaps. With
// Delta = 0 the rate is infinite and play is uniform over the current leaders.
class AdaHedge {
 public:
  explicit AdaHedge(std::size_t arms) : cumulative_(arms, 0.0) {
    if (arms == 0) throw std::invalid_argument("AdaHedge needs at least one action");
  }

  std::size_t arms() const { return cumulative_.size(); }
  double mixability_gap() const { return gap_sum_; }
  std::size_t rounds() const { return rounds_; }
  std::span<const double> cumulative_losses() const { return cumulative_; }

  double learning_rate() const {
    if (arms() == 1) return 0.0;
    return gap_sum_ > 0.0 ? std::log(static_cast<double>(arms())) / gap_sum_
                          : std::numeric_limits<double>::infinity();
  }

  std::vector<double> weights() const { return mix(learning_rate(), cumulative_).weights; }

  // Plays the current weights against `loss`, then updates. Returns the weights played.
  std::vector<double> step(std::span<const double> loss) {
    if (loss.size() != arms()) throw std::invalid_argument("AdaHedge: loss size mismatch");
    for (double l : loss)
      if (!std::isfinite(l)) throw std::invalid_argument("AdaHedge: non-finite loss");
    const double eta = learning_rate();
    Mix before = mix(eta, cumulative_);
    double h = 0.0;
    for (std::size_t k = 0; k < arms(); ++k) {
      h += before.weights[k] * loss[k];
      cumulative_[k] += loss[k];
    }
    const Mix after = mix(eta, cumulative_);
    gap_sum_ += std::max(0.0, h - (after.potential - before.potential));
    ++rounds_;
    return std::move(before.weights);
  }

 private:
  struct Mix {
    std::vector<double> weights;
    double potential;  // -1/eta ln( (1/K) sum_k exp(-eta L_k) )
  };

  static Mix mix(double eta, std::span<const double> L) {
    const std::size_t K = L.size();
    const double lo = *std::min_element(L.begin(), L.end());
    Mix m{std::vector<double>(K, 0.0), lo};
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double v = std::isinf(eta) ? (L[k] == lo ? 1.0 : 0.0) : std::exp(-eta * (L[k] - lo));
      m.weights[k] = v;
      total += v;
    }
    for (auto& x : m.weights) x /= total;
    if (!std::isinf(eta) && eta > 0.0)
      m.potential = lo - std::log(total / static_cast<double>(K)) / eta;
    return m;
  }

  std::vector<double> cumulative_;
  double gap_sum_ = 0.0;
  std::size_t rounds_ = 0;
};

// Regret guarantee of AdaHedge given the per-round loss ranges b_s.
inline double adahedge_regret_bound(std::span<const double> loss_ranges, std::size_t arms) {
  const double lnk = std::log(static_cast<double>(arms));
  double sq = 0.0;
  double mx = 0.0;
  for (double b : loss_ranges) {
    sq += b * b;
    mx = std::max(mx, b);
  }
  return std::sqrt(sq * lnk) + mx * (4.0 / 3.0 * lnk + 2.0);
}

struct Atom {
  std::vector<double> lambda;
  double weight = 0.0;
};

// Perturbation rate minimising sqrt(Kt) ((D + 2CL)/eta + 2 D eta), with C the
// width of the clamp box.
inline double ftpl_default_rate(const ExpFamily& fam) {
  const double D = fam.divergence_bound();
  const double C = fam.mu_max() - fam.mu_min();
  return std::sqrt((D + 2.0 * C * fam.lipschitz()) / (2.0 * D));
}

// Follow-The-Perturbed-Leader over an alternative set, with losses
// d(anchor_s, lambda^{k_s}). Only per-arm counts and running means of the fed
// anchors are stored: by the Bregman identity
//   sum_s d(anchor_s, lambda^k) = N^k d(mean^k, lambda^k) + const,
// which makes every perturbed leader a single best-response call.
class Ftpl {
 public:
  Ftpl(std::size_t arms, double rate) : counts_(arms, 0.0), means_(arms, 0.0), rate_(rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("FTPL perturbation rate must be positive");
  }

  std::span<const double> counts() const { return counts_; }
  std::span<const double> anchor_means() const { return means_; }
  double rate() const { return rate_; }

  void feed(std::size_t arm, double anchor) {
    if (arm >= counts_.size()) throw std::out_of_range("FTPL: arm index out of range");
    counts_[arm] += 1.0;
    means_[arm] += (anchor - means_[arm]) / counts_[arm];
  }

  // The perturbed leader for perturbation sigma: one oracle call with weights
  // N^k + sigma^k at the blend of stored means and current means.
  template <class Oracle>
  std::vector<double> leader(std::span<const double> sigma, std::span<const double> current,
                             Oracle&& oracle) const {
    const std::size_t K = counts_.size();
    std::vector<double> w(K), blend(K);
    for (std::size_t k = 0; k < K; ++k) {
      w[k] = counts_[k] + sigma[k];
      blend[k] = w[k] > 0.0 ? (counts_[k] * means_[k] + sigma[k] * current[k]) / w[k] : current[k];
    }
    return oracle(std::span<const double>(w), std::span<const double>(blend));
  }

  // Empirical distribution of `atoms` perturbed leaders. Perturbations are
  // sigma^k = sqrt(scale^k) E / rate with E ~ Exp(1), scale being the arm pull counts.
  template <class Oracle>
  std::vector<Atom> propose(std::span<const double> current, std::span<const double> scale,
                            std::size_t atoms, Rng& rng, Oracle&& oracle) const {
    const std::size_t K = counts_.size();
    if (current.size() != K || scale.size() != K) throw std::invalid_argument("FTPL: size mismatch");
    if (atoms == 0) throw std::invalid_argument("FTPL: need at least one atom");
    std::exponential_distribution<double> expo(1.0);
    std::vector<Atom> out;
    out.reserve(atoms);
    std::vector<double> sigma(K);
    for (std::size_t j = 0; j < atoms; ++j) {
      for (std::size_t k = 0; k < K; ++k) sigma[k] = std::sqrt(scale[k]) * expo(rng) / rate_;
      out.push_back(Atom{leader(sigma, current, oracle), 1.0 / static_cast<double>(atoms)});
    }
    return out;
  }

 private:
  std::vector<double> counts_;
  std::vector<double> means_;
  double rate_;
};

// argmax with ties to the lowest index; strict comparison, no tolerance.
inline std::size_t best_response_arm(std::span<const double> u) {
  if (u.empty()) throw std::invalid_argument("best_response_arm: empty vector");
  std::size_t best = 0;
  for (std::size_t k = 1; k < u.size(); ++k)
    if (u[k] > u[best]) best = k;
  return best;
}

}  // namespace pegame
