#pragma once

// Pure-exploration queries and the three oracle tiers of the pure exploration
// game: best response (min), game solving (max-min) and max-max-min.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "pegame/expfam.hpp"

namespace pegame {

// Answers are indices. Best arm: the (0-based) arm index. Minimum threshold
// follows the indicator 1{min mu < gamma}: 1 is "below", 0 is "above".
using Answer = std::size_t;
inline constexpr Answer kAbove = 0;
inline constexpr Answer kBelow = 1;

enum class QueryKind { BestArm, MinimumThreshold };

struct Query {
  QueryKind kind = QueryKind::BestArm;
  std::size_t arms = 2;
  double gamma = 0.0;

  static Query best_arm(std::size_t arms) {
    if (arms < 2) throw std::invalid_argument("a query needs at least 2 arms");
    return Query{QueryKind::BestArm, arms, 0.0};
  }

  static Query minimum_threshold(std::size_t arms, double gamma) {
    if (arms < 1) throw std::invalid_argument("a query needs at least 1 arm");
    if (!std::isfinite(gamma)) throw std::invalid_argument("threshold must be finite");
    return Query{QueryKind::MinimumThreshold, arms, gamma};
  }

  std::size_t num_answers() const { return kind == QueryKind::BestArm ? arms : 2; }

  std::string answer_name(Answer i) const {
    if (kind == QueryKind::BestArm) return "arm " + std::to_string(i);
    return i == kBelow ? "below" : "above";
  }
};

class DegenerateInstance : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct BanditInstance {
  ExpFamily family;
  std::vector<double> means;

  BanditInstance(ExpFamily fam, std::vector<double> mu) : family(fam), means(std::move(mu)) {
    if (means.empty()) throw std::invalid_argument("instance needs at least one arm");
    for (double m : means)
      if (!family.in_box(m)) throw std::invalid_argument("instance mean outside the clamp box");
  }

  std::size_t arms() const { return means.size(); }
};

inline Answer correct_answer(const Query& q, std::span<const double> mu) {
  if (mu.size() != q.arms) throw std::invalid_argument("mean vector size does not match query");
  if (q.kind == QueryKind::BestArm)
    return static_cast<Answer>(std::max_element(mu.begin(), mu.end()) - mu.begin());
  return *std::min_element(mu.begin(), mu.end()) < q.gamma ? kBelow : kAbove;
}

struct BestResponse {
  std::vector<double> lambda;
  double value = 0.0;
  bool degenerate = false;  // all weights were zero
};

// argmin over the closure of the alternative set to answer i of sum_k w^k d(xi^k, lambda^k).
// Weights need not be normalised (pull counts are valid weights).
inline BestResponse best_response(const Query& q, const ExpFamily& fam, Answer i,
                                  std::span<const double> w, std::span<const double> xi) {
  const std::size_t K = q.arms;
  if (w.size() != K || xi.size() != K) throw std::invalid_argument("best_response: size mismatch");
  if (i >= q.num_answers()) throw std::invalid_argument("best_response: answer out of range");

  BestResponse out;
  out.lambda.assign(xi.begin(), xi.end());
  out.degenerate = std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; });

  if (q.kind == QueryKind::BestArm) {
    for (std::size_t j = 0; j < K; ++j)
      if (j != i && xi[j] >= xi[i]) return out;  // xi already in the closure of the alternative
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = K;
    double best_m = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      if (j == i) continue;
      const double m = ExpFamily::barycenter(w[i], xi[i], w[j], xi[j]);
      const double cost = w[i] * fam.kl(xi[i], m) + w[j] * fam.kl(xi[j], m);
      if (cost < best) {
        best = cost;
        best_j = j;
        best_m = m;
      }
    }
    out.lambda[i] = best_m;
    out.lambda[best_j] = best_m;
    out.value = best;
    return out;
  }

  if (i == kBelow) {
    double v = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      out.lambda[k] = std::max(xi[k], q.gamma);
      v += w[k] * fam.kl(xi[k], out.lambda[k]);
    }
    out.value = v;
    return out;
  }

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double cost = xi[k] <= q.gamma ? 0.0 : w[k] * fam.kl(xi[k], q.gamma);
    if (cost < best) {
      best = cost;
      best_k = k;
    }
  }
  out.lambda[best_k] = std::min(xi[best_k], q.gamma);
  out.value = best;
  return out;
}

struct Witness {
  std::vector<double> lambda;
  double weight = 0.0;
};

struct GameSolution {
  Answer answer = 0;
  std::vector<double> weights;
  double value = 0.0;
  std::vector<Witness> witnesses;
  // Certified upper bound minus value; zero for the exact backends.
  double duality_gap = 0.0;
};

enum class GameBackend { Exact, MirrorAscent };

struct MirrorAscentOptions {
  double tolerance = 1e-6;
  std::size_t max_iterations = 200000;
};

namespace detail {

// Best arm identification via the characterisation of Garivier and Kaufmann (2016):
// with b the best arm, the equilibrium equalises all pairwise transport costs
//   g_j(x_j) = d(xi_b, m_j) + x_j d(xi_j, m_j) = y,   m_j = (xi_b + x_j xi_j) / (1 + x_j),
// and y is the root of sum_j d(xi_b, m_j) / d(xi_j, m_j) = 1.
class BestArmGame {
 public:
  BestArmGame(const ExpFamily& fam, std::span<const double> xi, Answer best)
      : fam_(fam), xi_(xi), best_(best) {}

  GameSolution solve() const {
    const std::size_t K = xi_.size();
    const double top = xi_[best_];
    std::size_t second = K;
    for (std::size_t j = 0; j < K; ++j) {
      if (j == best_) continue;
      if (xi_[j] >= top) throw DegenerateInstance("best arm is not unique: game value is 0");
      if (second == K || xi_[j] > xi_[second]) second = j;
    }

    // Outer unknown: the meeting point m2 of the best and second-best arms. The
    // balance sum is decreasing in m2, infinite at xi_second, zero at xi_best.
    std::vector<double> meet(K, top);
    auto balance = [&](double m2) {
      const double y = transport(second, m2);
      meet[second] = m2;
      double total = 0.0;
      for (std::size_t j = 0; j < K; ++j) {
        if (j == best_) continue;
        if (j != second) meet[j] = invert(j, y);
        const double dj = fam_.kl(xi_[j], meet[j]);
        total += dj > 0.0 ? fam_.kl(top, meet[j]) / dj : std::numeric_limits<double>::infinity();
      }
      return total - 1.0;
    };

    const double lo_end = xi_[second];
    const double span = top - lo_end;
    // Bracket from above the second arm; too close to it the divergence underflows.
    double a = lo_end + 0.01 * span;
    double fa = balance(a);
    while (!(fa > 0.0) && a - lo_end > 1e-12 * span) {
      a = lo_end + 0.25 * (a - lo_end);
      fa = balance(a);
    }
    if (!std::isfinite(fa)) throw DegenerateInstance("best arm game is numerically degenerate");
    double b = top;
    std::uintmax_t iters = 200;
    auto [r0, r1] = boost::math::tools::toms748_solve(balance, a, b, fa, -1.0,
                                                      boost::math::tools::eps_tolerance<double>(52),
                                                      iters);
    const double m2 = 0.5 * (r0 + r1);
    balance(m2);

    GameSolution sol;
    sol.answer = best_;
    sol.weights.assign(K, 0.0);
    double ratio_sum = 1.0;
    for (std::size_t j = 0; j < K; ++j)
      if (j != best_) ratio_sum += ratio(j, meet[j]);
    sol.weights[best_] = 1.0 / ratio_sum;
    for (std::size_t j = 0; j < K; ++j)
      if (j != best_) sol.weights[j] = ratio(j, meet[j]) / ratio_sum;

    const double y = transport(second, m2);
    sol.value = sol.weights[best_] * y;

    // The lambda-player's equilibrium mixes the K-1 pairwise alternatives with
    // weights q_j = D / d(xi_j, m_j).
    double qsum = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      if (j == best_) continue;
      Witness wit;
      wit.lambda.assign(xi_.begin(), xi_.end());
      wit.lambda[best_] = meet[j];
      wit.lambda[j] = meet[j];
      wit.weight = sol.value / fam_.kl(xi_[j], meet[j]);
      qsum += wit.weight;
      sol.witnesses.push_back(std::move(wit));
    }
    for (auto& wit : sol.witnesses) wit.weight /= qsum;
    return sol;
  }

 private:
  // Weight ratio x_j = w_j / w_best that makes m the pairwise meeting point.
  double ratio(std::size_t j, double m) const { return (xi_[best_] - m) / (m - xi_[j]); }

  // g_j as a function of the meeting point m in [xi_j, xi_best].
  double transport(std::size_t j, double m) const {
    const double top = xi_[best_];
    if (m <= xi_[j]) return fam_.kl(top, xi_[j]);
    return fam_.kl(top, m) + ratio(j, m) * fam_.kl(xi_[j], m);
  }

  double invert(std::size_t j, double y) const {
    const double top = xi_[best_];
    if (y <= 0.0) return top;
    if (y >= fam_.kl(top, xi_[j])) return xi_[j];
    auto f = [&](double m) { return transport(j, m) - y; };
    std::uintmax_t iters = 200;
    auto [r0, r1] = boost::math::tools::toms748_solve(
        f, xi_[j], top, fam_.kl(top, xi_[j]) - y, -y,
        boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r0 + r1);
  }

  const ExpFamily& fam_;
  std::span<const double> xi_;
  Answer best_;
};

inline GameSolution solve_threshold_game(const Query& q, const ExpFamily& fam,
                                         std::span<const double> xi, Answer i) {
  const std::size_t K = q.arms;
  GameSolution sol;
  sol.answer = i;
  sol.weights.assign(K, 0.0);
  if (i == kBelow) {
    // D(w) is linear in w: put all mass on the arm farthest below the threshold.
    std::size_t best = K;
    double best_d = -1.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (xi[k] >= q.gamma) continue;
      const double d = fam.kl(xi[k], q.gamma);
      if (d > best_d) {
        best_d = d;
        best = k;
      }
    }
    sol.weights[best] = 1.0;
    sol.value = best_d;
    Witness wit;
    wit.weight = 1.0;
    for (std::size_t k = 0; k < K; ++k) wit.lambda.push_back(std::max(xi[k], q.gamma));
    sol.witnesses.push_back(std::move(wit));
    return sol;
  }
  // Above: D(w) = min_k w^k d(xi^k, gamma), maximised by w^k proportional to 1/d.
  double inv_sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double d = fam.kl(xi[k], q.gamma);
    if (!(d > 0.0)) throw DegenerateInstance("an arm sits on the threshold: game value is 0");
    sol.weights[k] = 1.0 / d;
    inv_sum += 1.0 / d;
  }
  for (auto& x : sol.weights) x /= inv_sum;
  sol.value = 1.0 / inv_sum;
  for (std::size_t k = 0; k < K; ++k) {
    Witness wit;
    wit.lambda.assign(xi.begin(), xi.end());
    wit.lambda[k] = q.gamma;
    wit.weight = sol.weights[k];
    sol.witnesses.push_back(std::move(wit));
  }
  return sol;
}

}  // namespace detail

// Entropic mirror ascent on the simplex, driven by best-response supergradients.
// Works for any query through the best-response oracle alone. The running average
// of the supergradients is the payoff vector of the empirical lambda mixture, so
// its maximum certifies an upper bound on the game value.
inline GameSolution solve_game_mirror_ascent(const Query& q, const ExpFamily& fam,
                                             std::span<const double> xi,
                                             const MirrorAscentOptions& opts = {}) {
  const std::size_t K = q.arms;
  const Answer i = correct_answer(q, xi);
  std::vector<double> w(K, 1.0 / static_cast<double>(K));
  std::vector<double> avg_grad(K, 0.0);
  std::vector<double> g(K);
  GameSolution sol;
  sol.answer = i;
  sol.weights = w;
  sol.value = -1.0;
  double scale = 0.0;
  for (std::size_t s = 1; s <= opts.max_iterations; ++s) {
    const BestResponse br = best_response(q, fam, i, w, xi);
    for (std::size_t k = 0; k < K; ++k) {
      g[k] = fam.kl(xi[k], br.lambda[k]);
      avg_grad[k] += (g[k] - avg_grad[k]) / static_cast<double>(s);
      scale = std::max(scale, g[k]);
    }
    if (br.value > sol.value) {
      sol.value = br.value;
      sol.weights = w;
    }
    const double upper = *std::max_element(avg_grad.begin(), avg_grad.end());
    sol.duality_gap = upper - sol.value;
    if (sol.duality_gap < opts.tolerance) break;
    if (!(scale > 0.0)) throw DegenerateInstance("game value is 0");
    const double step = 1.0 / (scale * std::sqrt(static_cast<double>(s)));
    const double gmax = *std::max_element(g.begin(), g.end());
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      w[k] *= std::exp(step * (g[k] - gmax));
      total += w[k];
    }
    for (auto& x : w) x /= total;
  }
  if (!(sol.value > 0.0)) throw DegenerateInstance("game value is 0");
  const BestResponse br = best_response(q, fam, i, sol.weights, xi);
  sol.witnesses.push_back(Witness{br.lambda, 1.0});
  return sol;
}

// Oracle allocation w*(xi) and value D_xi for the correct answer at xi.
inline GameSolution solve_game(const Query& q, const ExpFamily& fam, std::span<const double> xi,
                               GameBackend backend = GameBackend::Exact) {
  if (xi.size() != q.arms) throw std::invalid_argument("solve_game: size mismatch");
  if (backend == GameBackend::MirrorAscent) return solve_game_mirror_ascent(q, fam, xi);
  const Answer i = correct_answer(q, xi);
  if (q.kind == QueryKind::BestArm) return detail::BestArmGame(fam, xi, i).solve();
  return detail::solve_threshold_game(q, fam, xi, i);
}

// Game value, or 0 when the instance is degenerate.
inline double game_value(const Query& q, const ExpFamily& fam, std::span<const double> xi) {
  try {
    return solve_game(q, fam, xi).value;
  } catch (const DegenerateInstance&) {
    return 0.0;
  }
}

struct MaxMaxMin {
  std::vector<double> mu_plus;
  Answer answer = 0;
  std::vector<double> weights;
  double value = 0.0;
};

// Most optimistic game in the box [lo, hi]. The game value grows with the gap
// between the answer's defining arms and the rest, so the maximiser sits on a
// vertex: for best arm, candidate i raises arm i to hi and lowers the others
// to lo; for minimum threshold the all-low and all-high corners.
inline MaxMaxMin max_max_min(const Query& q, const ExpFamily& fam, std::span<const double> lo,
                             std::span<const double> hi) {
  const std::size_t K = q.arms;
  if (lo.size() != K || hi.size() != K) throw std::invalid_argument("max_max_min: size mismatch");
  std::vector<double> a(K), b(K);
  for (std::size_t k = 0; k < K; ++k) {
    a[k] = std::max(lo[k], fam.mu_min());
    b[k] = std::min(hi[k], fam.mu_max());
    if (!(a[k] <= b[k])) throw std::invalid_argument("max_max_min: empty confidence box");
  }

  std::vector<std::vector<double>> candidates;
  if (q.kind == QueryKind::BestArm) {
    for (std::size_t i = 0; i < K; ++i) {
      std::vector<double> c = a;
      c[i] = b[i];
      candidates.push_back(std::move(c));
    }
  } else {
    candidates.push_back(a);
    candidates.push_back(b);
  }

  MaxMaxMin best;
  bool found = false;
  for (auto& c : candidates) {
    try {
      GameSolution sol = solve_game(q, fam, c);
      if (!found || sol.value > best.value) {
        best.mu_plus = c;
        best.answer = sol.answer;
        best.weights = std::move(sol.weights);
        best.value = sol.value;
        found = true;
      }
    } catch (const DegenerateInstance&) {
    }
  }
  if (!found) {
    best.mu_plus = candidates.front();
    best.answer = correct_answer(q, best.mu_plus);
    best.weights.assign(K, 1.0 / static_cast<double>(K));
    best.value = 0.0;
  }
  return best;
}

}  // namespace pegame
