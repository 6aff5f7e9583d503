#pragma once

// Tracking and the pure exploration meta-algorithm: confidence box, projection,
// GLRT stop, learner plays, optimism, losses, tracking, sampling. The sampling
// rules D, F, T, O, M, RR and OPT are assembled here.

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pegame/expfam.hpp"
#include "pegame/learners.hpp"
#include "pegame/problems.hpp"
#include "pegame/stopping.hpp"

namespace pegame {

enum class RuleCode { D, F, T, O, M, RR, OPT };
enum class Tracking { Cumulative, Direct, None };

inline std::string_view to_string(RuleCode c) {
  switch (c) {
    case RuleCode::D: return "D";
    case RuleCode::F: return "F";
    case RuleCode::T: return "T";
    case RuleCode::O: return "O";
    case RuleCode::M: return "M";
    case RuleCode::RR: return "RR";
    case RuleCode::OPT: return "OPT";
  }
  return "?";
}

inline std::string_view to_string(Tracking t) {
  switch (t) {
    case Tracking::Cumulative: return "C";
    case Tracking::Direct: return "D";
    case Tracking::None: return "none";
  }
  return "?";
}

struct RuleSpec {
  RuleCode code = RuleCode::D;
  Tracking tracking = Tracking::Direct;
  bool per_answer_learners = true;
  UcbVariant ucb = UcbVariant::KL;
  std::size_t ftpl_cap = 0;  // 0: m(t) = t atoms
  std::optional<double> ftpl_rate;
  std::optional<double> dhat;  // learning-rate scale for M
  bool stop_all_tests = false;
  // T pulls the least-sampled arm while min_k N^k < sqrt(t) - forced_offset_per_arm * K.
  double forced_offset_per_arm = 0.5;

  std::string name() const {
    std::string s(to_string(code));
    if (tracking != Tracking::None) s += "-" + std::string(to_string(tracking));
    return s;
  }

  void validate() const {
    if (code == RuleCode::F && tracking != Tracking::None)
      throw std::invalid_argument("rule F plays single arms and takes no tracking suffix");
    if (code != RuleCode::F && tracking == Tracking::None)
      throw std::invalid_argument("rule " + std::string(to_string(code)) +
                                  " needs a tracking suffix -C or -D");
    if (dhat && !(*dhat > 0.0)) throw std::invalid_argument("dhat must be positive");
    if (ftpl_rate && !(*ftpl_rate > 0.0)) throw std::invalid_argument("FTPL rate must be positive");
  }

  // Letter coding: D, F, T, O, M, RR, OPT (case-insensitive) with -C / -D suffixes.
  static RuleSpec parse(std::string_view text) {
    std::string s;
    for (char ch : text) s += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    RuleSpec r;
    std::string head = s;
    r.tracking = Tracking::None;
    if (auto dash = s.find('-'); dash != std::string::npos) {
      head = s.substr(0, dash);
      const std::string tail = s.substr(dash + 1);
      if (tail == "C") r.tracking = Tracking::Cumulative;
      else if (tail == "D") r.tracking = Tracking::Direct;
      else throw std::invalid_argument("unknown tracking suffix in rule '" + std::string(text) + "'");
    }
    if (head == "D") r.code = RuleCode::D;
    else if (head == "F") r.code = RuleCode::F;
    else if (head == "T") r.code = RuleCode::T;
    else if (head == "O") r.code = RuleCode::O;
    else if (head == "M") r.code = RuleCode::M;
    else if (head == "RR") r.code = RuleCode::RR;
    else if (head == "OPT") r.code = RuleCode::OPT;
    else throw std::invalid_argument("unknown sampling rule '" + std::string(text) + "'");
    r.validate();
    return r;
  }
};

// Cumulative: argmin_k N^k / sum_w^k. Direct: argmin_k N^k / (t w^k). Coordinates
// with zero denominator are excluded; ties go to the lowest index.
inline std::size_t track(Tracking mode, std::span<const double> counts,
                         std::span<const double> sum_w, std::span<const double> w, double t) {
  std::size_t best = counts.size();
  double best_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    double denom = 0.0;
    if (mode == Tracking::Cumulative) denom = sum_w[k];
    else if (mode == Tracking::Direct) denom = t * w[k];
    else throw std::invalid_argument("track: no tracking mode");
    if (!(denom > 0.0)) continue;
    const double ratio = counts[k] / denom;
    if (best == counts.size() || ratio < best_ratio) {
      best = k;
      best_ratio = ratio;
    }
  }
  if (best == counts.size()) throw std::logic_error("track: every tracking denominator is zero");
  return best;
}

struct OracleCalls {
  std::size_t best_response = 0;  // sampling-rule calls; GLRT evaluations are not counted
  std::size_t game_solve = 0;
  std::size_t max_max_min = 0;
};

struct TraceRow {
  std::size_t t = 0;
  Answer answer = 0;
  std::size_t arm = 0;  // meaningless on the stopping round
  double glr = 0.0;
  double beta = 0.0;
  std::vector<double> weights;
};

inline void write_trace_header(std::ostream& os) { os << "t,i_t,k_t,glr,beta,w\n"; }

inline void write_trace_row(std::ostream& os, const TraceRow& r) {
  os << r.t << ',' << r.answer << ',' << r.arm << ',' << r.glr << ',' << r.beta << ',';
  for (std::size_t k = 0; k < r.weights.size(); ++k) os << (k ? ";" : "") << r.weights[k];
  os << '\n';
}

struct RunState {
  std::size_t samples = 0;
  std::vector<double> counts;
  std::vector<double> sums;
  std::vector<double> mu_hat;  // clamped to the model box
  std::vector<double> sum_w;
  std::vector<AdaHedge> hedges;
  std::vector<Ftpl> ftpls;
  std::vector<double> ascent_weights;  // rule M
  std::vector<double> fixed_weights;   // rule OPT
  double dhat = 0.0;
  bool oracle_assisted = false;  // M tuned from the true instance
  Rng rng;
  OracleCalls calls;

  std::size_t round() const { return samples + 1; }
};

struct Decision {
  bool stop = false;
  Answer answer = 0;
};

struct StepOutcome {
  Decision decision;
  TraceRow trace;
  OracleCalls calls;  // made during this step
};

class Sampler {
 public:
  Sampler(RuleSpec rule, Query query, BanditInstance instance, ThresholdConfig cfg)
      : rule_(std::move(rule)), query_(query), inst_(std::move(instance)), cfg_(cfg) {
    rule_.validate();
    cfg_.validate();
    if (inst_.arms() != query_.arms) throw std::invalid_argument("instance and query arm counts differ");
  }

  const RuleSpec& rule() const { return rule_; }
  const Query& query() const { return query_; }
  const BanditInstance& instance() const { return inst_; }
  const ThresholdConfig& threshold() const { return cfg_; }

  // Samples each arm once; afterwards every count is 1 and sum_w holds the K basis vectors.
  RunState initialize(std::uint64_t seed) const {
    const std::size_t K = query_.arms;
    const ExpFamily& fam = inst_.family;
    RunState s;
    s.rng.seed(seed);
    s.counts.assign(K, 0.0);
    s.sums.assign(K, 0.0);
    s.mu_hat.assign(K, 0.0);
    s.sum_w.assign(K, 1.0);
    const std::size_t learners = rule_.per_answer_learners ? query_.num_answers() : 1;
    if (rule_.code == RuleCode::D) s.hedges.assign(learners, AdaHedge(K));
    if (rule_.code == RuleCode::F)
      s.ftpls.assign(learners, Ftpl(K, rule_.ftpl_rate.value_or(ftpl_default_rate(fam))));
    if (rule_.code == RuleCode::M) {
      s.ascent_weights.assign(K, 1.0 / static_cast<double>(K));
      if (rule_.dhat) {
        s.dhat = *rule_.dhat;
      } else {
        s.dhat = solve_game(query_, fam, inst_.means).value;
        s.oracle_assisted = true;
      }
    }
    if (rule_.code == RuleCode::OPT) s.fixed_weights = solve_game(query_, fam, inst_.means).weights;
    for (std::size_t k = 0; k < K; ++k) pull(s, k);
    return s;
  }

  // One round of the meta-algorithm. The GLRT is evaluated before any learner plays.
  StepOutcome step(RunState& s) const {
    const std::size_t K = query_.arms;
    const ExpFamily& fam = inst_.family;
    const double t = static_cast<double>(s.round());
    const OracleCalls before = s.calls;
    StepOutcome out;
    out.trace.t = s.round();

    const double f = bonus_f(t - 1.0, cfg_);
    const ConfidenceBox box = confidence_box(fam, s.counts, s.mu_hat, f);
    const Projection proj = project_to_model(fam, s.mu_hat, box);
    const Answer it = correct_answer(query_, proj.mu_tilde);
    out.trace.answer = it;

    const double threshold = beta(t, cfg_);
    const double stat = glr(query_, fam, it, s.counts, s.mu_hat);
    out.trace.glr = stat;
    out.trace.beta = threshold;
    if (stat > threshold) {
      out.decision = Decision{true, it};
      return out;
    }
    if (rule_.stop_all_tests) {
      for (Answer a = 0; a < query_.num_answers(); ++a) {
        if (a != it && glr(query_, fam, a, s.counts, s.mu_hat) > threshold) {
          out.decision = Decision{true, a};
          return out;
        }
      }
    }

    std::vector<double> floor(K);
    for (std::size_t k = 0; k < K; ++k) floor[k] = f / s.counts[k];
    const std::size_t learner = rule_.per_answer_learners ? it : 0;

    std::vector<double> w;
    std::optional<std::size_t> arm;
    switch (rule_.code) {
      case RuleCode::D: {
        AdaHedge& hedge = s.hedges[learner];
        w = hedge.weights();
        BestResponse br = best_response(query_, fam, it, w, s.mu_hat);
        ++s.calls.best_response;
        const Atom dirac{std::move(br.lambda), 1.0};
        std::vector<double> u = optimistic_ucb(fam, rule_.ucb, std::span(&dirac, 1), box, floor);
        for (auto& x : u) x = -x;
        hedge.step(u);
        break;
      }
      case RuleCode::F: {
        Ftpl& ftpl = s.ftpls[learner];
        std::size_t m = s.round();
        if (rule_.ftpl_cap > 0) m = std::min(m, rule_.ftpl_cap);
        auto oracle = [&](std::span<const double> weights, std::span<const double> xi) {
          ++s.calls.best_response;
          return best_response(query_, fam, it, weights, xi).lambda;
        };
        const std::vector<Atom> atoms = ftpl.propose(s.mu_hat, s.counts, m, s.rng, oracle);
        const std::vector<double> u = optimistic_ucb(fam, rule_.ucb, atoms, box, floor);
        arm = best_response_arm(u);
        ftpl.feed(*arm, s.mu_hat[*arm]);
        w.assign(K, 0.0);
        w[*arm] = 1.0;
        break;
      }
      case RuleCode::T: {
        ++s.calls.game_solve;
        try {
          w = solve_game(query_, fam, s.mu_hat).weights;
        } catch (const DegenerateInstance&) {
          w.assign(K, 1.0 / static_cast<double>(K));
        }
        const double least = *std::min_element(s.counts.begin(), s.counts.end());
        if (least < std::sqrt(t) - rule_.forced_offset_per_arm * static_cast<double>(K))
          arm = static_cast<std::size_t>(std::min_element(s.counts.begin(), s.counts.end()) -
                                         s.counts.begin());
        break;
      }
      case RuleCode::O: {
        ++s.calls.max_max_min;
        w = max_max_min(query_, fam, box.kl_lo, box.kl_hi).weights;
        break;
      }
      case RuleCode::M: {
        w = s.ascent_weights;
        const BestResponse br = best_response(query_, fam, it, w, s.mu_hat);
        ++s.calls.best_response;
        const double eta = 1.0 / (s.dhat * std::sqrt(t));
        double gmax = 0.0;
        std::vector<double> g(K);
        for (std::size_t k = 0; k < K; ++k) {
          g[k] = fam.kl(s.mu_hat[k], br.lambda[k]);
          gmax = std::max(gmax, g[k]);
        }
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          s.ascent_weights[k] *= std::exp(eta * (g[k] - gmax));
          total += s.ascent_weights[k];
        }
        for (auto& x : s.ascent_weights) x /= total;
        break;
      }
      case RuleCode::RR:
        w.assign(K, 1.0 / static_cast<double>(K));
        break;
      case RuleCode::OPT:
        w = s.fixed_weights;
        break;
    }

    if (rule_.tracking != Tracking::None) {
      for (std::size_t k = 0; k < K; ++k) s.sum_w[k] += w[k];
      if (!arm) arm = track(rule_.tracking, s.counts, s.sum_w, w, t);
    }
    out.trace.arm = *arm;
    out.trace.weights = std::move(w);
    pull(s, *arm);

#ifndef NDEBUG
    if (rule_.tracking == Tracking::Cumulative && rule_.code != RuleCode::T) {
      for (std::size_t k = 0; k < K; ++k) {
        assert(s.counts[k] <= s.sum_w[k] + 1.0 + 1e-9);
        assert(s.counts[k] >= s.sum_w[k] - static_cast<double>(K - 1) - 1e-9);
      }
    }
#endif

    out.calls.best_response = s.calls.best_response - before.best_response;
    out.calls.game_solve = s.calls.game_solve - before.game_solve;
    out.calls.max_max_min = s.calls.max_max_min - before.max_max_min;
    return out;
  }

 private:
  void pull(RunState& s, std::size_t k) const {
    const double x = inst_.family.sample(inst_.means[k], s.rng);
    s.counts[k] += 1.0;
    s.sums[k] += x;
    s.mu_hat[k] = inst_.family.clamp(s.sums[k] / s.counts[k]);
    ++s.samples;
  }

  RuleSpec rule_;
  Query query_;
  BanditInstance inst_;
  ThresholdConfig cfg_;
};

enum class StopReason { Stopped, Censored };

struct RunRecord {
  std::string experiment_id;
  std::string rule;  // letter code, e.g. "D"
  std::string tracking;
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  std::size_t tau = 0;  // round at which the GLRT fired; tau - 1 samples were drawn
  Answer answer = 0;
  bool correct = false;
  StopReason stop_reason = StopReason::Stopped;
  bool oracle_assisted = false;
};

// Runs rounds K+1, K+2, ... until the GLRT fires or max_rounds is reached.
inline RunRecord run(const Sampler& sampler, std::uint64_t seed, std::size_t max_rounds,
                     std::vector<TraceRow>* trace = nullptr) {
  const std::size_t K = sampler.query().arms;
  if (max_rounds < K + 1) throw std::invalid_argument("max_rounds must be at least K + 1");
  RunRecord rec;
  rec.rule = std::string(to_string(sampler.rule().code));
  rec.tracking = std::string(to_string(sampler.rule().tracking));
  rec.seed = seed;
  RunState s = sampler.initialize(seed);
  rec.oracle_assisted = s.oracle_assisted;
  const Answer truth = correct_answer(sampler.query(), sampler.instance().means);
  while (s.round() <= max_rounds) {
    StepOutcome o = sampler.step(s);
    if (trace) trace->push_back(o.trace);
    if (o.decision.stop) {
      rec.tau = o.trace.t;
      rec.answer = o.decision.answer;
      rec.correct = rec.answer == truth;
      rec.stop_reason = StopReason::Stopped;
      return rec;
    }
  }
  rec.tau = max_rounds;
  rec.answer = correct_answer(sampler.query(), s.mu_hat);
  rec.correct = rec.answer == truth;
  rec.stop_reason = StopReason::Censored;
  return rec;
}

}  // namespace pegame
