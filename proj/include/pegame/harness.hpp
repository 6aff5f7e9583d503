#pragma once

// Monte-Carlo experiments: deterministic per-run seeds, a worker pool over runs,
// CSV emission, summary statistics and the reference sample-complexity bounds.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "pegame/expfam.hpp"
#include "pegame/problems.hpp"
#include "pegame/sampling.hpp"
#include "pegame/stopping.hpp"

namespace pegame {

struct ExperimentConfig {
  std::string experiment_id = "experiment";
  ExpFamily family = ExpFamily::gaussian(1.0);
  std::vector<double> means;
  Query query;
  ThresholdConfig threshold;
  std::vector<RuleSpec> rules;
  std::size_t n_runs = 1;
  std::uint64_t master_seed = 0;
  std::size_t max_rounds = 10'000'000;
  std::string output;       // directory receiving results.csv and summary.csv
  std::size_t threads = 0;  // 0: hardware concurrency

  BanditInstance instance() const { return BanditInstance(family, means); }

  void validate() const {
    if (means.size() != query.arms) throw std::invalid_argument("means and query arm counts differ");
    (void)instance();
    threshold.validate();
    if (rules.empty()) throw std::invalid_argument("at least one rule is required");
    for (const auto& r : rules) r.validate();
    if (n_runs < 1) throw std::invalid_argument("runs must be at least 1");
    if (max_rounds < query.arms + 1) throw std::invalid_argument("max_rounds must be at least K + 1");
  }
};

// SplitMix64 finaliser.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view rule, std::uint64_t run) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : rule) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(master) ^ mix64(h) ^ mix64(run + 0x632be59bd9b4e019ULL));
}

// Records are ordered by (rule, run index) whatever the thread schedule.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<Sampler> samplers;
  for (const auto& r : cfg.rules) samplers.emplace_back(r, cfg.query, cfg.instance(), cfg.threshold);

  const std::size_t jobs = cfg.rules.size() * cfg.n_runs;
  std::vector<RunRecord> records(jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        const std::size_t ri = j / cfg.n_runs;
        const std::size_t run_index = j % cfg.n_runs;
        const std::string name = cfg.rules[ri].name();
        RunRecord rec = run(samplers[ri], derive_seed(cfg.master_seed, name, run_index), cfg.max_rounds);
        rec.experiment_id = cfg.experiment_id;
        rec.run_index = run_index;
        records[j] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs;
      }
    }
  };

  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

inline std::string_view to_string(StopReason r) {
  return r == StopReason::Stopped ? "stopped" : "censored";
}

inline void write_results_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "experiment_id,rule,tracking,run_index,seed,tau,answer,correct,stop_reason\n";
  for (const auto& r : records) {
    os << r.experiment_id << ',' << r.rule << ',' << r.tracking << ',' << r.run_index << ','
       << r.seed << ',' << r.tau << ',' << r.answer << ',' << (r.correct ? 1 : 0) << ','
       << to_string(r.stop_reason) << '\n';
  }
}

// kl(delta, 1 - delta) / D: no delta-correct algorithm has smaller expected stopping time.
inline double lower_bound(double delta, double game_value) {
  return bernoulli_kl(delta, 1.0 - delta) / game_value;
}

// Fixed point of t = beta(t, delta) / D, iterated from t = 1.
inline double practical_bound(const ThresholdConfig& cfg, double game_value) {
  if (!(game_value > 0.0)) return std::numeric_limits<double>::infinity();
  double t = 1.0;
  for (int it = 0; it < 10000; ++it) {
    const double next = std::max(1.0, beta(t, cfg) / game_value);
    if (std::abs(next - t) <= 1e-9 * t) return next;
    t = next;
  }
  return t;
}

// Linear interpolation between order statistics (R type 7).
inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double h = p * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

struct RuleSummary {
  std::string rule;  // full name, e.g. "D-D"
  std::size_t stopped = 0;
  std::size_t censored = 0;
  double mean_tau = 0.0;
  double median_tau = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  double error_rate = 0.0;
  double lower_bound = 0.0;
  double practical_bound = 0.0;
  bool usable = true;  // false when every run was censored
};

struct Summary {
  double game_value = 0.0;
  double lower_bound = 0.0;
  double practical_bound = 0.0;
  std::vector<RuleSummary> rules;

  std::size_t censored() const {
    std::size_t c = 0;
    for (const auto& r : rules) c += r.censored;
    return c;
  }
};

inline Summary summarize(const std::vector<RunRecord>& records, const ExperimentConfig& cfg) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  Summary out;
  out.game_value = game_value(cfg.query, cfg.family, cfg.means);
  out.lower_bound = out.game_value > 0.0 ? lower_bound(cfg.threshold.delta, out.game_value)
                                         : std::numeric_limits<double>::infinity();
  out.practical_bound = practical_bound(cfg.threshold, out.game_value);

  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> by_rule;
  for (const auto& r : records) {
    const std::string name = r.tracking == "none" ? r.rule : r.rule + "-" + r.tracking;
    if (!by_rule.count(name)) order.push_back(name);
    by_rule[name].push_back(&r);
  }
  for (const auto& name : order) {
    RuleSummary s;
    s.rule = name;
    s.lower_bound = out.lower_bound;
    s.practical_bound = out.practical_bound;
    std::vector<double> taus;
    std::size_t wrong = 0;
    for (const RunRecord* r : by_rule[name]) {
      if (r->stop_reason == StopReason::Censored) {
        ++s.censored;
        continue;
      }
      taus.push_back(static_cast<double>(r->tau));
      if (!r->correct) ++wrong;
    }
    s.stopped = taus.size();
    s.usable = !taus.empty();
    if (s.usable) {
      double total = 0.0;
      for (double x : taus) total += x;
      s.mean_tau = total / static_cast<double>(taus.size());
      s.median_tau = quantile(taus, 0.5);
      s.q10 = quantile(taus, 0.1);
      s.q90 = quantile(taus, 0.9);
      s.error_rate = static_cast<double>(wrong) / static_cast<double>(taus.size());
    } else {
      s.mean_tau = s.median_tau = s.q10 = s.q90 = s.error_rate =
          std::numeric_limits<double>::quiet_NaN();
    }
    out.rules.push_back(std::move(s));
  }
  return out;
}

inline void write_summary_csv(std::ostream& os, const Summary& summary) {
  os << "rule,n,mean_tau,median_tau,q10,q90,error_rate,lower_bound,practical_bound\n";
  std::ostringstream line;
  line.precision(10);
  for (const auto& r : summary.rules) {
    line << r.rule << ',' << r.stopped << ',' << r.mean_tau << ',' << r.median_tau << ',' << r.q10
         << ',' << r.q90 << ',' << r.error_rate << ',' << r.lower_bound << ',' << r.practical_bound
         << '\n';
  }
  os << line.str();
}

// ---------------------------------------------------------------------------
// Flat key=value configuration. Keys use the long flag names; '-' and '_' are
// interchangeable. Arrays are comma-separated.

using ConfigMap = std::map<std::string, std::string>;

inline std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    out[normalize_key(trim(body.substr(0, eq)))] = trim(body.substr(eq + 1));
  }
  return out;
}

inline ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// Entries of `overrides` win.
inline ConfigMap merge_config(ConfigMap base, const ConfigMap& overrides) {
  for (const auto& [k, v] : overrides) base[normalize_key(k)] = v;
  return base;
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + key + "': not a number: '" + v + "'");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + key + "': not a nonnegative integer: '" + v + "'");
  }
}

}  // namespace detail

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "id",  "family", "sigma2",   "means", "query",      "gamma",   "delta", "rules",
      "runs", "seed",  "max_rounds", "threshold", "a",    "b",       "ftpl_cap", "dhat",
      "out", "threads", "box_lo",  "box_hi", "ucb",       "learners", "all_tests"};
  return keys;
}

inline ExperimentConfig config_from_map(const ConfigMap& raw) {
  ConfigMap m;
  for (const auto& [k, v] : raw) {
    const std::string key = normalize_key(k);
    const auto& keys = known_config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw std::invalid_argument("unknown configuration key '" + k + "'");
    m[key] = v;
  }
  auto get = [&](const char* key) -> const std::string* {
    auto it = m.find(key);
    return it == m.end() ? nullptr : &it->second;
  };
  auto num = [&](const char* key, double fallback) {
    const std::string* v = get(key);
    return v ? detail::to_double(key, *v) : fallback;
  };

  ExperimentConfig cfg;
  if (auto v = get("id")) cfg.experiment_id = *v;

  const std::string family = get("family") ? *get("family") : "gaussian";
  if (family == "gaussian") {
    const double s2 = num("sigma2", 1.0);
    if (!(s2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    const double s = std::sqrt(s2);
    cfg.family = ExpFamily::gaussian(s2, num("box_lo", -10.0 * s), num("box_hi", 10.0 * s));
  } else if (family == "bernoulli") {
    cfg.family = ExpFamily::bernoulli(num("box_lo", 0.001), num("box_hi", 0.999));
  } else {
    throw std::invalid_argument("unknown family '" + family + "' (gaussian|bernoulli)");
  }

  const std::string* means = get("means");
  if (!means) throw std::invalid_argument("'means' is required");
  for (const auto& x : split_list(*means)) cfg.means.push_back(detail::to_double("means", x));

  const std::string query = get("query") ? *get("query") : "bestarm";
  if (query == "bestarm") {
    cfg.query = Query::best_arm(cfg.means.size());
  } else if (query == "minthreshold") {
    const std::string* g = get("gamma");
    if (!g) throw std::invalid_argument("query minthreshold requires 'gamma'");
    cfg.query = Query::minimum_threshold(cfg.means.size(), detail::to_double("gamma", *g));
  } else {
    throw std::invalid_argument("unknown query '" + query + "' (bestarm|minthreshold)");
  }

  cfg.threshold.delta = num("delta", 0.1);
  const std::string threshold = get("threshold") ? *get("threshold") : "stylised";
  if (threshold == "stylised") cfg.threshold.kind = ThresholdKind::Stylised;
  else if (threshold == "theoretical") cfg.threshold.kind = ThresholdKind::Theoretical;
  else throw std::invalid_argument("unknown threshold '" + threshold + "' (stylised|theoretical)");
  cfg.threshold.a = num("a", 1.0);
  cfg.threshold.b = num("b", 1.0);

  const std::string rules = get("rules") ? *get("rules") : "D-D";
  for (const auto& r : split_list(rules)) {
    RuleSpec rule = RuleSpec::parse(r);
    if (auto v = get("ftpl_cap")) rule.ftpl_cap = detail::to_uint("ftpl_cap", *v);
    if (auto v = get("dhat")) rule.dhat = detail::to_double("dhat", *v);
    if (auto v = get("ucb")) {
      if (*v == "kl") rule.ucb = UcbVariant::KL;
      else if (*v == "subgaussian") rule.ucb = UcbVariant::SubGaussian;
      else throw std::invalid_argument("unknown ucb '" + *v + "' (kl|subgaussian)");
    }
    if (auto v = get("learners")) {
      if (*v == "per-answer") rule.per_answer_learners = true;
      else if (*v == "single") rule.per_answer_learners = false;
      else throw std::invalid_argument("unknown learners '" + *v + "' (per-answer|single)");
    }
    if (auto v = get("all_tests")) rule.stop_all_tests = *v == "1" || *v == "true";
    rule.validate();
    cfg.rules.push_back(rule);
  }

  if (auto v = get("runs")) cfg.n_runs = detail::to_uint("runs", *v);
  if (auto v = get("seed")) cfg.master_seed = detail::to_uint("seed", *v);
  if (auto v = get("max_rounds")) cfg.max_rounds = detail::to_uint("max_rounds", *v);
  if (auto v = get("threads")) cfg.threads = detail::to_uint("threads", *v);
  if (auto v = get("out")) cfg.output = *v;
  cfg.validate();
  return cfg;
}

}  // namespace pegame
