#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pegame/harness.hpp"

using namespace pegame;

namespace {

ExperimentConfig five_arm_config(std::size_t runs, std::vector<std::string> rules) {
  ExperimentConfig cfg;
  cfg.experiment_id = "five_arms";
  cfg.family = ExpFamily::bernoulli();
  cfg.means = {0.3, 0.21, 0.2, 0.19, 0.18};
  cfg.query = Query::best_arm(5);
  for (const auto& r : rules) cfg.rules.push_back(RuleSpec::parse(r));
  cfg.n_runs = runs;
  cfg.master_seed = 2024;
  return cfg;
}

std::string results_csv(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  write_results_csv(os, records);
  return os.str();
}

RunRecord record(const std::string& rule, std::size_t tau, bool correct, StopReason reason) {
  RunRecord r;
  r.experiment_id = "x";
  r.rule = rule;
  r.tracking = "D";
  r.tau = tau;
  r.correct = correct;
  r.stop_reason = reason;
  return r;
}

}  // namespace

TEST(Seeds, DerivationIsDeterministicAndSeparatesStreams) {
  EXPECT_EQ(derive_seed(1, "D-D", 0), derive_seed(1, "D-D", 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t master : {0ull, 1ull, 2ull})
    for (const char* rule : {"D-D", "D-C", "T-D", "RR-D"})
      for (std::uint64_t r = 0; r < 50; ++r) seen.insert(derive_seed(master, rule, r));
  EXPECT_EQ(seen.size(), 3u * 4u * 50u);
}

TEST(RunExperiment, SingleRoundRobinRunIsOneDeterministicRecord) {
  ExperimentConfig cfg;
  cfg.family = ExpFamily::gaussian(1.0);
  cfg.means = {1.0, 0.0};
  cfg.query = Query::best_arm(2);
  cfg.rules = {RuleSpec::parse("RR-C")};
  cfg.n_runs = 1;
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(results_csv(a), results_csv(b));
  EXPECT_EQ(a[0].stop_reason, StopReason::Stopped);
  EXPECT_GE(a[0].tau, 3u);
  EXPECT_EQ(a[0].seed, derive_seed(0, "RR-C", 0));
}

TEST(RunExperiment, SerialAndParallelCsvAreIdentical) {
  auto cfg = five_arm_config(24, {"D-D", "RR-C", "F"});
  cfg.rules[2].ftpl_cap = 16;
  cfg.threads = 1;
  const std::string serial = results_csv(run_experiment(cfg));
  for (std::size_t threads : {2u, 4u, 7u}) {
    cfg.threads = threads;
    EXPECT_EQ(results_csv(run_experiment(cfg)), serial) << threads << " threads";
  }
}

TEST(RunExperiment, RecordsAreOrderedByRuleThenRun) {
  auto cfg = five_arm_config(5, {"RR-D", "D-C"});
  cfg.threads = 3;
  const auto recs = run_experiment(cfg);
  ASSERT_EQ(recs.size(), 10u);
  for (std::size_t j = 0; j < recs.size(); ++j) {
    EXPECT_EQ(recs[j].rule, j < 5 ? "RR" : "D");
    EXPECT_EQ(recs[j].run_index, j % 5);
    EXPECT_EQ(recs[j].experiment_id, "five_arms");
  }
}

TEST(RunExperiment, FiveArmBenchmarkAllStopped) {
  auto cfg = five_arm_config(200, {"D-D", "T-D", "RR-D", "OPT-D"});
  const auto recs = run_experiment(cfg);
  ASSERT_EQ(recs.size(), 800u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.stop_reason, StopReason::Stopped);
    EXPECT_GE(r.tau, 6u);
  }
  const auto s = summarize(recs, cfg);
  EXPECT_EQ(s.censored(), 0u);
  for (const auto& r : s.rules) {
    EXPECT_GE(r.mean_tau, s.lower_bound) << r.rule;
    EXPECT_LT(r.error_rate, 0.1) << r.rule;
  }
}

TEST(RunExperiment, FailureInWorkerPropagates) {
  auto cfg = five_arm_config(3, {"D-D"});
  cfg.max_rounds = 2;
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
}

TEST(Bounds, LowerBoundConstants) {
  EXPECT_NEAR(bernoulli_kl(0.1, 0.9), 1.757780, 1e-6);
  // kl(0.1, 0.9) / 0.005 for the two-arm threshold instance.
  EXPECT_NEAR(lower_bound(0.1, 0.005), 351.5559323737952, 1e-9);
}

TEST(Bounds, PracticalBoundIsFixedPoint) {
  const ThresholdConfig cfg;
  for (double D : {0.005, 0.01, 0.1, 1.0}) {
    const double t = practical_bound(cfg, D);
    EXPECT_NEAR(t, std::max(1.0, beta(t, cfg) / D), 1e-6 * t);
  }
  EXPECT_TRUE(std::isinf(practical_bound(cfg, 0.0)));
}

TEST(Bounds, LowerBoundBelowPracticalOnBenchmarks) {
  const ThresholdConfig cfg;
  struct Case {
    ExpFamily fam;
    std::vector<double> mu;
    Query q;
  };
  const std::vector<Case> cases = {
      {ExpFamily::bernoulli(), {0.3, 0.21, 0.2, 0.19, 0.18}, Query::best_arm(5)},
      {ExpFamily::bernoulli(), {0.5, 0.45, 0.43, 0.4}, Query::best_arm(4)},
      {ExpFamily::gaussian(1.0), {1, 0.85, 0.8, 0.7}, Query::best_arm(4)},
      {ExpFamily::gaussian(1.0), {0.5, 0.6}, Query::minimum_threshold(2, 0.6)},
      {ExpFamily::gaussian(1.0), {0.5, 0.625, 0.75, 0.875, 1.0}, Query::minimum_threshold(5, 0.0)},
  };
  for (const auto& c : cases) {
    const double D = game_value(c.q, c.fam, c.mu);
    for (double delta : {0.1, 0.05, 0.01, 0.001}) {
      ThresholdConfig t = cfg;
      t.delta = delta;
      EXPECT_LE(lower_bound(delta, D), practical_bound(t, D));
    }
  }
}

TEST(Quantile, TypeSevenInterpolation) {
  const std::vector<double> xs{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.1), 1.3);
  EXPECT_DOUBLE_EQ(quantile({7.0}, 0.9), 7.0);
  EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}

TEST(Summarize, StatisticsOverStoppedRunsOnly) {
  ExperimentConfig cfg;
  cfg.family = ExpFamily::gaussian(1.0);
  cfg.means = {0.5, 0.6};
  cfg.query = Query::minimum_threshold(2, 0.6);
  cfg.rules = {RuleSpec::parse("D-D")};
  const std::vector<RunRecord> recs = {
      record("D", 100, true, StopReason::Stopped),  record("D", 300, false, StopReason::Stopped),
      record("D", 200, true, StopReason::Stopped),  record("D", 400, true, StopReason::Stopped),
      record("D", 5000, false, StopReason::Censored),
  };
  const auto s = summarize(recs, cfg);
  EXPECT_NEAR(s.game_value, 0.005, 1e-12);
  EXPECT_NEAR(s.lower_bound, 351.556, 1e-3);
  ASSERT_EQ(s.rules.size(), 1u);
  const auto& r = s.rules[0];
  EXPECT_EQ(r.rule, "D-D");
  EXPECT_EQ(r.stopped, 4u);
  EXPECT_EQ(r.censored, 1u);
  EXPECT_DOUBLE_EQ(r.mean_tau, 250.0);
  EXPECT_DOUBLE_EQ(r.median_tau, 250.0);
  EXPECT_DOUBLE_EQ(r.error_rate, 0.25);
  EXPECT_TRUE(r.usable);
  EXPECT_LE(s.lower_bound, s.practical_bound);
}

TEST(Summarize, AllCensoredIsUnusable) {
  auto cfg = five_arm_config(2, {"D-D"});
  const std::vector<RunRecord> recs = {record("D", 10, false, StopReason::Censored),
                                       record("D", 10, false, StopReason::Censored)};
  const auto s = summarize(recs, cfg);
  EXPECT_FALSE(s.rules[0].usable);
  EXPECT_TRUE(std::isnan(s.rules[0].mean_tau));
  EXPECT_EQ(s.censored(), 2u);
  EXPECT_THROW(summarize({}, cfg), std::invalid_argument);
}

TEST(Summarize, RuleNamesWithoutTrackingForF) {
  auto cfg = five_arm_config(2, {"F"});
  auto r = record("F", 50, true, StopReason::Stopped);
  r.tracking = "none";
  EXPECT_EQ(summarize({r}, cfg).rules[0].rule, "F");
}

TEST(Csv, Headers) {
  std::ostringstream a, b;
  write_results_csv(a, {});
  EXPECT_EQ(a.str(), "experiment_id,rule,tracking,run_index,seed,tau,answer,correct,stop_reason\n");
  write_summary_csv(b, Summary{});
  EXPECT_EQ(b.str(), "rule,n,mean_tau,median_tau,q10,q90,error_rate,lower_bound,practical_bound\n");
}

TEST(Csv, ResultRowLayout) {
  auto r = record("T", 42, true, StopReason::Stopped);
  r.run_index = 3;
  r.seed = 99;
  r.answer = 1;
  std::ostringstream os;
  write_results_csv(os, {r});
  EXPECT_NE(os.str().find("\nx,T,D,3,99,42,1,1,stopped\n"), std::string::npos);
}

TEST(Config, ParsesKeyValueText) {
  const auto m = parse_config_text("# comment\nfamily = bernoulli\n\nmeans=0.3, 0.2 # trailing\nmax-rounds=500\n");
  EXPECT_EQ(m.at("family"), "bernoulli");
  EXPECT_EQ(m.at("means"), "0.3, 0.2");
  EXPECT_EQ(m.at("max_rounds"), "500");
  EXPECT_THROW(parse_config_text("family bernoulli\n"), std::invalid_argument);
}

TEST(Config, FlagsWinOnConflict) {
  const auto file = parse_config_text("means=0.5,0.6\nquery=minthreshold\ngamma=0.6\ndelta=0.05\nruns=3\n");
  const auto merged = merge_config(file, {{"delta", "0.01"}, {"max-rounds", "1000"}});
  const auto cfg = config_from_map(merged);
  EXPECT_DOUBLE_EQ(cfg.threshold.delta, 0.01);
  EXPECT_EQ(cfg.max_rounds, 1000u);
  EXPECT_EQ(cfg.n_runs, 3u);
  EXPECT_DOUBLE_EQ(cfg.query.gamma, 0.6);
}

TEST(Config, EveryFieldReachable) {
  const ConfigMap m = {{"id", "exp"},          {"family", "gaussian"},  {"sigma2", "4"},
                       {"means", "1,0,0.5"},    {"query", "bestarm"},   {"delta", "0.05"},
                       {"rules", "D-C,F,M-D"},  {"runs", "7"},          {"seed", "11"},
                       {"max_rounds", "5000"},  {"threshold", "theoretical"}, {"a", "2"},
                       {"b", "3"},              {"ftpl_cap", "16"},     {"dhat", "0.2"},
                       {"out", "/tmp/o"},       {"threads", "2"},       {"box_lo", "-5"},
                       {"box_hi", "6"},         {"ucb", "subgaussian"}, {"learners", "single"},
                       {"all_tests", "true"}};
  const auto cfg = config_from_map(m);
  EXPECT_EQ(cfg.experiment_id, "exp");
  EXPECT_DOUBLE_EQ(cfg.family.sigma2(), 4.0);
  EXPECT_DOUBLE_EQ(cfg.family.mu_min(), -5.0);
  EXPECT_DOUBLE_EQ(cfg.family.mu_max(), 6.0);
  EXPECT_EQ(cfg.means, (std::vector<double>{1, 0, 0.5}));
  EXPECT_EQ(cfg.query.arms, 3u);
  EXPECT_DOUBLE_EQ(cfg.threshold.delta, 0.05);
  EXPECT_EQ(cfg.threshold.kind, ThresholdKind::Theoretical);
  EXPECT_DOUBLE_EQ(cfg.threshold.a, 2.0);
  EXPECT_DOUBLE_EQ(cfg.threshold.b, 3.0);
  ASSERT_EQ(cfg.rules.size(), 3u);
  EXPECT_EQ(cfg.rules[1].name(), "F");
  for (const auto& r : cfg.rules) {
    EXPECT_EQ(r.ftpl_cap, 16u);
    EXPECT_DOUBLE_EQ(r.dhat.value(), 0.2);
    EXPECT_EQ(r.ucb, UcbVariant::SubGaussian);
    EXPECT_FALSE(r.per_answer_learners);
    EXPECT_TRUE(r.stop_all_tests);
  }
  EXPECT_EQ(cfg.n_runs, 7u);
  EXPECT_EQ(cfg.master_seed, 11u);
  EXPECT_EQ(cfg.max_rounds, 5000u);
  EXPECT_EQ(cfg.output, "/tmp/o");
  EXPECT_EQ(cfg.threads, 2u);
}

TEST(Config, RejectsInvalid) {
  EXPECT_THROW(config_from_map({{"means", "1,0"}, {"colour", "red"}}), std::invalid_argument);
  EXPECT_THROW(config_from_map({{"query", "bestarm"}}), std::invalid_argument);
  EXPECT_THROW(config_from_map({{"means", "0.5,0.6"}, {"query", "minthreshold"}}), std::invalid_argument);
  EXPECT_THROW(config_from_map({{"means", "1,0"}, {"rules", "F-D"}}), std::invalid_argument);
  EXPECT_THROW(config_from_map({{"means", "1,0"}, {"runs", "0"}}), std::invalid_argument);
  EXPECT_THROW(config_from_map({{"means", "1,x"}}), std::invalid_argument);
  EXPECT_THROW(config_from_map({{"means", "1,0"}, {"delta", "1.5"}}), std::invalid_argument);
  EXPECT_THROW(config_from_map({{"means", "1,0"}, {"family", "poisson"}}), std::invalid_argument);
  EXPECT_THROW(config_from_map({{"means", "0.5,1.2"}, {"family", "bernoulli"}}), std::invalid_argument);
  EXPECT_THROW(config_from_map({{"means", "1,0"}, {"seed", "-3"}}), std::invalid_argument);
}

TEST(Config, SplitList) {
  EXPECT_EQ(split_list(" a, b ,c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(split_list("").empty());
}
