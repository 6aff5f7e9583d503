// pegame: oracle weights, single runs and Monte-Carlo benchmarks from the command line.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pegame/harness.hpp"

namespace {

using namespace pegame;

constexpr int kUsageError = 2;

// Flags that map one-to-one onto configuration keys. Values stay strings until
// config_from_map so that a config file and flags share one parser.
struct FlagSet {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;
  std::string trace_path;
};

struct FlagSpec {
  const char* key;
  const char* flag;
  const char* help;
};

const std::vector<FlagSpec>& flag_specs() {
  static const std::vector<FlagSpec> specs = {
      {"id", "--id", "experiment id written to the results CSV"},
      {"family", "--family", "gaussian | bernoulli"},
      {"sigma2", "--sigma2", "Gaussian variance"},
      {"means", "--means", "comma-separated arm means"},
      {"query", "--query", "bestarm | minthreshold"},
      {"gamma", "--gamma", "threshold for minthreshold"},
      {"delta", "--delta", "confidence level"},
      {"rules", "--rules,--rule", "comma-separated rules, e.g. D-D,T-D,F"},
      {"runs", "--runs", "runs per rule"},
      {"seed", "--seed", "master seed"},
      {"max_rounds", "--max-rounds", "censoring horizon"},
      {"threshold", "--threshold", "stylised | theoretical"},
      {"a", "--a", "theoretical threshold slack a"},
      {"b", "--b", "theoretical threshold slack b"},
      {"ftpl_cap", "--ftpl-cap", "cap on FTPL atoms per round (0: none)"},
      {"dhat", "--dhat", "learning-rate scale for rule M"},
      {"out", "--out", "output directory for bench"},
      {"threads", "--threads", "worker threads (0: all cores)"},
      {"box_lo", "--box-lo", "lower end of the mean box"},
      {"box_hi", "--box-hi", "upper end of the mean box"},
      {"ucb", "--ucb", "kl | subgaussian (rules O and M)"},
      {"learners", "--learners", "per-answer | single (rule D)"},
      {"all_tests", "--all-tests", "stop on any answer's GLRT (1 | 0)"},
  };
  return specs;
}

void add_flags(CLI::App& app, FlagSet& flags, bool with_trace) {
  for (const auto& s : flag_specs()) flags.options[s.key] = app.add_option(s.flag, flags.values[s.key], s.help);
  app.add_option("--config", flags.config_path, "key=value configuration file (flags win)");
  if (with_trace) app.add_option("--trace", flags.trace_path, "write the per-round trace CSV here");
}

ExperimentConfig resolve(const FlagSet& flags) {
  ConfigMap from_flags;
  for (const auto& [key, opt] : flags.options)
    if (opt->count() > 0) from_flags[key] = flags.values.at(key);
  ConfigMap base;
  if (!flags.config_path.empty()) base = read_config_file(flags.config_path);
  return config_from_map(merge_config(base, from_flags));
}

std::string join(const std::vector<double>& xs, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision);
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? ", " : "") << xs[i];
  return os.str();
}

std::string answer_name(const Query& q, Answer a) {
  if (q.kind == QueryKind::BestArm) return "arm " + std::to_string(a);
  return a == kBelow ? "below" : "above";
}

int cmd_solve(const ExperimentConfig& cfg) {
  GameSolution sol;
  try {
    sol = solve_game(cfg.query, cfg.family, cfg.means);
  } catch (const DegenerateInstance& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cout << "answer = " << answer_name(cfg.query, sol.answer) << '\n';
  std::cout << "w* = " << join(sol.weights, 4) << '\n';
  std::cout << "D = " << std::setprecision(6) << sol.value << '\n';
  for (std::size_t j = 0; j < sol.witnesses.size(); ++j) {
    std::cout << "witness " << j << " (weight " << std::setprecision(4) << sol.witnesses[j].weight
              << "): lambda = " << join(sol.witnesses[j].lambda, 6) << '\n';
  }
  return 0;
}

int cmd_bounds(const ExperimentConfig& cfg) {
  const double D = game_value(cfg.query, cfg.family, cfg.means);
  if (!(D > 0.0)) {
    std::cerr << "error: degenerate instance, the game value is zero\n";
    return 1;
  }
  std::cout << std::setprecision(10);
  std::cout << "D = " << D << '\n';
  std::cout << "lower_bound = " << lower_bound(cfg.threshold.delta, D) << '\n';
  std::cout << "practical_bound = " << practical_bound(cfg.threshold, D) << '\n';
  return 0;
}

void warn_if_censored(const std::vector<RunRecord>& records) {
  std::size_t censored = 0;
  for (const auto& r : records) censored += r.stop_reason == StopReason::Censored;
  if (censored > 0) {
    std::cerr << "warning: " << censored << " run(s) censored at max_rounds; they are excluded from "
              << "the tau statistics\n";
  }
}

int cmd_run(const ExperimentConfig& cfg, const std::string& trace_path) {
  if (cfg.rules.size() != 1) {
    std::cerr << "error: run takes exactly one rule\n";
    return kUsageError;
  }
  const RuleSpec& rule = cfg.rules.front();
  const Sampler sampler(rule, cfg.query, cfg.instance(), cfg.threshold);
  // Same stream as run 0 of a bench with this seed.
  const std::uint64_t seed = derive_seed(cfg.master_seed, rule.name(), 0);
  std::vector<TraceRow> trace;
  RunRecord rec = run(sampler, seed, cfg.max_rounds, trace_path.empty() ? nullptr : &trace);
  rec.experiment_id = cfg.experiment_id;

  std::cout << "rule = " << rule.name() << '\n'
            << "seed = " << rec.seed << '\n'
            << "tau = " << rec.tau << '\n'
            << "answer = " << answer_name(cfg.query, rec.answer) << '\n'
            << "correct = " << (rec.correct ? 1 : 0) << '\n'
            << "stop_reason = " << to_string(rec.stop_reason) << '\n';
  if (rec.oracle_assisted) std::cout << "oracle_assisted = 1\n";

  if (!trace_path.empty()) {
    std::ofstream os(trace_path);
    if (!os) throw std::runtime_error("cannot write '" + trace_path + "'");
    write_trace_header(os);
    for (const auto& row : trace) write_trace_row(os, row);
  }
  warn_if_censored({rec});
  return 0;
}

int cmd_bench(ExperimentConfig cfg) {
  if (cfg.output.empty()) cfg.output = "out";
  const std::filesystem::path dir(cfg.output);
  std::filesystem::create_directories(dir);

  const auto records = run_experiment(cfg);
  const auto summary = summarize(records, cfg);

  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    return os;
  };
  {
    auto os = open("results.csv");
    write_results_csv(os, records);
  }
  {
    auto os = open("summary.csv");
    write_summary_csv(os, summary);
  }
  {
    auto os = open("metadata.txt");
    os << "experiment_id = " << cfg.experiment_id << '\n'
       << "master_seed = " << cfg.master_seed << '\n'
       << "runs = " << cfg.n_runs << '\n'
       << "delta = " << cfg.threshold.delta << '\n'
       << "max_rounds = " << cfg.max_rounds << '\n'
       << "censored = " << summary.censored() << '\n';
    for (const auto& r : cfg.rules) {
      if (r.code == RuleCode::M && !r.dhat) os << "oracle_assisted." << r.name() << " = 1\n";
      if (r.code == RuleCode::F && r.ftpl_cap > 0) os << "ftpl_cap." << r.name() << " = " << r.ftpl_cap << '\n';
    }
  }

  std::cout << std::setprecision(6);
  std::cout << "D = " << summary.game_value << ", lower_bound = " << summary.lower_bound
            << ", practical_bound = " << summary.practical_bound << '\n';
  for (const auto& r : summary.rules) {
    std::cout << r.rule << ": stopped " << r.stopped << ", censored " << r.censored << ", mean tau "
              << r.mean_tau << ", error rate " << r.error_rate << '\n';
  }
  std::cout << "wrote " << (dir / "results.csv").string() << " and " << (dir / "summary.csv").string() << '\n';
  warn_if_censored(records);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-confidence pure exploration for exponential-family bandits"};
  app.require_subcommand(1);

  FlagSet solve_flags, run_flags, bench_flags, bounds_flags;
  auto* solve = app.add_subcommand("solve", "print oracle weights, game value and witnesses");
  auto* run_cmd = app.add_subcommand("run", "simulate one run of one rule");
  auto* bench = app.add_subcommand("bench", "Monte-Carlo benchmark writing results and summary CSVs");
  auto* bounds = app.add_subcommand("bounds", "print the lower and practical sample-complexity bounds");
  add_flags(*solve, solve_flags, false);
  add_flags(*run_cmd, run_flags, true);
  add_flags(*bench, bench_flags, false);
  add_flags(*bounds, bounds_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  auto with_config = [](const FlagSet& flags, auto&& body) -> int {
    ExperimentConfig cfg;
    try {
      cfg = resolve(flags);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kUsageError;
    }
    try {
      return body(cfg);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  };

  if (*solve) return with_config(solve_flags, [](const ExperimentConfig& c) { return cmd_solve(c); });
  if (*bounds) return with_config(bounds_flags, [](const ExperimentConfig& c) { return cmd_bounds(c); });
  if (*run_cmd) {
    return with_config(run_flags, [&](const ExperimentConfig& c) { return cmd_run(c, run_flags.trace_path); });
  }
  return with_config(bench_flags, [](const ExperimentConfig& c) { return cmd_bench(c); });
}
