// Copyright 2026 The RCO Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// rco_cli: scenario generation, single runs, benchmark sweeps, the
// multi-constraint comparison and the DP oracle.
//
//   rco_cli [config.json] <subcommand> [flags]
//
// Values in the optional config file act as defaults; flags given on the
// command line win. Exit codes: 0 ok, 2 config/usage, 3 generation,
// 4 solver, 5 some bench runs failed, 6 I/O.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rco/bench.hpp"
#include "rco/io.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kGeneration = 3,
  kSolver = 4,
  kPartialFailure = 5,
  kIo = 6,
};

int exit_code_for(rco::ErrorCode code) {
  switch (code) {
    case rco::ErrorCode::kInvalidArgument:
    case rco::ErrorCode::kConfigError: return kConfig;
    case rco::ErrorCode::kGenerationFailed: return kGeneration;
    case rco::ErrorCode::kIoError: return kIo;
    default: return kSolver;
  }
}

// RCO_LOG: quiet | info (default) | debug. Diagnostics go to stderr so
// stdout stays deterministic.
enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("RCO_LOG");
    const std::string v = env ? env : "info";
    if (v == "quiet" || v == "0" || v == "error") return LogLevel::kQuiet;
    if (v == "debug" || v == "2") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

template <typename... Args>
void log_at(LogLevel level, const char* fmt, Args... args) {
  if (log_level() < level) return;
  std::fprintf(stderr, "[rco] ");
  if constexpr (sizeof...(Args) == 0) {
    std::fputs(fmt, stderr);
  } else {
    std::fprintf(stderr, fmt, args...);
  }
  std::fputc('\n', stderr);
}

struct Settings {
  std::string family;
  std::uint64_t seed = 1;
  std::string method = "manifold";
  int steps = 5000;
  double lr = 0.01;
  int gumbel_samples = 1;
  double tau0 = 1.0;
  double tau_min = 0.01;
  std::string mode = "equality";
  std::string grad = "relaxed";
  double retraction_tol = 1e-8;
  double bracket = 50.0;
  std::string out;
  int jobs = 1;
  int instances = 3;
  std::string problem;
  std::optional<double> lambda;
  std::string extraction = "greedy";
  rco::Json scenario = rco::Json::object();
};

// Registry tying each flag to its config-file key so that config values
// only fill options the user did not pass.
class Options {
 public:
  Options(CLI::App* app, Settings* s) : app_(app), s_(s) {}

  template <typename T>
  Options& add(const std::string& key, T* field, const std::string& help) {
    const std::string flag = "--" + dashed(key);
    CLI::Option* opt = app_->add_option(flag, *field, help);
    entries_.push_back({key, opt, [field](const rco::Json& j) { *field = j.get<T>(); }});
    return *this;
  }

  Options& add_lambda() {
    CLI::Option* opt = app_->add_option("--lambda", s_->lambda, "fixed Lagrangian penalty weight (tuned when omitted)");
    entries_.push_back({"lambda", opt, [s = s_](const rco::Json& j) { s->lambda = j.get<double>(); }});
    return *this;
  }

  CLI::App* app() const { return app_; }

  void apply(const rco::Json& config) const {
    for (const auto& e : entries_) {
      if (e.option->count() > 0 || !config.contains(e.key)) continue;
      try {
        e.assign(config.at(e.key));
      } catch (const rco::Json::exception& ex) {
        throw rco::Error(rco::ErrorCode::kConfigError, "config key '" + e.key + "': " + ex.what());
      }
    }
    if (config.contains("scenario")) s_->scenario = config.at("scenario");
  }

 private:
  static std::string dashed(std::string key) {
    for (char& c : key) {
      if (c == '_') c = '-';
    }
    return key;
  }

  struct Entry {
    std::string key;
    CLI::Option* option;
    std::function<void(const rco::Json&)> assign;
  };
  CLI::App* app_;
  Settings* s_;
  std::vector<Entry> entries_;
};

rco::RcoConfig make_config(const Settings& s) {
  rco::RcoConfig c;
  c.steps = s.steps;
  c.adam.lr = s.lr;
  c.gumbel_samples = s.gumbel_samples;
  c.schedule.tau0 = s.tau0;
  c.schedule.tau_min = s.tau_min;
  c.retraction.tol = s.retraction_tol;
  c.retraction.half_bracket = s.bracket;
  c.seed = s.seed;
  c.parallel_samples = s.jobs > 1 && s.gumbel_samples > 1;
  if (s.mode == "equality") {
    c.mode = rco::ConstraintMode::kEquality;
  } else if (s.mode == "slack") {
    c.mode = rco::ConstraintMode::kSlack;
  } else if (s.mode == "multi") {
    c.mode = rco::ConstraintMode::kMulti;
  } else {
    throw rco::Error(rco::ErrorCode::kConfigError, "--mode must be equality, slack or multi");
  }
  if (s.grad == "relaxed") {
    c.gradient = rco::GradientMode::kRelaxed;
  } else if (s.grad == "ste") {
    c.gradient = rco::GradientMode::kSte;
  } else {
    throw rco::Error(rco::ErrorCode::kConfigError, "--grad must be relaxed or ste");
  }
  if (s.extraction == "greedy") {
    c.extraction = rco::Extraction::kGreedyRepair;
  } else if (s.extraction == "dp") {
    c.extraction = rco::Extraction::kDp;
  } else {
    throw rco::Error(rco::ErrorCode::kConfigError, "--extraction must be greedy or dp");
  }
  if (s.steps < 0) throw rco::Error(rco::ErrorCode::kConfigError, "--steps must be non-negative");
  if (s.jobs < 1) throw rco::Error(rco::ErrorCode::kConfigError, "--jobs must be at least 1");
  if (s.instances < 1) throw rco::Error(rco::ErrorCode::kConfigError, "--instances must be at least 1");
  return c;
}

rco::ScenarioSpec make_spec(const Settings& s) {
  if (s.family.empty()) throw rco::Error(rco::ErrorCode::kConfigError, "--family is required");
  return rco::spec_from_json(s.scenario, rco::default_spec(s.family, s.seed));
}

std::string out_dir(const Settings& s) {
  const std::string dir = s.out.empty() ? "." : s.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw rco::Error(rco::ErrorCode::kIoError, "cannot create '" + dir + "': " + ec.message());
  return dir;
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string trace_name(const std::string& family, const std::string& method, std::uint64_t seed) {
  return family + "_" + method + "_seed" + std::to_string(seed) + ".jsonl";
}

void print_checks(const rco::Scenario& sc) {
  std::printf("family %s seed %llu: N=%zu K=%zu budget=%s attempts=%d\n", sc.spec.family.c_str(),
              static_cast<unsigned long long>(sc.spec.seed), sc.problem.num_groups(),
              sc.problem.num_options(), rco::format_double(sc.problem.budget).c_str(), sc.attempts);
  for (const auto& c : sc.checks) {
    std::printf("  %-26s %s value=%s threshold=%s\n", c.name.c_str(), c.passed ? "ok  " : "FAIL",
                rco::format_double(c.value).c_str(), rco::format_double(c.threshold).c_str());
  }
}

int cmd_scenario_gen(const Settings& s) {
  const rco::Scenario sc = rco::generate(make_spec(s));
  const std::string path =
      s.out.empty() ? sc.spec.family + "_seed" + std::to_string(sc.spec.seed) + ".json" : s.out;
  rco::write_json_file(path, rco::scenario_to_json(sc));
  print_checks(sc);
  std::printf("wrote %s\n", path.c_str());
  return kOk;
}

// Instance from --problem (values required for gaps) or the generator.
rco::Instance load_instance(const Settings& s) {
  rco::Instance inst;
  if (!s.problem.empty()) {
    const rco::Json j = rco::read_json_file(s.problem);
    inst.scenario.problem = rco::problem_from_json(j);
    inst.scenario.spec.family = j.value("family", fs::path(s.problem).stem().string());
    inst.scenario.spec.seed = j.value("seed", s.seed);
    rco::validate_problem(inst.scenario.problem);
    if (!inst.scenario.problem.values) {
      throw rco::Error(rco::ErrorCode::kConfigError, "problem file has no values matrix");
    }
  } else {
    inst.scenario = rco::generate(make_spec(s));
  }
  inst.oracle = rco::solve_oracle(inst.scenario.problem);
  return inst;
}

rco::Method solve_method(const Settings& s) {
  const std::vector<rco::Method> m = rco::parse_methods(s.method);
  if (m.size() != 1) throw rco::Error(rco::ErrorCode::kConfigError, "solve runs a single method");
  if (m[0] == rco::Method::kManifold && s.mode == "slack") return rco::Method::kManifoldSlack;
  return m[0];
}

int cmd_multi_impl(const Settings& s, const rco::RcoConfig& config, bool only_selected);

int cmd_solve(const Settings& s) {
  const rco::RcoConfig config = make_config(s);
  if (config.mode == rco::ConstraintMode::kMulti) return cmd_multi_impl(s, config, true);
  const rco::Method method = solve_method(s);
  const rco::Instance inst = load_instance(s);
  double lambda = s.lambda.value_or(1.0);
  if (method == rco::Method::kLagrangian && !s.lambda) {
    if (s.problem.empty()) {
      lambda = rco::tune_lambda_for(inst.scenario.spec.family, s.seed, config).lambda;
      log_at(LogLevel::kInfo, "tuned lambda = %g on held-out seed %llu", lambda,
             static_cast<unsigned long long>(s.seed + rco::kHeldOutSeedOffset));
    } else {
      log_at(LogLevel::kInfo, "problem file given without --lambda; using lambda = 1");
    }
  }
  log_at(LogLevel::kInfo, "solve %s on %s seed %llu, %d steps", rco::method_name(method),
         inst.scenario.spec.family.c_str(), static_cast<unsigned long long>(inst.scenario.spec.seed),
         config.steps);
  const rco::JobOutput job = rco::run_method(inst, method, config, lambda);
  const std::string dir = out_dir(s);
  rco::write_text_file(join(dir, trace_name(job.row.scenario, job.row.method, job.row.seed)),
                       rco::trace_to_jsonl(job.run.trace));
  rco::write_text_file(join(dir, "summary.csv"), rco::summary_csv({job.row}));
  rco::write_text_file(join(dir, "timing.csv"), rco::timing_csv({job.row}));
  std::printf("%s\n%s\n", rco::kSummaryHeader, rco::summary_csv_line(job.row).c_str());
  return kOk;
}

int cmd_bench(const Settings& s) {
  rco::BenchRequest req;
  req.family = make_spec(s).family;
  req.methods = rco::parse_methods(s.method);
  req.base_seed = s.seed;
  req.instances = s.instances;
  req.config = make_config(s);
  req.config.parallel_samples = false;  // parallelism is across jobs here
  if (req.config.mode == rco::ConstraintMode::kMulti) {
    throw rco::Error(rco::ErrorCode::kConfigError, "bench runs single-budget families; use 'multi'");
  }
  req.lambda = s.lambda;
  req.jobs = s.jobs;
  req.on_job = [](const rco::JobOutput& job) {
    log_at(LogLevel::kInfo, "done %s seed %llu: gap %.4f%%, mean |v| %.3g, %.1fs", job.row.method.c_str(),
           static_cast<unsigned long long>(job.row.seed), job.row.final_gap_pct, job.row.mean_violation,
           job.row.wall_seconds);
  };
  log_at(LogLevel::kInfo, "bench %s: %zu method(s) x %d instance(s), %d steps, %d job(s)", req.family.c_str(),
         req.methods.size(), req.instances, req.config.steps, req.jobs);
  const rco::BenchResult res = rco::run_bench(req);

  const std::string dir = out_dir(s);
  const std::string traces = join(dir, "traces");
  std::error_code ec;
  fs::create_directories(traces, ec);
  if (ec) throw rco::Error(rco::ErrorCode::kIoError, "cannot create '" + traces + "'");
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    if (r.status != "ok") continue;
    rco::write_text_file(join(traces, trace_name(r.scenario, r.method, r.seed)),
                         rco::trace_to_jsonl(res.traces[i]));
  }
  rco::write_text_file(join(dir, "summary.csv"), rco::summary_csv(res.rows));
  rco::write_text_file(join(dir, "timing.csv"), rco::timing_csv(res.rows));
  if (res.tuning) {
    rco::Json t = {{"family", req.family},
                   {"heldout_seed", req.base_seed + rco::kHeldOutSeedOffset},
                   {"lambda", res.tuning->lambda}};
    rco::Json cands = rco::Json::array();
    for (const auto& c : res.tuning->candidates) {
      cands.push_back({{"lambda", c.lambda}, {"final_gap_pct", c.final_gap_pct}, {"mean_violation", c.mean_violation}});
    }
    t["candidates"] = cands;
    rco::write_json_file(join(dir, "lambda_tuning.json"), t);
  }
  std::fputs(rco::summary_csv(res.rows).c_str(), stdout);
  if (res.failures > 0) {
    log_at(LogLevel::kQuiet, "%d run(s) failed", res.failures);
    return kPartialFailure;
  }
  return kOk;
}

int cmd_multi_impl(const Settings& s, const rco::RcoConfig& config_in, bool only_selected) {
  rco::RcoConfig config = config_in;
  config.mode = rco::ConstraintMode::kMulti;
  const rco::MultiScenario inst = rco::generate_multi(s.seed);
  log_at(LogLevel::kInfo, "multi seed %llu: q=%zu, gram condition %.3g", static_cast<unsigned long long>(s.seed),
         inst.constraints.size(), inst.gram_condition);
  std::vector<rco::MultiRun> runs =
      rco::run_multi_comparison(inst, config, s.lambda.value_or(rco::kMultiLambda));
  const std::string dir = out_dir(s);
  std::string summary = "method,max_abs_violation,mean_abs_violation,final_value,steps\n";
  const std::size_t q = inst.constraints.size();
  for (const auto& r : runs) {
    if (only_selected && r.method != s.method) continue;
    double worst = 0.0, total = 0.0;
    std::size_t count = 0;
    for (const auto& rec : r.run.trace.steps) {
      for (double v : rec.constraint_violations) {
        worst = std::max(worst, std::abs(v));
        total += std::abs(v);
        ++count;
      }
    }
    const double mean = count ? total / static_cast<double>(count) : 0.0;
    const double value = rco::assignment_value(r.run.assignment, *inst.base.values);
    rco::write_text_file(join(dir, "multi_" + r.method + "_violations.csv"), rco::violations_csv(r.run.trace, q));
    rco::write_text_file(join(dir, trace_name("multi", r.method, s.seed)), rco::trace_to_jsonl(r.run.trace));
    summary += r.method + "," + rco::format_double(worst) + "," + rco::format_double(mean) + "," +
               rco::format_double(value) + "," + std::to_string(config.steps) + "\n";
  }
  rco::write_text_file(join(dir, "multi_summary.csv"), summary);
  std::fputs(summary.c_str(), stdout);
  return kOk;
}

int cmd_multi(const Settings& s) { return cmd_multi_impl(s, make_config(s), false); }

int cmd_oracle(const Settings& s) {
  rco::BudgetProblem problem;
  rco::Json source;
  if (!s.problem.empty()) {
    source = rco::read_json_file(s.problem);
    problem = rco::problem_from_json(source);
    rco::validate_problem(problem);
  } else {
    problem = rco::generate(make_spec(s)).problem;
  }
  const rco::DpSolution opt = rco::solve_oracle(problem);
  const double cost = rco::discrete_cost(opt.assignment, problem);
  rco::Json j = {{"value", opt.score},
                 {"cost", cost},
                 {"integer_cost", opt.integer_cost},
                 {"budget", problem.budget},
                 {"assignment", opt.assignment.choices}};
  if (source.contains("family")) j["family"] = source["family"];
  if (source.contains("seed")) j["seed"] = source["seed"];
  const std::string path = s.out.empty() ? "oracle.json" : s.out;
  rco::write_json_file(path, j);
  std::printf("value %s\ncost %s (budget %s)\nassignment", rco::format_double(opt.score).c_str(),
              rco::format_double(cost).c_str(), rco::format_double(problem.budget).c_str());
  for (int c : opt.assignment.choices) std::printf(" %d", c);
  std::printf("\nwrote %s\n", path.c_str());
  return kOk;
}

void add_run_flags(Options& o, Settings& s) {
  o.add("method", &s.method, "manifold | manifold-slack | lagrangian | augmented | all")
      .add("steps", &s.steps, "optimizer steps (default 5000)")
      .add("lr", &s.lr, "Adam learning rate (default 0.01)")
      .add("gumbel_samples", &s.gumbel_samples, "Gumbel samples per STE gradient")
      .add("tau0", &s.tau0, "initial temperature")
      .add("tau_min", &s.tau_min, "final temperature")
      .add("mode", &s.mode, "equality | slack | multi")
      .add("grad", &s.grad, "relaxed | ste")
      .add("retraction_tol", &s.retraction_tol, "retraction tolerance on |C - B|")
      .add("bracket", &s.bracket, "initial shift bracket half-width (range is twice this)")
      .add("extraction", &s.extraction, "greedy | dp")
      .add("jobs", &s.jobs, "worker threads")
      .add_lambda();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained discrete assignment on the softmax budget manifold"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("config", config_path, "JSON file with default settings");

  Settings s;
  std::vector<Options> registries;
  registries.reserve(5);

  CLI::App* scenario = app.add_subcommand("scenario", "scenario utilities");
  scenario->require_subcommand(1);
  CLI::App* gen = scenario->add_subcommand("gen", "generate a scenario problem JSON");
  registries.emplace_back(gen, &s);
  registries.back().add("family", &s.family, "scenario family").add("seed", &s.seed, "instance seed")
      .add("out", &s.out, "output file");

  CLI::App* solve = app.add_subcommand("solve", "run one method on one instance");
  registries.emplace_back(solve, &s);
  registries.back().add("family", &s.family, "scenario family").add("seed", &s.seed, "instance seed")
      .add("problem", &s.problem, "problem JSON instead of a generated family")
      .add("out", &s.out, "output directory");
  add_run_flags(registries.back(), s);

  CLI::App* bench = app.add_subcommand("bench", "methods x instances sweep on one family");
  registries.emplace_back(bench, &s);
  registries.back().add("family", &s.family, "scenario family").add("seed", &s.seed, "first instance seed")
      .add("instances", &s.instances, "number of instances (default 3)")
      .add("out", &s.out, "output directory");
  add_run_flags(registries.back(), s);

  CLI::App* multi = app.add_subcommand("multi", "q = 16 constraint comparison");
  registries.emplace_back(multi, &s);
  registries.back().add("seed", &s.seed, "instance seed").add("out", &s.out, "output directory");
  add_run_flags(registries.back(), s);

  CLI::App* oracle = app.add_subcommand("oracle", "exact DP optimum of a problem");
  registries.emplace_back(oracle, &s);
  oracle->add_option("problem_file", s.problem, "problem JSON");
  registries.back().add("family", &s.family, "scenario family (when no file is given)")
      .add("seed", &s.seed, "instance seed").add("out", &s.out, "output JSON (default oracle.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    // The q = 16 comparison defaults to 2000 steps; a config file may still override.
    if (multi->parsed() && multi->get_option("--steps")->count() == 0) s.steps = 2000;
    if (!config_path.empty()) {
      const rco::Json config = rco::read_json_file(config_path);
      if (!config.is_object()) throw rco::Error(rco::ErrorCode::kConfigError, "config must be a JSON object");
      for (const auto& r : registries) {
        if (r.app()->parsed()) r.apply(config);
      }
    }
    if (gen->parsed()) return cmd_scenario_gen(s);
    if (solve->parsed()) return cmd_solve(s);
    if (bench->parsed()) return cmd_bench(s);
    if (multi->parsed()) return cmd_multi(s);
    if (oracle->parsed()) return cmd_oracle(s);
  } catch (const rco::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSolver;
  }
  return kConfig;
}
