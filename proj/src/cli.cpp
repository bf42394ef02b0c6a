#include "npc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "npc/errors.hpp"

namespace npc::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config key '" + where + it.key() + "'");
  }
}

template <typename T>
void take(const json& obj, const char* key, T& dst) {
  if (obj.contains(key)) dst = obj.at(key).get<T>();
}

std::string mask_suffix(const rl::StateMask& mask) {
  std::string s;
  for (int d = 0; d < rl::kStateDim; ++d)
    if (mask[static_cast<std::size_t>(d)]) s += std::string("_mask-") + rl::state_field_name(d);
  return s;
}

json mask_json(const rl::StateMask& mask) {
  json a = json::array();
  for (int d = 0; d < rl::kStateDim; ++d)
    if (mask[static_cast<std::size_t>(d)]) a.push_back(rl::state_field_name(d));
  return a;
}

int resolve_threads(const ExperimentConfig& cfg) { return cfg.threads > 0 ? cfg.threads : exp::worker_threads(); }

std::shared_ptr<const rl::PolicyModel> load_checked_policy(const std::string& path, ProblemKind kind) {
  if (!fs::exists(path)) throw ConfigError("policy file not found: " + path);
  auto model = std::make_shared<rl::PolicyModel>(rl::load_policy(path));
  if (model->kind != kind)
    throw ConfigError("policy " + path + " was trained for " + to_string(model->kind) + ", not " + to_string(kind));
  return model;
}

exp::ControllerFactory factory_for(const ExperimentConfig& cfg, std::string& method) {
  if (cfg.policy.empty()) {
    method = "classic";
    return exp::classic_factory(cfg.task.kind);
  }
  method = "npc";
  return exp::policy_factory(load_checked_policy(cfg.policy, cfg.task.kind), cfg.task.kind);
}

json aggregate_json(ProblemKind kind, const exp::Aggregate& a) {
  json m;
  const auto names = exp::metric_names(kind);
  for (std::size_t k = 0; k < names.size(); ++k) m[names[k]] = a.metrics[k];
  return {{"mean_iters", a.iters}, {"metrics", m}, {"ok", a.ok}, {"failed", a.failed}};
}

fs::path prepare_out(const ExperimentConfig& cfg) {
  fs::path out(cfg.out);
  fs::create_directories(out);
  return out;
}

// ------------------------------------------------------------------ commands

struct TrainOutcome {
  rl::TrainResult result;
  fs::path policy_path;
};

TrainOutcome train_policy(const ExperimentConfig& cfg, const std::string& resume, std::ostream& out) {
  const fs::path dir = prepare_out(cfg);
  const std::string tag = std::string(to_string(cfg.task.kind)) + mask_suffix(cfg.mask);
  rl::TrainConfig tc = cfg.train;
  tc.reward = cfg.reward;
  tc.threads = resolve_threads(cfg);
  tc.checkpoint_path = (dir / ("checkpoint_" + tag + ".json")).string();

  const rl::InstanceSampler sampler = exp::training_sampler(cfg.task);
  rl::PolicyModel init = rl::PolicyModel::create(cfg.task.kind, cfg.seed);
  init.mask = cfg.mask;
  const json meta = {{"lambda1", cfg.reward.lambda1},
                     {"lambda2", cfg.reward.lambda2},
                     {"t_max", cfg.reward.t_max},
                     {"seed", cfg.seed},
                     {"instance", cfg.task.instance},
                     {"env_steps", cfg.train.total_env_steps},
                     {"mask_state", mask_json(cfg.mask)}};
  init.metadata_json = meta.dump();

  TrainOutcome o;
  if (resume.empty()) {
    o.result = rl::train(sampler, init, tc, cfg.seed);
  } else {
    rl::TrainState state = rl::load_train_state(resume);
    if (state.model.kind != cfg.task.kind) throw ConfigError("checkpoint " + resume + " belongs to another problem kind");
    o.result = rl::resume_training(sampler, std::move(state), tc, cfg.seed);
  }
  rl::save_train_state(o.result.state, tc.checkpoint_path);
  rl::write_curve_csv(o.result.state.curve, (dir / ("curve_" + tag + ".csv")).string());
  o.policy_path = dir / ("policy_" + tag + ".json");
  rl::PolicyModel best = o.result.state.best;
  best.metadata_json = init.metadata_json;
  rl::save_policy(best, o.policy_path.string());
  out << "trained " << tag << ": " << o.result.state.env_steps << " env steps, " << o.result.state.updates
      << " updates, best mean reward " << o.result.state.best_reward << "\n"
      << "policy " << o.policy_path.string() << "\n";
  return o;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& resume, std::ostream& out, std::ostream& err) {
  const TrainOutcome o = train_policy(cfg, resume, out);
  if (o.result.diverged) {
    err << "training diverged: " << o.result.diagnostic << "\ncheckpoint "
        << (fs::path(cfg.out) / ("checkpoint_" + std::string(to_string(cfg.task.kind)) + mask_suffix(cfg.mask) + ".json")).string()
        << "\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_solve(const ExperimentConfig& cfg, int trial, std::ostream& out) {
  std::string method;
  const exp::ControllerFactory factory = factory_for(cfg, method);
  const exp::TrialResult r = exp::run_trial(cfg.task, factory, cfg.seed, trial);
  const fs::path dir = prepare_out(cfg);
  std::ostringstream csv;
  csv << "path,level,iters,attained,velocity,target_metric\n";
  char line[256];
  for (std::size_t p = 0; p < r.traces.size(); ++p)
    for (const auto& rec : r.traces[p].records) {
      std::snprintf(line, sizeof line, "%zu,%.10g,%d,%.10g,%.10g,%.10g\n", p, rec.level, rec.iters, rec.attained,
                    rec.velocity, rec.target_metric);
      csv << line;
    }
  const fs::path trace_path = dir / ("trace_" + std::string(to_string(cfg.task.kind)) + "_" + method + ".csv");
  write_text(trace_path, csv.str());
  json summary = {{"problem", to_string(cfg.task.kind)}, {"instance", cfg.task.instance}, {"method", method},
                  {"trial", trial},  {"success", r.success},  {"iters", r.iters},
                  {"trace", trace_path.string()}};
  const auto names = exp::metric_names(cfg.task.kind);
  for (std::size_t k = 0; k < names.size() && k < r.metrics.size(); ++k) summary["metrics"][names[k]] = r.metrics[k];
  if (!r.diagnostic.empty()) summary["diagnostic"] = r.diagnostic;
  out << summary.dump() << "\n";
  return r.success ? kExitOk : kExitTrialsFailed;
}

int cmd_bench(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  std::string method;
  const exp::ControllerFactory factory = factory_for(cfg, method);
  const auto results = exp::run_trials(cfg.task, factory, cfg.seed, cfg.trials, resolve_threads(cfg));
  const fs::path dir = prepare_out(cfg);
  std::ostringstream csv;
  exp::write_bench_csv(csv, cfg.task.kind, method, results);
  const fs::path path = dir / ("bench_" + std::string(to_string(cfg.task.kind)) + "_" + method + ".csv");
  write_text(path, csv.str());
  const exp::Aggregate a = exp::aggregate(results, exp::metric_names(cfg.task.kind).size());
  out << aggregate_json(cfg.task.kind, a).dump() << "\n" << "results " << path.string() << "\n";
  for (const auto& r : results)
    if (!r.success) err << "trial " << r.trial << " failed: " << r.diagnostic << "\n";
  return a.failed * 10 > cfg.trials ? kExitTrialsFailed : kExitOk;
}

json compare_json(const ExperimentConfig& a_cfg, const ExperimentConfig& b_cfg, int threads) {
  std::string method_a, method_b;
  const auto fa = factory_for(a_cfg, method_a);
  const auto fb = factory_for(b_cfg, method_b);
  const ProblemKind kind = a_cfg.task.kind;
  const std::size_t nm = exp::metric_names(kind).size();
  const exp::Aggregate a = exp::aggregate(exp::run_trials(a_cfg.task, fa, a_cfg.seed, a_cfg.trials, threads), nm);
  const exp::Aggregate b = exp::aggregate(exp::run_trials(b_cfg.task, fb, a_cfg.seed, a_cfg.trials, threads), nm);
  json j = {{"problem", to_string(kind)}, {"instance", a_cfg.task.instance}, {"seed", a_cfg.seed},
            {"trials", a_cfg.trials}};
  j["a"] = aggregate_json(kind, a);
  j["a"]["method"] = method_a;
  if (!a_cfg.policy.empty()) j["a"]["policy"] = a_cfg.policy;
  j["b"] = aggregate_json(kind, b);
  j["b"]["method"] = method_b;
  if (!b_cfg.policy.empty()) j["b"]["policy"] = b_cfg.policy;
  j["iteration_ratio"] = a.iters / b.iters;
  j["delta_iters"] = a.iters - b.iters;
  const auto names = exp::metric_names(kind);
  for (std::size_t k = 0; k < nm; ++k) j["deltas"][names[k]] = a.metrics[k] - b.metrics[k];
  return j;
}

int cmd_compare(const ExperimentConfig& cfg, const ExperimentConfig& against, bool sweep, std::ostream& out) {
  if (against.task.kind != cfg.task.kind || against.task.instance != cfg.task.instance)
    throw ConfigError("compare needs both configs on the same problem and instance");
  const int threads = resolve_threads(cfg);
  json j = compare_json(cfg, against, threads);
  if (sweep) {
    const auto levels = cfg.sweep_levels.empty() ? exp::sweep_levels(cfg.task.kind) : cfg.sweep_levels;
    const auto budgets = cfg.sweep_budgets.empty() ? exp::sweep_budgets(cfg.task.kind) : cfg.sweep_budgets;
    json pts = json::array();
    for (const auto& p : exp::run_sweep(cfg.task, levels, budgets, cfg.seed, cfg.trials, threads)) {
      json e = aggregate_json(cfg.task.kind, p.result);
      e["levels"] = p.levels;
      e["budget"] = p.budget;
      pts.push_back(e);
    }
    j["sweep"] = pts;
  }
  const fs::path dir = prepare_out(cfg);
  const fs::path path = dir / ("compare_" + std::string(to_string(cfg.task.kind)) + ".json");
  write_text(path, j.dump(2) + "\n");
  out << "iteration_ratio " << j["iteration_ratio"].dump() << "\nresults " << path.string() << "\n";
  return kExitOk;
}

int cmd_ablate(const ExperimentConfig& cfg, std::uint64_t eval_seed, std::ostream& out, std::ostream& err) {
  const ProblemKind kind = cfg.task.kind;
  const std::size_t nm = exp::metric_names(kind).size();
  const int threads = resolve_threads(cfg);
  struct Row {
    std::string state;
    exp::Aggregate agg;
  };
  std::vector<Row> rows;
  for (int d = -1; d < rl::kStateDim; ++d) {
    ExperimentConfig c = cfg;
    c.mask = {};
    if (d >= 0) c.mask[static_cast<std::size_t>(d)] = true;
    std::ostringstream quiet;
    const TrainOutcome o = train_policy(c, "", quiet);
    if (o.result.diverged) {
      err << "training diverged: " << o.result.diagnostic << "\n";
      return kExitDiverged;
    }
    auto model = std::make_shared<const rl::PolicyModel>(rl::load_policy(o.policy_path.string()));
    const auto results = exp::run_trials(c.task, exp::policy_factory(model, kind), eval_seed, c.trials, threads);
    rows.push_back({d < 0 ? "full" : rl::state_field_name(d), exp::aggregate(results, nm)});
  }
  std::ostringstream csv;
  csv << "state,mean_iters,delta_iter";
  for (const auto& m : exp::metric_names(kind)) csv << "," << m;
  csv << ",ok\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    csv << (r.state == "full" ? "full" : "w/o " + r.state) << "," << num(r.agg.iters) << ","
        << num(r.agg.iters - rows.front().agg.iters);
    for (double m : r.agg.metrics) csv << "," << num(m);
    csv << "," << r.agg.ok << "\n";
  }
  const fs::path path = prepare_out(cfg) / ("ablation_" + std::string(to_string(kind)) + ".csv");
  write_text(path, csv.str());
  out << csv.str() << "results " << path.string() << "\n";
  return kExitOk;
}

}  // namespace

ExperimentConfig default_config(ProblemKind kind) {
  ExperimentConfig c;
  c.task = exp::default_task(kind);
  c.reward = rl::default_reward_config(kind);
  c.reward.t_max = c.task.limits.t_max;
  c.train.reward = c.reward;
  return c;
}

ExperimentConfig apply_config_json(const std::string& text, ExperimentConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    reject_unknown(j,
                   {"problem", "instance", "seed", "trials", "policy", "out", "threads", "mask_state", "gnc", "gh",
                    "limits", "reward", "train", "sweep"},
                   "");
    ExperimentConfig c = base;
    if (j.contains("problem")) {
      const ProblemKind kind = parse_problem_kind(j.at("problem").get<std::string>());
      if (kind != base.task.kind) c = default_config(kind);
      c.out = base.out;
    }
    take(j, "instance", c.task.instance);
    take(j, "seed", c.seed);
    take(j, "trials", c.trials);
    take(j, "policy", c.policy);
    take(j, "out", c.out);
    take(j, "threads", c.threads);
    if (j.contains("mask_state")) {
      const json& m = j.at("mask_state");
      c.mask = {};
      if (m.is_string()) {
        c.mask[static_cast<std::size_t>(rl::parse_state_field(m.get<std::string>()))] = true;
      } else {
        for (const auto& f : m) c.mask[static_cast<std::size_t>(rl::parse_state_field(f.get<std::string>()))] = true;
      }
    }
    if (j.contains("gnc")) {
      const json& g = j.at("gnc");
      reject_unknown(g, {"points", "outliers", "noise"}, "gnc.");
      take(g, "points", c.task.gnc_points);
      take(g, "outliers", c.task.gnc_outliers);
      take(g, "noise", c.task.gnc_noise);
    }
    if (j.contains("gh")) {
      reject_unknown(j.at("gh"), {"box"}, "gh.");
      take(j.at("gh"), "box", c.task.gh_box);
    }
    bool reward_tmax = false;
    if (j.contains("reward")) {
      const json& r = j.at("reward");
      reject_unknown(r, {"lambda1", "lambda2", "t_max"}, "reward.");
      take(r, "lambda1", c.reward.lambda1);
      take(r, "lambda2", c.reward.lambda2);
      reward_tmax = r.contains("t_max");
      take(r, "t_max", c.reward.t_max);
    }
    if (j.contains("limits")) {
      const json& l = j.at("limits");
      reject_unknown(l, {"t_max", "per_level_cap", "delta_min", "delta_max", "warmup_cap"}, "limits.");
      take(l, "t_max", c.task.limits.t_max);
      take(l, "per_level_cap", c.task.limits.per_level_cap);
      take(l, "delta_min", c.task.limits.delta_min);
      take(l, "delta_max", c.task.limits.delta_max);
      take(l, "warmup_cap", c.task.limits.warmup_cap);
      if (!reward_tmax) c.reward.t_max = c.task.limits.t_max;
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown(t,
                     {"steps", "n_steps", "batch_size", "n_epochs", "learning_rate", "gamma", "gae_lambda", "clip",
                      "vf_coef", "ent_coef", "max_grad_norm", "checkpoint_every"},
                     "train.");
      take(t, "steps", c.train.total_env_steps);
      take(t, "n_steps", c.train.ppo.n_steps);
      take(t, "batch_size", c.train.ppo.batch_size);
      take(t, "n_epochs", c.train.ppo.n_epochs);
      take(t, "learning_rate", c.train.ppo.learning_rate);
      take(t, "gamma", c.train.ppo.gamma);
      take(t, "gae_lambda", c.train.ppo.gae_lambda);
      take(t, "clip", c.train.ppo.clip);
      take(t, "vf_coef", c.train.ppo.vf_coef);
      take(t, "ent_coef", c.train.ppo.ent_coef);
      take(t, "max_grad_norm", c.train.ppo.max_grad_norm);
      take(t, "checkpoint_every", c.train.checkpoint_every);
    }
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      reject_unknown(s, {"levels", "budgets"}, "sweep.");
      take(s, "levels", c.sweep_levels);
      take(s, "budgets", c.sweep_budgets);
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  return apply_config_json(read_text(path), default_config(ProblemKind::kGh));
}

namespace {

void validate(const ExperimentConfig& c) {
  if (c.trials < 1) throw ConfigError("trials must be >= 1");
  if (c.train.total_env_steps < 1) throw ConfigError("train.steps must be >= 1");
  if (c.train.ppo.n_steps < 1 || c.train.ppo.batch_size < 1 || c.train.ppo.n_epochs < 1)
    throw ConfigError("train.n_steps, train.batch_size and train.n_epochs must be >= 1");
  if (c.task.limits.t_max < 1 || c.task.limits.per_level_cap < 1) throw ConfigError("limits must be >= 1");
  if (!(c.task.gnc_outliers >= 0.0 && c.task.gnc_outliers <= 0.99)) throw ConfigError("gnc.outliers must be in [0, 0.99]");
  if (c.task.gnc_points < 10) throw ConfigError("gnc.points must be >= 10");
  if (!(c.task.gh_box > 0.0)) throw ConfigError("gh.box must be positive");
}

struct Flags {
  std::string config, problem, policy, out, instance, resume, against, baseline_policy;
  std::vector<std::string> mask;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 0;
  int trials = 0, threads = 0, trial = 0;
  long steps = 0;
  double lambda1 = 0.0, lambda2 = 0.0;
  bool sweep = false, verbose = false;
};

bool given(const CLI::App& sub, const std::string& name) {
  const CLI::Option* opt = sub.get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

ExperimentConfig build_config(const CLI::App& sub, const Flags& f) {
  json file = json::object();
  if (!f.config.empty()) {
    try {
      file = json::parse(read_text(f.config));
    } catch (const json::exception& e) {
      throw ConfigError("config " + f.config + " is not valid JSON: " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config must be a JSON object");
  }
  if (given(sub, "--problem")) file["problem"] = f.problem;
  if (!file.contains("problem")) throw ConfigError("no problem kind given (use --problem or a config file)");
  ExperimentConfig c = apply_config_json(file.dump(), default_config(ProblemKind::kGh));
  if (given(sub, "--seed")) c.seed = f.seed;
  if (given(sub, "--policy")) c.policy = f.policy;
  if (given(sub, "--out")) c.out = f.out;
  if (given(sub, "--instance")) c.task.instance = f.instance;
  if (given(sub, "--trials")) c.trials = f.trials;
  if (given(sub, "--threads")) c.threads = f.threads;
  if (given(sub, "--mask-state")) {
    for (const auto& m : f.mask) c.mask[static_cast<std::size_t>(rl::parse_state_field(m))] = true;
  }
  if (given(sub, "--steps")) c.train.total_env_steps = f.steps;
  if (given(sub, "--lambda1")) c.reward.lambda1 = f.lambda1;
  if (given(sub, "--lambda2")) c.reward.lambda2 = f.lambda2;
  c.train.verbose = f.verbose;
  validate(c);
  return c;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned predictor-corrector schedules for homotopy solvers"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", f.config, "JSON config file");
    s->add_option("--seed", f.seed, "master seed");
    s->add_option("--problem", f.problem, "gnc, gh, hc or ald");
    s->add_option("--policy", f.policy, "policy JSON (default: classic schedule)");
    s->add_option("--mask-state", f.mask, "zero a state field: level, tolerance, iters, velocity");
    s->add_option("--out", f.out, "output directory");
    s->add_option("--instance,--trials-dist", f.instance, "instance family");
    s->add_option("--trials", f.trials, "number of trials");
    s->add_option("--threads", f.threads, "worker threads (default NPC_THREADS)");
  };
  CLI::App* train = app.add_subcommand("train", "train a policy with PPO");
  common(train);
  train->add_option("--steps", f.steps, "environment steps");
  train->add_option("--lambda1", f.lambda1, "accuracy reward scale");
  train->add_option("--lambda2", f.lambda2, "efficiency reward scale");
  train->add_option("--resume", f.resume, "resume from a training checkpoint");
  train->add_flag("--verbose", f.verbose, "print one line per update");
  CLI::App* solve = app.add_subcommand("solve", "solve one instance and write its trace");
  common(solve);
  solve->add_option("--trial", f.trial, "trial index under the master seed");
  CLI::App* bench = app.add_subcommand("bench", "run seeded trials and write a results CSV");
  common(bench);
  CLI::App* compare = app.add_subcommand("compare", "paired comparison of two controllers");
  common(compare);
  compare->add_option("--against", f.against, "config of the second controller (default: classic)");
  compare->add_option("--baseline-policy", f.baseline_policy, "policy of the second controller");
  compare->add_flag("--sweep", f.sweep, "also grid the classic controller (levels x budget)");
  CLI::App* ablate = app.add_subcommand("ablate", "train with each state field masked and report iteration deltas");
  common(ablate);
  ablate->add_option("--steps", f.steps, "environment steps per policy");
  ablate->add_option("--eval-seed", f.eval_seed, "master seed of the held-out evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(build_config(*train, f), f.resume, out, err);
    if (solve->parsed()) return cmd_solve(build_config(*solve, f), f.trial, out);
    if (bench->parsed()) return cmd_bench(build_config(*bench, f), out, err);
    if (compare->parsed()) {
      const ExperimentConfig a = build_config(*compare, f);
      ExperimentConfig b = a;
      if (!f.against.empty()) {
        b = load_config(f.against);
        b.seed = a.seed;
        b.trials = a.trials;
      } else {
        b.policy = f.baseline_policy;
      }
      return cmd_compare(a, b, f.sweep, out);
    }
    if (ablate->parsed()) {
      const ExperimentConfig c = build_config(*ablate, f);
      const std::uint64_t eval_seed = given(*ablate, "--eval-seed") ? f.eval_seed : SeededRng::derive(c.seed, 0xe7a1);
      return cmd_ablate(c, eval_seed, out, err);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const VersionError& e) {
    err << "policy error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"npc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace npc::cli
