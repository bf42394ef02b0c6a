// Acceptance runner: one PASS/FAIL line per criterion, exit code 1 if any fails.
//
//   acceptance [--only N[,N...]] [--policies DIR] [--scratch DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "npc/ald.hpp"
#include "npc/cli.hpp"
#include "npc/errors.hpp"
#include "npc/experiment.hpp"
#include "npc/gh.hpp"
#include "npc/gnc.hpp"
#include "npc/hc.hpp"
#include "npc/rl.hpp"

using namespace npc;
using linalg::Complex;
using poly::CVector;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

fs::path g_policy_dir = NPC_POLICY_DIR;
fs::path g_scratch = fs::temp_directory_path() / "npc_acceptance";

// ------------------------------------------------------------------ 1

Outcome classic_totals() {
  Outcome o;
  {
    SeededRng rng(42);
    const auto fn = gh::BenchmarkFunction::himmelblau();
    gh::GhProblem p(fn, gh::default_config(fn), {rng.uniform(-4, 4), rng.uniform(-4, 4)});
    auto c = classic_controller(ProblemKind::kGh);
    const auto t = solve(p, *c, default_limits(ProblemKind::kGh), rng);
    o.check(t.total_corrector_iters == 501, "GH Himmelblau trace total " + std::to_string(t.total_corrector_iters) + " == 501");
  }
  {
    const auto d = ald::make_target({ald::TargetKind::kGmm, 10}, 5);
    SeededRng rng(17);
    auto cfg = ald::default_config(d);
    ald::AldProblem p(d, cfg, ald::sample_source(d, cfg.n_particles, rng));
    auto c = classic_controller(ProblemKind::kAld);
    const auto t = solve(p, *c, default_limits(ProblemKind::kAld), rng);
    o.check(t.total_corrector_iters == 410, "ALD gmm10 trace total " + std::to_string(t.total_corrector_iters) + " == 410");
  }
  for (ProblemKind kind : {ProblemKind::kGh, ProblemKind::kAld}) {
    const int want = kind == ProblemKind::kGh ? 501 : 410;
    const auto rs = exp::run_trials(exp::default_task(kind), exp::classic_factory(kind), 0, 10);
    const bool all = std::all_of(rs.begin(), rs.end(), [&](const auto& r) { return r.iters == want; });
    o.check(all, std::string(to_string(kind)) + " training family: 10/10 trials total " + std::to_string(want));
  }
  return o;
}

// ------------------------------------------------------------------ 2

Outcome gh_quality() {
  Outcome o;
  const std::pair<const char*, double> cases[] = {{"himmelblau", 1e-2}, {"rastrigin", 1e-2}, {"ackley", 0.15}};
  for (const auto& [name, bound] : cases) {
    exp::Task task = exp::default_task(ProblemKind::kGh);
    task.instance = name;
    const auto rs = exp::run_trials(task, exp::classic_factory(ProblemKind::kGh), 0, 50);
    const auto a = exp::aggregate(rs, 1);
    o.check(a.ok == 50 && a.metrics[0] <= bound,
            std::string(name) + fmt(": mean f = %.3g over 50 trials (bound %g), ", a.metrics[0], bound) +
                std::to_string(a.ok) + "/50 solved");
  }
  return o;
}

// ------------------------------------------------------------------ 3

double max_diff(const CVector& a, const CVector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

Outcome hc_correctness() {
  Outcome o;
  const auto make = [] { return classic_controller(ProblemKind::kHc); };
  const auto limits = default_limits(ProblemKind::kHc);

  for (const char* name : {"katsura", "cyclic"}) {
    const auto target = poly::benchmark_system(name, 5);
    const auto start = poly::total_degree_start(target, 0);
    SeededRng g(1);
    const Complex gamma = hc::random_gamma(g);
    const auto res = hc::solve_all(target, start, gamma, make, limits, 7);
    hc::Homotopy h{std::make_shared<const hc::PolynomialSystem>(start.system),
                   std::make_shared<const hc::PolynomialSystem>(target), gamma};
    int certified = 0, diverged = 0;
    for (const auto& p : res.paths) {
      if (p.success) {
        const double r = linalg::norm_inf(std::span<const Complex>(target.evaluate(p.root)));
        certified += r <= 1e-8 ? 1 : 0;
      } else {
        diverged += 1;
      }
    }
    const int expected_finite = std::string(name) == "katsura" ? 32 : 70;
    o.check(certified == res.successes && static_cast<int>(res.distinct_roots.size()) == expected_finite &&
                res.successes == expected_finite,
            std::string(name) + "5: " + std::to_string(certified) + " of " + std::to_string(res.paths.size()) +
                " paths certified (residual <= 1e-8), " + std::to_string(res.distinct_roots.size()) +
                " distinct roots, " + std::to_string(diverged) + " paths to infinity");
    o.check(certified + diverged == static_cast<int>(res.paths.size()),
            std::string(name) + "5: every path either certified or diverging");

    // Newton at t = 1 from a perturbed root: the error exponent approaches 2.
    double worst_order = 1e300;
    int measured = 0;
    for (std::size_t k = 0; k < std::min<std::size_t>(res.distinct_roots.size(), 8); ++k) {
      CVector root = res.distinct_roots[k];
      for (int it = 0; it < 20; ++it) root = hc::newton_correct_once(h, hc::PathState{root, 1.0, 0.0}).state.x;
      CVector x = root;
      SeededRng pr(k);
      for (auto& v : x) v += Complex(pr.normal(), pr.normal()) * 1e-3;
      std::vector<double> err;
      for (int it = 0; it < 8; ++it) {
        err.push_back(max_diff(x, root));
        x = hc::newton_correct_once(h, hc::PathState{x, 1.0, 0.0}).state.x;
      }
      for (std::size_t i = 1; i + 1 < err.size(); ++i)
        if (err[i - 1] < 1e-2 && err[i] < 0.1 * err[i - 1] && err[i + 1] > 1e-11)
        {
          worst_order = std::min(worst_order, std::log(err[i + 1] / err[i]) / std::log(err[i] / err[i - 1]));
          ++measured;
        }
    }
    o.check(measured > 0 && worst_order >= 1.8,
            std::string(name) + fmt("5: observed Newton convergence order %.2f over %g steps (need >= 1.8)", worst_order, measured));

    SeededRng g2(2);
    const auto res2 = hc::solve_all(target, start, hc::random_gamma(g2), make, limits, 8);
    double worst = 0.0;
    for (const auto& r : res.distinct_roots) {
      double best = 1e300;
      for (const auto& q : res2.distinct_roots) best = std::min(best, max_diff(r, q));
      worst = std::max(worst, best);
    }
    o.check(res2.distinct_roots.size() == res.distinct_roots.size() && worst <= 1e-6,
            std::string(name) + fmt("5: root set unchanged under a second gamma (max distance %.2g)", worst));
  }
  return o;
}

// ------------------------------------------------------------------ 4

Outcome gnc_robustness() {
  Outcome o;
  const auto rs = exp::run_trials(exp::default_task(ProblemKind::kGnc), exp::classic_factory(ProblemKind::kGnc), 2000, 50);
  int ok = 0;
  double worst_outlier = 0.0;
  for (const auto& r : rs) {
    if (!r.success) continue;
    ++ok;
    worst_outlier = std::max(worst_outlier, r.max_outlier_weight);
  }
  o.check(ok >= 48, std::to_string(ok) + "/50 trials with rotation error < 5 deg (need >= 95%)");
  o.check(worst_outlier < 0.1, fmt("largest final outlier weight %.3g < 0.1 (successful trials)", worst_outlier));
  return o;
}

// ------------------------------------------------------------------ 5

constexpr std::uint64_t kHeldOutSeed = 777001;

Outcome policy_efficiency() {
  Outcome o;
  for (ProblemKind kind : {ProblemKind::kGh, ProblemKind::kGnc, ProblemKind::kHc, ProblemKind::kAld}) {
    const std::string k = to_string(kind);
    const fs::path path = g_policy_dir / ("policy_" + k + ".json");
    if (!fs::exists(path)) {
      o.check(false, k + ": no trained policy at " + path.string());
      continue;
    }
    auto model = std::make_shared<const rl::PolicyModel>(rl::load_policy(path.string()));
    const exp::Task task = exp::default_task(kind);
    const std::size_t nm = exp::metric_names(kind).size();
    const auto cr = exp::run_trials(task, exp::classic_factory(kind), kHeldOutSeed, 50);
    const auto pr = exp::run_trials(task, exp::policy_factory(model, kind), kHeldOutSeed, 50);
    const exp::Aggregate c = exp::aggregate(cr, nm), p = exp::aggregate(pr, nm);
    double ci = 0.0, pi = 0.0;
    for (const auto& r : cr) ci += r.iters;
    for (const auto& r : pr) pi += r.iters;
    const double ratio = pi / ci;
    o.check(ratio <= 0.6, k + fmt(": iteration ratio %.3f (classic %.1f, policy %.1f per trial; need <= 0.6)", ratio,
                                  ci / 50.0, pi / 50.0));
    switch (kind) {
      case ProblemKind::kGh: {
        const double d = std::abs(p.metrics[0] - c.metrics[0]);
        o.check(d <= 0.1 && p.ok == 50, k + fmt(": |delta mean f| = %.3g (classic %.3g; need <= 0.1)", d, c.metrics[0]));
        break;
      }
      case ProblemKind::kGnc: {
        double lc = 0.0, lp = 0.0;
        for (const auto& r : cr) lc += r.metrics.empty() ? 0.0 : r.metrics[0];
        for (const auto& r : pr) lp += r.metrics.empty() ? 0.0 : r.metrics[0];
        const double d = std::abs(lp - lc) / 50.0;
        o.check(d <= 0.1, k + fmt(": |delta mean log10 E_R| = %.3g (need <= 0.1)", d));
        break;
      }
      case ProblemKind::kHc:
        o.check(p.ok == 50 && p.metrics[0] == 1.0,
                k + ": policy tracks every path in " + std::to_string(p.ok) + "/50 instances (classic " +
                    std::to_string(c.ok) + "/50)");
        break;
      case ProblemKind::kAld: {
        const double rel = std::abs(p.metrics[1] - c.metrics[1]) / c.metrics[1];
        o.check(rel <= 0.2 && p.ok == 50,
                k + fmt(": KSD %.4g vs classic %.4g (relative change %.3f; need <= 0.2)", p.metrics[1], c.metrics[1], rel));
        break;
      }
    }
  }
  return o;
}

// ------------------------------------------------------------------ 6

double golden_min(const std::function<double(double)>& f, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  for (int it = 0; it < 300; ++it) {
    if (f(c) < f(d)) b = d;
    else a = c;
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return 0.5 * (a + b);
}

double naive_ksd(const ald::ParticleSet& x, double h) {
  const std::size_t n = x.rows(), d = x.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double r2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) r2 += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      const double k = std::exp(-r2 / (2 * h * h));
      for (std::size_t c = 0; c < d; ++c) {
        // unit Gaussian score s(x) = -x
        const double sx = -x(i, c), sy = -x(j, c);
        const double diff = x(i, c) - x(j, c);
        const double dkdx = -diff / (h * h) * k, dkdy = diff / (h * h) * k;
        const double d2 = k / (h * h) - diff * diff / (h * h * h * h) * k;
        total += sx * sy * k + sx * dkdy + sy * dkdx + d2;
      }
    }
  return total / static_cast<double>(n * n);
}

Outcome oracles() {
  Outcome o;
  {
    double worst = 0.0;
    for (double r : {0.0, 0.01, 0.3, 1.0, 2.5, 10.0})
      for (double u : {1e-3, 0.1, 0.5, 1.0})
        for (double c : {0.03, 0.5, 1.0, 3.0}) {
          const double gm = c * c * r * r / (c * c + u * r * r);
          auto phi = [&](double w) {
            const double s = std::sqrt(w) - 1.0;
            return w * r * r + (1.0 / u) * c * c * s * s;
          };
          gnc::RegistrationInstance inst;
          inst.source_points = {{0.0, 0.0, 0.0}};
          inst.target_points = {{r, 0.0, 0.0}};
          inst.inlier_mask = {true};
          inst.c_bar = c;
          const double w = gnc::update_weights(inst, {}, u)[0];
          worst = std::max({worst, std::abs(phi(w) - gm), std::abs(phi(golden_min(phi, 1e-12, 1.0)) - gm)});
        }
    o.check(worst <= 1e-9, fmt("Black-Rangarajan duality on a 6x4x4 grid: max gap %.2g (<= 1e-9)", worst));
  }
  {
    const auto quad = [](std::span<const double> x) {
      double s = 0.0;
      for (double v : x) s += v * v;
      return s;
    };
    const std::vector<double> x{1.0, -0.5};
    double worst = 0.0;
    for (double b : {0.1, 0.5, 1.0}) {
      SeededRng rng(static_cast<std::uint64_t>(b * 100) + 1);
      const auto g = gh::zo_gradient(quad, x, b, 1000000, rng);
      worst = std::max({worst, std::abs(g[0] - 2.0) / 2.0, std::abs(g[1] + 1.0) / 2.0});
    }
    o.check(worst <= 0.02, fmt("zeroth-order gradient on a quadratic, M = 1e6: max relative error %.3g (<= 2%%)", worst));
  }
  {
    hc::TaylorData d{{Complex(1.0)}, {Complex(-1.0)}, {Complex(1.0)}, {Complex(-1.0)}};
    double worst = 0.0;
    for (double dt : {0.01, 0.2, 0.7, 3.0, 50.0})
      worst = std::max(worst, std::abs(hc::pade_predict(d, dt).x[0] - 1.0 / (1.0 + dt)));
    o.check(worst <= 1e-12, fmt("Pade step on the geometric-series path: max error %.2g (<= 1e-12)", worst));
  }
  {
    const auto target = poly::katsura(3);
    const auto start = poly::total_degree_start(target, 0);
    SeededRng rng(21);
    hc::Homotopy h{std::make_shared<const hc::PolynomialSystem>(start.system),
                   std::make_shared<const hc::PolynomialSystem>(target), hc::random_gamma(rng)};
    const auto refine = [&](CVector x, double t) {
      for (int k = 0; k < 50; ++k) {
        const auto s = hc::newton_correct_once(h, hc::PathState{x, t, 0.0});
        x = s.state.x;
        if (s.step_norm < 1e-15) break;
      }
      return x;
    };
    double worst = 0.0;
    for (std::size_t path = 0; path < start.roots.size(); ++path) {
      const double t0 = 0.4, step = 1e-5;
      CVector x0 = start.roots[path];
      for (int k = 1; k <= 400; ++k) x0 = refine(x0, t0 * k / 400);
      const CVector xp = refine(x0, t0 + step), xm = refine(x0, t0 - step);
      const auto d = hc::taylor_coefficients(h, x0, t0);
      const double scale = linalg::norm_inf(std::span<const Complex>(d.c1));
      for (std::size_t i = 0; i < x0.size(); ++i)
        worst = std::max(worst, std::abs((xp[i] - xm[i]) / (2.0 * step) - d.c1[i]) / scale);
    }
    o.check(worst <= 1e-4, fmt("Taylor c1 vs central difference on katsura(3) paths: %.2g (<= 1e-4)", worst));
  }
  {
    SeededRng rng(8);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      ald::ParticleSet x(4, 2), y(4, 2);
      for (double& v : x.data()) v = rng.normal();
      for (double& v : y.data()) v = 2.0 * rng.normal();
      std::vector<std::size_t> perm{0, 1, 2, 3};
      double best = 1e300;
      do {
        double c = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
          for (std::size_t k = 0; k < 2; ++k) c += (x(i, k) - y(perm[i], k)) * (x(i, k) - y(perm[i], k));
        best = std::min(best, c);
      } while (std::next_permutation(perm.begin(), perm.end()));
      worst = std::max(worst, std::abs(ald::w2(x, y) - std::sqrt(best / 4.0)));
    }
    o.check(worst <= 1e-12, fmt("W2 vs brute force over all 24 matchings at N = 4: %.2g (<= 1e-12)", worst));
  }
  {
    ald::TargetDistribution gauss;
    gauss.kind = ald::TargetKind::kGmm;
    gauss.dim = 2;
    gauss.means = {std::vector<double>{0.0, 0.0}};
    SeededRng rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      ald::ParticleSet p(6, 2);
      for (double& v : p.data()) v = rng.normal() + 0.3 * trial;
      const double h = ald::median_heuristic(p);
      worst = std::max(worst, std::abs(ald::ksd(p, gauss) - naive_ksd(p, h)));
      worst = std::max(worst, std::abs(ald::ksd(p, gauss, 0.7) - naive_ksd(p, 0.7)));
    }
    o.check(worst <= 1e-10, fmt("KSD vs pairwise Stein-kernel sum: %.2g (<= 1e-10)", worst));
  }
  {
    rl::PolicyModel m = rl::PolicyModel::create(ProblemKind::kHc, 21);
    SeededRng rng(22);
    std::vector<double> p = m.get_params();
    for (double& v : p) v += 0.3 * rng.normal();
    p[m.policy.n_params()] = -0.3;
    p[m.policy.n_params() + 1] = 0.4;
    m.set_params(p);
    rl::PpoConfig cfg;
    cfg.ent_coef = 0.01;
    std::vector<rl::PpoSample> batch;
    const double shifts[6] = {0.05, -0.1, 0.5, -0.6, 0.0, 0.02};
    for (int k = 0; k < 6; ++k) {
      rl::PpoSample s;
      for (double& v : s.obs) v = rng.normal();
      for (double& v : s.raw) v = rng.normal();
      const auto out = rl::forward_normalized(m, s.obs);
      s.old_log_prob = rl::squashed_log_prob(out.mean, out.log_std, s.raw, m.bounds) + shifts[k];
      s.advantage = k % 2 == 0 ? 1.0 + k : -0.5 - k;
      s.ret = rng.normal();
      batch.push_back(s);
    }
    std::vector<double> grad;
    rl::ppo_loss(m, batch, cfg, &grad);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::vector<double> q = p;
      q[i] = p[i] + h;
      m.set_params(q);
      const double up = rl::ppo_loss(m, batch, cfg, nullptr).total;
      q[i] = p[i] - h;
      m.set_params(q);
      const double down = rl::ppo_loss(m, batch, cfg, nullptr).total;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
    }
    o.check(worst <= 1e-4, fmt("PPO loss gradient vs central differences (%g params): max relative %.2g (<= 1e-4)",
                               static_cast<double>(p.size()), worst));
  }
  return o;
}

// ------------------------------------------------------------------ 7

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string drop_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string out, line, header;
  std::getline(in, header);
  std::vector<std::string> cols;
  {
    std::stringstream hs(header);
    for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
  }
  const auto t = std::find(cols.begin(), cols.end(), "time_ms");
  const std::ptrdiff_t skip = t == cols.end() ? -1 : t - cols.begin();
  for (std::istringstream all(csv); std::getline(all, line);) {
    std::stringstream ls(line);
    std::ptrdiff_t i = 0;
    for (std::string c; std::getline(ls, c, ','); ++i)
      if (i != skip) out += c + ",";
    out += "\n";
  }
  return out;
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return cli::run(args, out, err);
}

/// Every file in `a` equals its namesake in `b`; CSV timing columns ignored.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  for (const auto& e : fs::directory_iterator(a)) {
    const fs::path other = b / e.path().filename();
    if (!fs::exists(other)) {
      why = e.path().filename().string() + " missing in rerun";
      return false;
    }
    std::string x = slurp(e.path()), y = slurp(other);
    if (e.path().extension() == ".csv") {
      x = drop_timing(x);
      y = drop_timing(y);
    } else if (e.path().filename().string().rfind("compare_", 0) == 0) {
      // policy paths name the run directory
      auto jx = nlohmann::json::parse(x), jy = nlohmann::json::parse(y);
      for (auto* j : {&jx, &jy})
        for (const char* side : {"a", "b"}) (*j)[side].erase("policy");
      x = jx.dump();
      y = jy.dump();
    }
    if (x != y) {
      why = e.path().filename().string() + " differs";
      return false;
    }
  }
  return true;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = g_scratch / "determinism";
  fs::remove_all(root);
  const std::string small_train =
      R"({"train": {"steps": 512, "n_steps": 128, "batch_size": 32, "n_epochs": 2}, "trials": 4})";
  for (const char* kind : {"gh", "gnc", "hc", "ald"}) {
    fs::create_directories(root);
    const fs::path cfg = root / (std::string(kind) + ".json");
    std::ofstream(cfg) << small_train.substr(0, small_train.size() - 1) << R"(, "problem": ")" << kind << "\"}";
    bool ok = true;
    std::string why;
    for (int rep = 0; rep < 2 && ok; ++rep) {
      const std::string dir = (root / kind / std::to_string(rep)).string();
      const std::string threads = rep == 0 ? "1" : "2";
      const std::vector<std::vector<std::string>> cmds = {
          {"bench", "--config", cfg.string(), "--seed", "3", "--threads", threads, "--out", dir},
          {"solve", "--config", cfg.string(), "--seed", "3", "--trial", "1", "--out", dir},
          {"train", "--config", cfg.string(), "--seed", "3", "--threads", threads, "--out", dir},
      };
      for (const auto& c : cmds) {
        const int rc = cli(c);
        if (rc == cli::kExitConfig || rc == cli::kExitDiverged) {
          ok = false;
          why = c[0] + " exited " + std::to_string(rc);
        }
      }
      if (ok && cli({"bench", "--config", cfg.string(), "--seed", "3", "--policy",
                     (fs::path(dir) / ("policy_" + std::string(kind) + ".json")).string(), "--out", dir}) ==
                    cli::kExitConfig) {
        ok = false;
        why = "bench with the trained policy failed";
      }
      if (ok && cli({"compare", "--config", cfg.string(), "--seed", "3", "--policy",
                     (fs::path(dir) / ("policy_" + std::string(kind) + ".json")).string(), "--out", dir}) != 0) {
        ok = false;
        why = "compare failed";
      }
    }
    if (ok) ok = same_tree(root / kind / "0", root / kind / "1", why);
    o.check(ok, std::string(kind) + ": bench, solve, train, policy bench and compare reproduce on rerun (1 vs 2 threads)" +
                    (ok ? "" : ": " + why));
  }
  return o;
}

// ------------------------------------------------------------------ 8

Outcome ablation() {
  Outcome o;
  const fs::path dir = g_scratch / "ablation";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "gh.json";
  std::ofstream(cfg) << R"({"problem": "gh", "trials": 20, "train": {"steps": 4096, "n_steps": 512, "batch_size": 64, "n_epochs": 4}})";
  std::ostringstream out, err;
  const int rc = cli::run({"ablate", "--config", cfg.string(), "--seed", "1", "--out", dir.string()}, out, err);
  o.check(rc == 0, "npc ablate exit code " + std::to_string(rc));
  std::istringstream csv(slurp(dir / "ablation_gh.csv"));
  std::vector<std::string> rows;
  for (std::string l; std::getline(csv, l);) rows.push_back(l);
  o.check(rows.size() == 6 && rows[0].rfind("state,mean_iters,delta_iter", 0) == 0,
          "ablation_gh.csv has the full row and four masked rows");
  for (std::size_t i = 1; i < rows.size(); ++i) o.notes.push_back("     " + rows[i]);
  for (const char* f : {"level", "tolerance", "iters", "velocity"})
    o.check(fs::exists(dir / ("policy_gh_mask-" + std::string(f) + ".json")), std::string("--mask-state ") + f + " policy written");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string policies, scratch;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--policies", policies, "directory of trained policies");
  app.add_option("--scratch", scratch, "scratch directory");
  CLI11_PARSE(app, argc, argv);
  if (!policies.empty()) g_policy_dir = policies;
  if (!scratch.empty()) g_scratch = scratch;

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"classic iteration totals (GH 501, ALD 410)", classic_totals},
      {"GH solution quality on Himmelblau, Rastrigin, Ackley", gh_quality},
      {"HC path tracking on katsura(5) and cyclic(5)", hc_correctness},
      {"GNC robustness at 80% outliers", gnc_robustness},
      {"learned-policy efficiency on held-out instances", policy_efficiency},
      {"analytic oracle suite", oracles},
      {"determinism of CLI outputs", determinism},
      {"state ablation harness", ablation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::printf("[%s] criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
