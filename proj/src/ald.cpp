#include "npc/ald.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "npc/errors.hpp"

namespace npc::ald {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double gmm_energy(const TargetDistribution& dist, std::span<const double> x, std::span<double> grad) {
  const std::size_t k = dist.means.size();
  std::vector<double> logits(k);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < k; ++m) {
    logits[m] = -0.5 * sq_dist(x, dist.means[m]);
    mx = std::max(mx, logits[m]);
  }
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lse = mx + std::log(z);
  if (!grad.empty()) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t m = 0; m < k; ++m) {
      const double w = std::exp(logits[m] - lse);
      for (std::size_t i = 0; i < x.size(); ++i) grad[i] += w * (x[i] - dist.means[m][i]);
    }
  }
  const double d = static_cast<double>(x.size());
  return -lse + std::log(static_cast<double>(k)) + 0.5 * d * std::log(2.0 * std::numbers::pi);
}

double funnel_energy(const TargetDistribution& dist, std::span<const double> x, std::span<double> grad) {
  const double s2 = dist.funnel_sigma * dist.funnel_sigma;
  const double e = std::exp(-x[0]);
  const double lateral = static_cast<double>(x.size() - 1);
  double sq = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) sq += x[i] * x[i];
  if (!grad.empty()) {
    grad[0] = x[0] / s2 - 0.5 * e * sq + 0.5 * lateral;
    for (std::size_t i = 1; i < x.size(); ++i) grad[i] = e * x[i];
  }
  return x[0] * x[0] / (2.0 * s2) + 0.5 * e * sq + 0.5 * lateral * x[0];
}

double dw4_energy(const TargetDistribution& dist, std::span<const double> x, std::span<double> grad, bool* coincident) {
  constexpr int kParticles = 4;
  constexpr int kSpace = 2;
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  const double scale = 1.0 / (2.0 * dist.dw4_tau);
  double energy = 0.0;
  for (int i = 0; i < kParticles; ++i) {
    for (int j = i + 1; j < kParticles; ++j) {
      const double dx = x[kSpace * i] - x[kSpace * j];
      const double dy = x[kSpace * i + 1] - x[kSpace * j + 1];
      const double d = std::sqrt(dx * dx + dy * dy);
      const double r = d - dist.dw4_d0;
      energy += scale * (dist.dw4_a * r + dist.dw4_b * r * r + dist.dw4_c * r * r * r * r);
      if (grad.empty()) continue;
      if (d == 0.0) {
        if (coincident) *coincident = true;
        continue;
      }
      const double dphi = scale * (dist.dw4_a + 2.0 * dist.dw4_b * r + 4.0 * dist.dw4_c * r * r * r);
      const double gx = dphi * dx / d;
      const double gy = dphi * dy / d;
      grad[kSpace * i] += gx;
      grad[kSpace * i + 1] += gy;
      grad[kSpace * j] -= gx;
      grad[kSpace * j + 1] -= gy;
    }
  }
  return energy;
}

}  // namespace

std::string TargetDistribution::name() const {
  switch (kind) {
    case TargetKind::kGmm:
      return "gmm" + std::to_string(means.size());
    case TargetKind::kFunnel:
      return "funnel";
    case TargetKind::kDw4:
      return "dw4";
  }
  return "unknown";
}

double potential_and_grad(const TargetDistribution& dist, std::span<const double> x, std::span<double> grad,
                          bool* coincident) {
  if (static_cast<int>(x.size()) != dist.dim) throw PreconditionError("potential: dimension mismatch");
  if (!grad.empty() && grad.size() != x.size()) throw PreconditionError("potential: gradient size mismatch");
  switch (dist.kind) {
    case TargetKind::kGmm:
      return gmm_energy(dist, x, grad);
    case TargetKind::kFunnel:
      return funnel_energy(dist, x, grad);
    case TargetKind::kDw4:
      return dw4_energy(dist, x, grad, coincident);
  }
  return 0.0;
}

double potential(const TargetDistribution& dist, std::span<const double> x) { return potential_and_grad(dist, x, {}); }

std::vector<double> annealed_energy_grad(const TargetDistribution& dist, double u, std::span<const double> x) {
  std::vector<double> g(x.size());
  potential_and_grad(dist, x, g);
  const double inv_s2 = 1.0 / (dist.source_scale * dist.source_scale);
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = (1.0 - u) * x[i] * inv_s2 + u * g[i];
  return g;
}

ParticleSet langevin_correct_once(const ParticleSet& particles, const TargetDistribution& dist, double u, double xi,
                                  SeededRng& rng, LangevinStats* stats, double box) {
  if (!(xi > 0.0)) throw PreconditionError("langevin: step size must be positive");
  ParticleSet next = particles;
  const double noise = std::sqrt(xi);
  const double inv_s2 = 1.0 / (dist.source_scale * dist.source_scale);
  std::vector<double> g(particles.cols());
  for (std::size_t p = 0; p < particles.rows(); ++p) {
    const auto x = particles.row(p);
    bool coincident = false;
    potential_and_grad(dist, x, g, &coincident);
    if (coincident && stats) ++stats->coincident;
    auto y = next.row(p);
    bool finite = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double grad = (1.0 - u) * x[i] * inv_s2 + u * g[i];
      y[i] = x[i] - 0.5 * xi * grad + noise * rng.normal();
      finite = finite && std::isfinite(y[i]);
    }
    if (!finite) {
      for (double& yi : y) yi = std::isfinite(yi) ? std::clamp(yi, -box, box) : 0.0;
      if (stats) ++stats->clamped;
    }
  }
  return next;
}

ScoreFn target_score(const TargetDistribution& dist) {
  return [dist](std::span<const double> x, std::span<double> s) {
    potential_and_grad(dist, x, s);
    for (double& v : s) v = -v;
  };
}

ScoreFn annealed_score(const TargetDistribution& dist, double u) {
  return [dist, u](std::span<const double> x, std::span<double> s) {
    const auto g = annealed_energy_grad(dist, u, x);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = -g[i];
  };
}

double median_heuristic(const ParticleSet& particles) {
  const std::size_t n = particles.rows();
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::sqrt(sq_dist(particles.row(i), particles.row(j))));
  if (d.empty()) throw InvalidBandwidth("median heuristic needs at least two particles");
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  if (!(med > 0.0)) throw InvalidBandwidth("all particles coincide; KSD bandwidth is zero");
  return med;
}

double ksd(const ParticleSet& particles, const ScoreFn& score, std::optional<double> bandwidth) {
  const std::size_t n = particles.rows();
  const std::size_t d = particles.cols();
  if (n < 2) throw PreconditionError("ksd: need at least two particles");
  const double h = bandwidth ? *bandwidth : median_heuristic(particles);
  if (!(h > 0.0)) throw InvalidBandwidth("ksd: bandwidth must be positive");
  const double h2 = h * h;
  ParticleSet s(n, d);
  for (std::size_t i = 0; i < n; ++i) score(particles.row(i), s.row(i));

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = particles.row(i);
    const auto si = s.row(i);
    // Diagonal: k = 1, gradients vanish, trace term d / h^2.
    total += linalg::dot(si, si) + static_cast<double>(d) / h2;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto xj = particles.row(j);
      const auto sj = s.row(j);
      double r2 = 0.0, ss = 0.0, cross = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = xi[c] - xj[c];
        r2 += diff * diff;
        ss += si[c] * sj[c];
        cross += (si[c] - sj[c]) * diff;
      }
      const double k = std::exp(-r2 / (2.0 * h2));
      // s_i.grad_y k + s_j.grad_x k = k (s_i - s_j).(x_i - x_j) / h^2
      const double u = k * (ss + cross / h2 + static_cast<double>(d) / h2 - r2 / (h2 * h2));
      total += 2.0 * u;
    }
  }
  return total / static_cast<double>(n * n);
}

double ksd(const ParticleSet& particles, const TargetDistribution& dist, std::optional<double> bandwidth) {
  return ksd(particles, target_score(dist), bandwidth);
}

std::vector<std::size_t> hungarian(const linalg::RealMatrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw PreconditionError("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials formulation, 1-indexed with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double w2(const ParticleSet& a, const ParticleSet& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw PreconditionError("w2: particle sets differ in shape");
  const std::size_t n = a.rows();
  if (n == 0) return 0.0;
  linalg::RealMatrix cost(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = sq_dist(a.row(i), b.row(j));
  const auto assignment = hungarian(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost(i, assignment[i]);
  return std::sqrt(total / static_cast<double>(n));
}

TargetSpec parse_target_spec(const std::string& text) {
  if (text == "funnel") return {TargetKind::kFunnel, 0};
  if (text == "dw4") return {TargetKind::kDw4, 0};
  if (text.rfind("gmm", 0) == 0) {
    if (text.size() == 3) return {TargetKind::kGmm, 40};
    try {
      std::size_t used = 0;
      const int k = std::stoi(text.substr(3), &used);
      if (used == text.size() - 3 && k >= 1 && k <= 1000) return {TargetKind::kGmm, k};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown sampling target '" + text + "' (expected gmm, gmm<k>, funnel or dw4)");
}

TargetDistribution make_target(const TargetSpec& spec, std::uint64_t seed) {
  TargetDistribution dist;
  dist.kind = spec.kind;
  switch (spec.kind) {
    case TargetKind::kGmm: {
      if (spec.modes < 1) throw ConfigError("gmm needs at least one mode");
      dist.dim = 2;
      SeededRng rng(seed);
      double sq = 0.0;
      for (int m = 0; m < spec.modes; ++m) {
        std::vector<double> mu{rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0)};
        sq += mu[0] * mu[0] + mu[1] * mu[1];
        dist.means.push_back(std::move(mu));
      }
      dist.source_scale = std::sqrt(1.0 + sq / (2.0 * spec.modes));
      break;
    }
    case TargetKind::kFunnel:
      dist.dim = 10;
      dist.source_scale = 3.0;
      break;
    case TargetKind::kDw4:
      dist.dim = 8;
      dist.source_scale = 2.0;
      break;
  }
  return dist;
}

bool has_exact_sampler(const TargetDistribution& dist) { return dist.kind != TargetKind::kDw4; }

ParticleSet sample_target(const TargetDistribution& dist, std::size_t n, SeededRng& rng) {
  ParticleSet out(n, static_cast<std::size_t>(dist.dim));
  switch (dist.kind) {
    case TargetKind::kGmm:
      for (std::size_t p = 0; p < n; ++p) {
        const auto& mu = dist.means[rng.below(dist.means.size())];
        for (int i = 0; i < dist.dim; ++i) out(p, i) = mu[i] + rng.normal();
      }
      break;
    case TargetKind::kFunnel:
      for (std::size_t p = 0; p < n; ++p) {
        const double x0 = dist.funnel_sigma * rng.normal();
        out(p, 0) = x0;
        const double sd = std::exp(0.5 * x0);
        for (int i = 1; i < dist.dim; ++i) out(p, i) = sd * rng.normal();
      }
      break;
    case TargetKind::kDw4:
      throw PreconditionError("dw4 has no exact sampler");
  }
  return out;
}

ParticleSet sample_source(const TargetDistribution& dist, std::size_t n, SeededRng& rng) {
  ParticleSet out(n, static_cast<std::size_t>(dist.dim));
  for (double& v : out.data()) v = dist.source_scale * rng.normal();
  return out;
}

double default_step_size(const TargetDistribution& dist) { return dist.dim == 2 ? 0.05 : 0.01; }

void write_particles_csv(const ParticleSet& particles, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (std::size_t c = 0; c < particles.cols(); ++c) out << (c ? "," : "") << "x" << c;
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < particles.rows(); ++r) {
    for (std::size_t c = 0; c < particles.cols(); ++c) out << (c ? "," : "") << particles(r, c);
    out << '\n';
  }
}

AldConfig default_config(const TargetDistribution& dist) {
  AldConfig cfg;
  cfg.xi = default_step_size(dist);
  return cfg;
}

AldProblem::AldProblem(TargetDistribution dist, AldConfig config, ParticleSet initial)
    : dist_(std::move(dist)), config_(config), particles_(std::move(initial)) {
  if (particles_.rows() < 2) throw PreconditionError("AldProblem: need at least two particles");
  if (static_cast<int>(particles_.cols()) != dist_.dim) throw PreconditionError("AldProblem: dimension mismatch");
}

ParticleSet AldProblem::subsample() const {
  const std::size_t m = std::min(config_.ksd_subsample, particles_.rows());
  ParticleSet out(m, particles_.cols());
  for (std::size_t r = 0; r < m; ++r) std::copy_n(particles_.row(r).begin(), particles_.cols(), out.row(r).begin());
  return out;
}

double AldProblem::homotopy_value(double u) const {
  double total = 0.0;
  const double inv_s2 = 1.0 / (dist_.source_scale * dist_.source_scale);
  for (std::size_t r = 0; r < particles_.rows(); ++r) {
    const auto x = particles_.row(r);
    const double src = 0.5 * linalg::dot(x, x) * inv_s2;
    total += (1.0 - u) * src + u * potential(dist_, x);
  }
  return total / static_cast<double>(particles_.rows());
}

void AldProblem::predict(double /*from_u*/, double /*to_u*/, SeededRng& /*rng*/) {}

double AldProblem::correct_once(double u, SeededRng& rng) {
  particles_ = langevin_correct_once(particles_, dist_, u, config_.xi, rng, &stats_, config_.box);
  return 0.0;
}

double AldProblem::criterion(double u, SeededRng& /*rng*/) {
  try {
    return ksd(subsample(), annealed_score(dist_, u));
  } catch (const InvalidBandwidth& e) {
    throw CorrectorFailure(e.what());
  }
}

double AldProblem::target_metric() const {
  try {
    return ksd(subsample(), dist_);
  } catch (const InvalidBandwidth&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::vector<double> AldProblem::solution() const {
  const auto d = particles_.data();
  return {d.begin(), d.end()};
}

}  // namespace npc::ald
