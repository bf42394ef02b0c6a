#include "npc/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "npc/errors.hpp"

namespace npc::rl {

using json = nlohmann::json;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// log(1 - tanh(x)^2) without cancellation.
double log_sech2(double x) { return 2.0 * (std::log(2.0) - x - softplus(-2.0 * x)); }

bool log_std_active(double v) { return v > kLogStdMin && v < kLogStdMax; }

}  // namespace

Features state_features(const SolverState& state) {
  auto finite_or = [](double v) { return std::isfinite(v) ? v : (v > 0 ? 1e300 : -1e300); };
  return {state.level, finite_or(state.attained_tolerance), static_cast<double>(state.corrector_iters),
          finite_or(state.convergence_velocity)};
}

int parse_state_field(const std::string& name) {
  if (name == "level" || name == "u" || name == "t") return 0;
  if (name == "tolerance" || name == "attained" || name == "epsilon" || name == "eps") return 1;
  if (name == "iters" || name == "iterations" || name == "corrector_iters") return 2;
  if (name == "velocity" || name == "tau" || name == "convergence_velocity") return 3;
  throw ConfigError("unknown state field '" + name + "' (expected level, tolerance, iters or velocity)");
}

const char* state_field_name(int index) {
  static const char* names[kStateDim] = {"level", "tolerance", "iters", "velocity"};
  if (index < 0 || index >= kStateDim) throw PreconditionError("state field index out of range");
  return names[index];
}

// ------------------------------------------------------------------ MLP

Mlp::Mlp(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw PreconditionError("Mlp: need at least an input and an output size");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    layer.w.assign(static_cast<std::size_t>(layer.in * layer.out), 0.0);
    layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
    layers.push_back(std::move(layer));
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Tape tape;
  return forward(x, tape);
}

std::vector<double> Mlp::forward(std::span<const double> x, Tape& tape) const {
  tape.inputs.clear();
  tape.pre.clear();
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& L = layers[l];
    if (static_cast<int>(a.size()) != L.in) throw PreconditionError("Mlp: input width mismatch");
    std::vector<double> z(L.b);
    for (int o = 0; o < L.out; ++o) {
      const double* row = &L.w[static_cast<std::size_t>(o * L.in)];
      double s = 0.0;
      for (int i = 0; i < L.in; ++i) s += row[i] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] += s;
    }
    tape.inputs.push_back(a);
    tape.pre.push_back(z);
    if (l + 1 < layers.size())
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    a = std::move(z);
  }
  return a;
}

void Mlp::backward(const Tape& tape, std::span<const double> dout, std::span<double> grad) const {
  std::vector<std::size_t> offset(layers.size());
  std::size_t off = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    offset[l] = off;
    off += layers[l].w.size() + layers[l].b.size();
  }
  std::vector<double> delta(dout.begin(), dout.end());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& L = layers[l];
    const std::vector<double>& in = tape.inputs[l];
    double* gw = &grad[offset[l]];
    double* gb = gw + L.w.size();
    for (int o = 0; o < L.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      if (d == 0.0) continue;
      double* row = gw + o * L.in;
      for (int i = 0; i < L.in; ++i) row[i] += d * in[static_cast<std::size_t>(i)];
      gb[o] += d;
    }
    if (l == 0) break;
    std::vector<double> prev(static_cast<std::size_t>(L.in), 0.0);
    for (int o = 0; o < L.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      if (d == 0.0) continue;
      const double* row = &L.w[static_cast<std::size_t>(o * L.in)];
      for (int i = 0; i < L.in; ++i) prev[static_cast<std::size_t>(i)] += row[i] * d;
    }
    const std::vector<double>& pre = tape.pre[l - 1];
    for (std::size_t i = 0; i < prev.size(); ++i)
      if (!(pre[i] > 0.0)) prev[i] = 0.0;
    delta = std::move(prev);
  }
}

std::size_t Mlp::n_params() const {
  std::size_t n = 0;
  for (const auto& L : layers) n += L.w.size() + L.b.size();
  return n;
}

void Mlp::get_params(std::span<double> out) const {
  std::size_t k = 0;
  for (const auto& L : layers) {
    for (double v : L.w) out[k++] = v;
    for (double v : L.b) out[k++] = v;
  }
}

void Mlp::set_params(std::span<const double> in) {
  std::size_t k = 0;
  for (auto& L : layers) {
    for (double& v : L.w) v = in[k++];
    for (double& v : L.b) v = in[k++];
  }
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> s;
  if (layers.empty()) return s;
  s.push_back(layers.front().in);
  for (const auto& L : layers) s.push_back(L.out);
  return s;
}

void orthogonal_init(Mlp& net, double hidden_gain, double output_gain, SeededRng& rng) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    DenseLayer& L = net.layers[l];
    const double gain = l + 1 == net.layers.size() ? output_gain : hidden_gain;
    const int rows = std::max(L.out, L.in), cols = std::min(L.out, L.in);
    // Gram-Schmidt on the columns of a rows x cols Gaussian matrix.
    std::vector<std::vector<double>> q(static_cast<std::size_t>(cols), std::vector<double>(static_cast<std::size_t>(rows)));
    for (auto& c : q)
      for (double& v : c) v = rng.normal();
    for (int j = 0; j < cols; ++j) {
      auto& cj = q[static_cast<std::size_t>(j)];
      for (int k = 0; k < j; ++k) {
        const auto& ck = q[static_cast<std::size_t>(k)];
        const double d = std::inner_product(cj.begin(), cj.end(), ck.begin(), 0.0);
        for (int r = 0; r < rows; ++r) cj[static_cast<std::size_t>(r)] -= d * ck[static_cast<std::size_t>(r)];
      }
      const double n = std::sqrt(std::inner_product(cj.begin(), cj.end(), cj.begin(), 0.0));
      for (double& v : cj) v /= n;
    }
    for (int o = 0; o < L.out; ++o)
      for (int i = 0; i < L.in; ++i) {
        const double v = L.out >= L.in ? q[static_cast<std::size_t>(i)][static_cast<std::size_t>(o)]
                                       : q[static_cast<std::size_t>(o)][static_cast<std::size_t>(i)];
        L.w[static_cast<std::size_t>(o * L.in + i)] = gain * v;
      }
    std::fill(L.b.begin(), L.b.end(), 0.0);
  }
}

// ------------------------------------------------------------------ normalizer

void Normalizer::update(const std::vector<Features>& batch) {
  if (batch.empty()) return;
  const double n = static_cast<double>(batch.size());
  for (int d = 0; d < kStateDim; ++d) {
    double m = 0.0;
    for (const auto& f : batch) m += f[d];
    m /= n;
    double v = 0.0;
    for (const auto& f : batch) v += (f[d] - m) * (f[d] - m);
    v /= n;
    const double delta = m - mean[d];
    const double total = count + n;
    const double m2 = var[d] * count + v * n + delta * delta * count * n / total;
    mean[d] += delta * n / total;
    var[d] = std::max(m2 / total, 1e-8);
  }
  count += n;
}

Features Normalizer::apply(const Features& raw) const {
  Features out{};
  for (int d = 0; d < kStateDim; ++d) {
    const double z = (raw[d] - mean[d]) / std::sqrt(std::max(var[d], 1e-8));
    out[d] = std::clamp(z, -clip, clip);
  }
  return out;
}

// ------------------------------------------------------------------ policy

ActionBounds default_action_bounds(ProblemKind kind) {
  ActionBounds b;
  b.lo[0] = 1e-3;
  b.hi[0] = 0.5;
  switch (kind) {
    case ProblemKind::kGnc:
      b.lo[1] = -8.0;
      b.hi[1] = -2.0;
      break;
    case ProblemKind::kHc:
      b.lo[1] = -12.0;
      b.hi[1] = -2.0;
      break;
    case ProblemKind::kGh:
    case ProblemKind::kAld:
      b.lo[1] = 1.0;
      b.hi[1] = 20.0;
      break;
  }
  return b;
}

BudgetVariant default_budget_variant(ProblemKind kind) {
  return kind == ProblemKind::kGnc || kind == ProblemKind::kHc ? BudgetVariant::kTolerance : BudgetVariant::kMaxIters;
}

PolicyModel PolicyModel::create(ProblemKind kind, std::uint64_t seed, std::vector<int> hidden) {
  PolicyModel m;
  m.kind = kind;
  m.variant = default_budget_variant(kind);
  m.bounds = default_action_bounds(kind);
  m.hidden = hidden;
  std::vector<int> ps{kStateDim}, vs{kStateDim};
  for (int h : hidden) {
    ps.push_back(h);
    vs.push_back(h);
  }
  ps.push_back(kActionDim);
  vs.push_back(1);
  m.policy = Mlp(ps);
  m.value = Mlp(vs);
  SeededRng rng(seed);
  orthogonal_init(m.policy, std::sqrt(2.0), 0.01, rng);
  orthogonal_init(m.value, std::sqrt(2.0), 1.0, rng);
  m.log_std = {0.0, 0.0};
  return m;
}

std::size_t PolicyModel::n_params() const { return policy.n_params() + kActionDim + value.n_params(); }

std::vector<double> PolicyModel::get_params() const {
  std::vector<double> p(n_params());
  const std::size_t np = policy.n_params();
  policy.get_params(std::span<double>(p.data(), np));
  for (int d = 0; d < kActionDim; ++d) p[np + d] = log_std[d];
  value.get_params(std::span<double>(p.data() + np + kActionDim, value.n_params()));
  return p;
}

void PolicyModel::set_params(std::span<const double> params) {
  if (params.size() != n_params()) throw PreconditionError("PolicyModel::set_params: size mismatch");
  const std::size_t np = policy.n_params();
  policy.set_params(params.subspan(0, np));
  for (int d = 0; d < kActionDim; ++d) log_std[d] = params[np + d];
  value.set_params(params.subspan(np + kActionDim));
}

Features PolicyModel::network_input(const Features& raw) const {
  Features x = normalizer.apply(raw);
  for (int d = 0; d < kStateDim; ++d)
    if (mask[d]) x[d] = 0.0;
  return x;
}

double clamp_log_std(double v) { return std::clamp(v, kLogStdMin, kLogStdMax); }

PolicyOutput forward_normalized(const PolicyModel& model, const Features& input) {
  PolicyOutput out;
  const auto mean = model.policy.forward(input);
  for (int d = 0; d < kActionDim; ++d) {
    out.mean[d] = mean[static_cast<std::size_t>(d)];
    out.log_std[d] = clamp_log_std(model.log_std[d]);
  }
  out.value = model.value.forward(input)[0];
  return out;
}

PolicyOutput policy_forward(const PolicyModel& model, const SolverState& state) {
  return forward_normalized(model, model.network_input(state_features(state)));
}

double gaussian_log_prob(const Action2& mean, const Action2& log_std, const Action2& raw) {
  double lp = 0.0;
  for (int d = 0; d < kActionDim; ++d) {
    const double z = (raw[d] - mean[d]) * std::exp(-log_std[d]);
    lp += -0.5 * z * z - log_std[d] - 0.5 * kLog2Pi;
  }
  return lp;
}

double squashed_log_prob(const Action2& mean, const Action2& log_std, const Action2& raw, const ActionBounds& bounds) {
  double lp = gaussian_log_prob(mean, log_std, raw);
  for (int d = 0; d < kActionDim; ++d) lp -= log_sech2(raw[d]) + std::log(0.5 * (bounds.hi[d] - bounds.lo[d]));
  return lp;
}

Action2 squash_to_bounds(const Action2& raw, const ActionBounds& bounds) {
  Action2 a{};
  for (int d = 0; d < kActionDim; ++d)
    a[d] = bounds.lo[d] + 0.5 * (std::tanh(raw[d]) + 1.0) * (bounds.hi[d] - bounds.lo[d]);
  return a;
}

PcAction to_pc_action(const Action2& bounded, BudgetVariant variant) {
  PcAction action;
  action.delta_u = bounded[0];
  if (variant == BudgetVariant::kMaxIters)
    action.budget = CorrectorBudget::MaxIters(std::max(1, static_cast<int>(std::lround(bounded[1]))));
  else
    action.budget = CorrectorBudget::Tolerance(std::pow(10.0, bounded[1]));
  return action;
}

SampledAction sample_and_squash(const PolicyModel& model, const SolverState& state, SeededRng& rng) {
  const PolicyOutput out = policy_forward(model, state);
  SampledAction s;
  for (int d = 0; d < kActionDim; ++d) s.raw[d] = out.mean[d] + std::exp(out.log_std[d]) * rng.normal();
  s.log_prob = squashed_log_prob(out.mean, out.log_std, s.raw, model.bounds);
  s.value = out.value;
  s.action = to_pc_action(squash_to_bounds(s.raw, model.bounds), model.variant);
  return s;
}

PcAction deterministic_action(const PolicyModel& model, const SolverState& state) {
  const PolicyOutput out = policy_forward(model, state);
  return to_pc_action(squash_to_bounds(out.mean, model.bounds), model.variant);
}

// ------------------------------------------------------------------ rewards

RewardConfig default_reward_config(ProblemKind kind) {
  const SolveLimits limits = default_limits(kind);
  switch (kind) {
    case ProblemKind::kGnc:
      return {1e3, 1e-3, limits.t_max};
    case ProblemKind::kGh:
      return {1.0, 1e-3, limits.t_max};
    case ProblemKind::kHc:
      return {1e-3, 1e-1, limits.t_max};
    case ProblemKind::kAld:
      return {10.0, 1e-3, limits.t_max};
  }
  return {};
}

std::vector<double> compute_rewards(const SolveTrace& trace, const RewardConfig& cfg) {
  const std::size_t n = trace.records.size();
  std::vector<double> r(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double v = compute_convergence_velocity(trace.records[i].target_metric, trace.records[i + 1].target_metric);
    r[i] = cfg.lambda1 * (std::isfinite(v) ? std::clamp(v, -10.0, 10.0) : 0.0);
  }
  if (n > 0 && trace.success) r[n - 1] += cfg.lambda2 * static_cast<double>(cfg.t_max - trace.total_corrector_iters);
  return r;
}

// ------------------------------------------------------------------ PPO

GaeResult gae(const RolloutBuffer& buffer, double gamma, double lambda) {
  const std::size_t n = buffer.steps.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0, next_value = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const Transition& t = buffer.steps[k];
    const double live = t.done ? 0.0 : 1.0;
    const double delta = t.reward + gamma * next_value * live - t.value;
    const double adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = adv;
    out.returns[k] = adv + t.value;
    next_adv = adv;
    next_value = t.value;
  }
  return out;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  return -std::min(unclipped, clipped);
}

PpoLoss ppo_loss(const PolicyModel& model, std::span<const PpoSample> batch, const PpoConfig& cfg,
                 std::vector<double>* grad) {
  PpoLoss loss;
  if (batch.empty()) return loss;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const std::size_t np = model.policy.n_params();
  if (grad) grad->assign(model.n_params(), 0.0);

  Action2 ls{};
  for (int d = 0; d < kActionDim; ++d) ls[d] = clamp_log_std(model.log_std[d]);
  std::array<double, kActionDim> g_ls{};

  Mlp::Tape ptape, vtape;
  for (const PpoSample& s : batch) {
    const auto mean_v = model.policy.forward(s.obs, ptape);
    const double value = model.value.forward(s.obs, vtape)[0];
    const Action2 mean{mean_v[0], mean_v[1]};
    const double logp = squashed_log_prob(mean, ls, s.raw, model.bounds);
    const double log_ratio = logp - s.old_log_prob;
    const double ratio = std::exp(log_ratio);
    loss.policy += clipped_surrogate(ratio, s.advantage, cfg.clip) * inv_b;
    loss.value += (value - s.ret) * (value - s.ret) * inv_b;
    if (std::abs(ratio - 1.0) > cfg.clip) loss.clip_fraction += inv_b;
    loss.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;

    if (!grad) continue;
    const bool unclipped_active = ratio * s.advantage <= std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * s.advantage;
    const double dlogp = unclipped_active ? -ratio * s.advantage * inv_b : 0.0;
    std::array<double, kActionDim> dmean{};
    for (int d = 0; d < kActionDim; ++d) {
      const double inv_var = std::exp(-2.0 * ls[d]);
      const double diff = s.raw[d] - mean[d];
      dmean[d] = dlogp * diff * inv_var;
      g_ls[d] += dlogp * (diff * diff * inv_var - 1.0);
    }
    model.policy.backward(ptape, dmean, std::span<double>(grad->data(), np));
    const double dv = cfg.vf_coef * 2.0 * (value - s.ret) * inv_b;
    model.value.backward(vtape, std::span<const double>(&dv, 1),
                         std::span<double>(grad->data() + np + kActionDim, model.value.n_params()));
  }
  for (int d = 0; d < kActionDim; ++d) loss.entropy += ls[d] + 0.5 * (1.0 + kLog2Pi);
  loss.total = loss.policy + cfg.vf_coef * loss.value - cfg.ent_coef * loss.entropy;
  if (grad)
    for (int d = 0; d < kActionDim; ++d)
      (*grad)[np + d] = log_std_active(model.log_std[d]) ? g_ls[d] - cfg.ent_coef : 0.0;
  return loss;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state, double lr,
               const PpoConfig& cfg) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
    state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

PpoTrainer::PpoTrainer(PolicyModel& model, PpoConfig cfg) : model_(model), cfg_(cfg), lr_(cfg.learning_rate) {}

UpdateStats PpoTrainer::update(const RolloutBuffer& buffer, SeededRng& rng) {
  UpdateStats stats;
  const std::size_t n = buffer.steps.size();
  if (n == 0) return stats;
  const GaeResult g = gae(buffer, cfg_.gamma, cfg_.gae_lambda);
  std::vector<PpoSample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = buffer.steps[i];
    samples[i] = PpoSample{t.obs, t.raw, t.log_prob, g.advantages[i], g.returns[i]};
  }
  std::vector<std::size_t> order(n);
  const auto batch = static_cast<std::size_t>(std::max(1, cfg_.batch_size));
  std::vector<PpoSample> mb;
  std::vector<double> grad;
  for (int epoch = 0; epoch < cfg_.n_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      mb.clear();
      for (std::size_t k = start; k < end; ++k) mb.push_back(samples[order[k]]);
      if (mb.size() > 1) {
        double m = 0.0, v = 0.0;
        for (const auto& s : mb) m += s.advantage;
        m /= static_cast<double>(mb.size());
        for (const auto& s : mb) v += (s.advantage - m) * (s.advantage - m);
        const double sd = std::sqrt(v / static_cast<double>(mb.size() - 1));
        for (auto& s : mb) s.advantage = (s.advantage - m) / (sd + 1e-8);
      }
      const PpoLoss loss = ppo_loss(model_, mb, cfg_, &grad);
      ++stats.minibatches;
      double gn = 0.0;
      for (double x : grad) gn += x * x;
      gn = std::sqrt(gn);
      if (!std::isfinite(loss.total) || !std::isfinite(gn)) {
        ++stats.skipped;
        if (!lr_halved_) {
          lr_ *= 0.5;
          lr_halved_ = true;
        }
        continue;
      }
      if (gn > cfg_.max_grad_norm)
        for (double& x : grad) x *= cfg_.max_grad_norm / gn;
      std::vector<double> params = model_.get_params();
      adam_step(params, grad, adam_, lr_, cfg_);
      model_.set_params(params);
      for (int d = 0; d < kActionDim; ++d) model_.log_std[d] = clamp_log_std(model_.log_std[d]);
      stats.policy_loss += loss.policy;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      stats.approx_kl += loss.approx_kl;
      stats.clip_fraction += loss.clip_fraction;
    }
  }
  const int used = stats.minibatches - stats.skipped;
  if (used > 0) {
    stats.policy_loss /= used;
    stats.value_loss /= used;
    stats.entropy /= used;
    stats.approx_kl /= used;
    stats.clip_fraction /= used;
  }
  return stats;
}

// ------------------------------------------------------------------ controllers

PolicyController::PolicyController(const PolicyModel& model, bool stochastic) : model_(model), stochastic_(stochastic) {}

PcAction PolicyController::next_action(const SolverState& state, SeededRng& rng) {
  if (stochastic_) return sample_and_squash(model_, state, rng).action;
  return deterministic_action(model_, state);
}

RolloutController::RolloutController(const PolicyModel& model, SeededRng rng) : model_(model), rng_(std::move(rng)) {}

PcAction RolloutController::next_action(const SolverState& state, SeededRng& /*engine_rng*/) {
  Step step;
  step.raw_state = state_features(state);
  step.transition.obs = model_.network_input(step.raw_state);
  const PolicyOutput out = forward_normalized(model_, step.transition.obs);
  for (int d = 0; d < kActionDim; ++d) step.transition.raw[d] = out.mean[d] + std::exp(out.log_std[d]) * rng_.normal();
  step.transition.log_prob = squashed_log_prob(out.mean, out.log_std, step.transition.raw, model_.bounds);
  step.transition.value = out.value;
  const PcAction action = to_pc_action(squash_to_bounds(step.transition.raw, model_.bounds), model_.variant);
  steps_.push_back(step);
  return action;
}

void RolloutController::on_rejected() {
  if (!steps_.empty()) steps_.back().record = -1;
}

void RolloutController::on_accepted(const SolverState& /*state*/, const LevelRecord& /*record*/) {
  if (!steps_.empty()) steps_.back().record = accepted_++;
}

// ------------------------------------------------------------------ training

Episode run_episode(const PolicyModel& model, TrainingInstance& instance, const RewardConfig& reward,
                    SeededRng& solver_rng, SeededRng& policy_rng) {
  RolloutController controller(model, SeededRng(policy_rng.next_u64()));
  Episode ep;
  ep.trace = solve(*instance.problem, controller, instance.limits, solver_rng);
  const std::vector<double> rewards = compute_rewards(ep.trace, reward);
  auto& steps = controller.steps();
  for (std::size_t k = 0; k < steps.size(); ++k) {
    Transition t = steps[k].transition;
    const int rec = steps[k].record;
    t.reward = rec >= 0 && static_cast<std::size_t>(rec) < rewards.size() ? rewards[static_cast<std::size_t>(rec)] : 0.0;
    t.done = k + 1 == steps.size();
    ep.total_reward += t.reward;
    ep.steps.push_back(t);
    ep.raw_states.push_back(steps[k].raw_state);
  }
  return ep;
}

namespace {

constexpr std::uint64_t kUpdateStream = 0x5eedf00dULL;

Episode episode_for(const InstanceSampler& sampler, const PolicyModel& model, const RewardConfig& reward,
                    std::uint64_t seed, long index) {
  const auto base = static_cast<std::uint64_t>(index) * 3;
  SeededRng inst_rng(SeededRng::derive(seed, base));
  SeededRng solver_rng(SeededRng::derive(seed, base + 1));
  SeededRng policy_rng(SeededRng::derive(seed, base + 2));
  TrainingInstance inst = sampler(inst_rng);
  return run_episode(model, inst, reward, solver_rng, policy_rng);
}

json curve_to_json(const std::vector<CurvePoint>& curve) {
  json a = json::array();
  for (const auto& p : curve) a.push_back({p.env_steps, p.mean_reward, p.mean_iters});
  return a;
}

}  // namespace

TrainResult resume_training(const InstanceSampler& sampler, TrainState state, const TrainConfig& cfg,
                            std::uint64_t seed) {
  TrainResult result;
  PpoTrainer trainer(state.model, cfg.ppo);
  trainer.adam() = state.adam;
  trainer.set_learning_rate(state.learning_rate, state.lr_halved);
  const int threads = std::max(1, cfg.threads);

  auto sync = [&] {
    state.adam = trainer.adam();
    state.learning_rate = trainer.learning_rate();
    state.lr_halved = trainer.lr_halved();
  };

  while (state.env_steps < cfg.total_env_steps) {
    if (cfg.max_updates > 0 && state.updates >= cfg.max_updates) break;
    const PolicyModel frozen = state.model;
    RolloutBuffer buffer;
    std::vector<Features> raw_states;
    double reward_sum = 0.0, iters_sum = 0.0;
    int n_episodes = 0;
    long next = state.episodes;
    while (static_cast<int>(buffer.steps.size()) < cfg.ppo.n_steps) {
      std::vector<Episode> eps(static_cast<std::size_t>(threads));
      if (threads == 1) {
        eps[0] = episode_for(sampler, frozen, cfg.reward, seed, next);
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w)
          pool.emplace_back([&, w] { eps[static_cast<std::size_t>(w)] = episode_for(sampler, frozen, cfg.reward, seed, next + w); });
        for (auto& t : pool) t.join();
      }
      for (auto& ep : eps) {
        if (static_cast<int>(buffer.steps.size()) >= cfg.ppo.n_steps) break;
        ++next;
        ++n_episodes;
        reward_sum += ep.total_reward;
        iters_sum += ep.trace.total_corrector_iters;
        buffer.steps.insert(buffer.steps.end(), ep.steps.begin(), ep.steps.end());
        raw_states.insert(raw_states.end(), ep.raw_states.begin(), ep.raw_states.end());
      }
      if (n_episodes > 0 && buffer.steps.empty() && next - state.episodes > 1000)
        throw ConfigError("training instances produce no policy decisions");
    }
    const double mean_reward = reward_sum / std::max(1, n_episodes);
    const double mean_iters = iters_sum / std::max(1, n_episodes);
    if (!std::isfinite(mean_reward)) {
      result.diverged = true;
      result.diagnostic = "mean episode reward is not finite after " + std::to_string(state.env_steps) + " env steps";
      sync();
      if (!cfg.checkpoint_path.empty()) save_train_state(state, cfg.checkpoint_path);
      break;
    }
    if (mean_reward > state.best_reward) {
      state.best_reward = mean_reward;
      state.best = frozen;
    }
    SeededRng update_rng(SeededRng::derive(seed ^ kUpdateStream, static_cast<std::uint64_t>(state.updates)));
    const UpdateStats stats = trainer.update(buffer, update_rng);
    state.model.normalizer.update(raw_states);
    state.env_steps += static_cast<long>(buffer.steps.size());
    state.episodes = next;
    ++state.updates;
    state.curve.push_back({state.env_steps, mean_reward, mean_iters});
    sync();
    if (cfg.verbose)
      std::fprintf(stderr, "update %d steps %ld reward %.4f iters %.1f kl %.4f clip %.3f std %.3f/%.3f\n", state.updates,
                   state.env_steps, mean_reward, mean_iters, stats.approx_kl, stats.clip_fraction,
                   std::exp(state.model.log_std[0]), std::exp(state.model.log_std[1]));
    if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 && state.updates % cfg.checkpoint_every == 0)
      save_train_state(state, cfg.checkpoint_path);
  }
  sync();
  if (state.best_reward == -1e300) state.best = state.model;
  result.state = std::move(state);
  return result;
}

TrainResult train(const InstanceSampler& sampler, PolicyModel init, const TrainConfig& cfg, std::uint64_t seed) {
  TrainState state;
  state.model = std::move(init);
  state.learning_rate = cfg.ppo.learning_rate;
  return resume_training(sampler, std::move(state), cfg, seed);
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "env_steps,mean_reward,mean_iters\n";
  char line[128];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof line, "%ld,%.10g,%.10g\n", p.env_steps, p.mean_reward, p.mean_iters);
    out << line;
  }
}

// ------------------------------------------------------------------ serialization

namespace {

json layers_to_json(const Mlp& net) {
  json arr = json::array();
  for (const auto& L : net.layers) {
    json w = json::array();
    for (int o = 0; o < L.out; ++o) {
      json row = json::array();
      for (int i = 0; i < L.in; ++i) row.push_back(L.w[static_cast<std::size_t>(o * L.in + i)]);
      w.push_back(row);
    }
    arr.push_back({{"w", w}, {"b", L.b}});
  }
  return arr;
}

Mlp layers_from_json(const json& arr, const std::vector<int>& sizes, const char* what) {
  if (!arr.is_array() || arr.size() + 1 != sizes.size())
    throw VersionError(std::string(what) + ": expected " + std::to_string(sizes.size() - 1) + " layers");
  Mlp net(sizes);
  for (std::size_t l = 0; l < arr.size(); ++l) {
    DenseLayer& L = net.layers[l];
    const json& w = arr[l].at("w");
    const json& b = arr[l].at("b");
    if (!w.is_array() || static_cast<int>(w.size()) != L.out || !b.is_array() || static_cast<int>(b.size()) != L.out)
      throw VersionError(std::string(what) + ": layer " + std::to_string(l) + " has the wrong shape");
    for (int o = 0; o < L.out; ++o) {
      const json& row = w[static_cast<std::size_t>(o)];
      if (!row.is_array() || static_cast<int>(row.size()) != L.in)
        throw VersionError(std::string(what) + ": layer " + std::to_string(l) + " has the wrong shape");
      for (int i = 0; i < L.in; ++i) L.w[static_cast<std::size_t>(o * L.in + i)] = row[static_cast<std::size_t>(i)].get<double>();
      L.b[static_cast<std::size_t>(o)] = b[static_cast<std::size_t>(o)].get<double>();
    }
  }
  return net;
}

json policy_json(const PolicyModel& m) {
  json j;
  j["format_version"] = kPolicyFormatVersion;
  j["state_dim"] = kStateDim;
  j["action_dim"] = kActionDim;
  j["hidden"] = m.hidden;
  j["activation"] = "relu";
  j["policy_layers"] = layers_to_json(m.policy);
  j["log_std"] = m.log_std;
  j["value_layers"] = layers_to_json(m.value);
  j["normalizer"] = {{"mean", m.normalizer.mean}, {"var", m.normalizer.var}, {"count", m.normalizer.count}};
  j["action_bounds"] = {{"lo", m.bounds.lo}, {"hi", m.bounds.hi}};
  j["problem_kind"] = to_string(m.kind);
  j["budget_variant"] = to_string(m.variant);
  json mask = json::array();
  for (int d = 0; d < kStateDim; ++d)
    if (m.mask[d]) mask.push_back(state_field_name(d));
  j["state_mask"] = mask;
  j["metadata"] = json::parse(m.metadata_json);
  return j;
}

PolicyModel policy_from(const json& j, const std::vector<int>& expected_hidden) {
  try {
    if (!j.is_object()) throw VersionError("policy file is not a JSON object");
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kPolicyFormatVersion)
      throw VersionError("unsupported policy format_version");
    if (j.at("state_dim").get<int>() != kStateDim || j.at("action_dim").get<int>() != kActionDim)
      throw VersionError("policy state/action dimensions do not match");
    if (j.at("activation").get<std::string>() != "relu") throw VersionError("unsupported activation");
    const auto hidden = j.at("hidden").get<std::vector<int>>();
    if (!expected_hidden.empty() && hidden != expected_hidden) {
      std::string want, got;
      for (int h : expected_hidden) want += std::to_string(h) + " ";
      for (int h : hidden) got += std::to_string(h) + " ";
      throw VersionError("hidden layer shape mismatch: file has [ " + got + "], expected [ " + want + "]");
    }
    PolicyModel m;
    m.hidden = hidden;
    std::vector<int> ps{kStateDim}, vs{kStateDim};
    for (int h : hidden) {
      ps.push_back(h);
      vs.push_back(h);
    }
    ps.push_back(kActionDim);
    vs.push_back(1);
    m.policy = layers_from_json(j.at("policy_layers"), ps, "policy_layers");
    m.value = layers_from_json(j.at("value_layers"), vs, "value_layers");
    const auto ls = j.at("log_std").get<std::vector<double>>();
    if (ls.size() != kActionDim) throw VersionError("log_std has the wrong length");
    m.log_std = {ls[0], ls[1]};
    const auto mean = j.at("normalizer").at("mean").get<std::vector<double>>();
    const auto var = j.at("normalizer").at("var").get<std::vector<double>>();
    if (mean.size() != kStateDim || var.size() != kStateDim) throw VersionError("normalizer has the wrong length");
    std::copy(mean.begin(), mean.end(), m.normalizer.mean.begin());
    std::copy(var.begin(), var.end(), m.normalizer.var.begin());
    m.normalizer.count = j.at("normalizer").at("count").get<double>();
    const auto lo = j.at("action_bounds").at("lo").get<std::vector<double>>();
    const auto hi = j.at("action_bounds").at("hi").get<std::vector<double>>();
    if (lo.size() != kActionDim || hi.size() != kActionDim) throw VersionError("action_bounds have the wrong length");
    m.bounds.lo = {lo[0], lo[1]};
    m.bounds.hi = {hi[0], hi[1]};
    m.kind = parse_problem_kind(j.at("problem_kind").get<std::string>());
    const auto variant = j.at("budget_variant").get<std::string>();
    if (variant == to_string(BudgetVariant::kTolerance)) m.variant = BudgetVariant::kTolerance;
    else if (variant == to_string(BudgetVariant::kMaxIters)) m.variant = BudgetVariant::kMaxIters;
    else throw VersionError("unknown budget_variant '" + variant + "'");
    if (j.contains("state_mask"))
      for (const auto& f : j.at("state_mask")) m.mask[static_cast<std::size_t>(parse_state_field(f.get<std::string>()))] = true;
    m.metadata_json = j.contains("metadata") ? j.at("metadata").dump() : "{}";
    return m;
  } catch (const json::exception& e) {
    throw VersionError(std::string("malformed policy file: ") + e.what());
  } catch (const ConfigError& e) {
    throw VersionError(std::string("malformed policy file: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

}  // namespace

std::string policy_to_json(const PolicyModel& model) { return policy_json(model).dump(1); }

PolicyModel policy_from_json(const std::string& text, const std::vector<int>& expected_hidden) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw VersionError(std::string("malformed policy file: ") + e.what());
  }
  return policy_from(j, expected_hidden);
}

void save_policy(const PolicyModel& model, const std::string& path) { write_file(path, policy_to_json(model) + "\n"); }

PolicyModel load_policy(const std::string& path, const std::vector<int>& expected_hidden) {
  return policy_from_json(read_file(path), expected_hidden);
}

void save_train_state(const TrainState& s, const std::string& path) {
  json j;
  j["format_version"] = kPolicyFormatVersion;
  j["model"] = policy_json(s.model);
  j["best"] = policy_json(s.best.policy.layers.empty() ? s.model : s.best);
  j["best_reward"] = s.best_reward;
  j["adam"] = {{"m", s.adam.m}, {"v", s.adam.v}, {"step", s.adam.step}};
  j["learning_rate"] = s.learning_rate;
  j["lr_halved"] = s.lr_halved;
  j["env_steps"] = s.env_steps;
  j["episodes"] = s.episodes;
  j["updates"] = s.updates;
  j["curve"] = curve_to_json(s.curve);
  write_file(path, j.dump());
}

TrainState load_train_state(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw VersionError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    TrainState s;
    s.model = policy_from(j.at("model"), {});
    s.best = policy_from(j.at("best"), {});
    s.best_reward = j.at("best_reward").get<double>();
    s.adam.m = j.at("adam").at("m").get<std::vector<double>>();
    s.adam.v = j.at("adam").at("v").get<std::vector<double>>();
    s.adam.step = j.at("adam").at("step").get<long>();
    s.learning_rate = j.at("learning_rate").get<double>();
    s.lr_halved = j.at("lr_halved").get<bool>();
    s.env_steps = j.at("env_steps").get<long>();
    s.episodes = j.at("episodes").get<long>();
    s.updates = j.at("updates").get<int>();
    for (const auto& p : j.at("curve")) s.curve.push_back({p[0].get<long>(), p[1].get<double>(), p[2].get<double>()});
    return s;
  } catch (const json::exception& e) {
    throw VersionError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace npc::rl
