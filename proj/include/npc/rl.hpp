#pragma once

// Learned schedule controller: small MLP policy and value networks with a
// hand-written reverse pass, PPO with GAE, and the reward shaping used to
// train step-size and corrector-budget policies.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "npc/engine.hpp"
#include "npc/rng.hpp"

namespace npc::rl {

constexpr int kStateDim = 4;
constexpr int kActionDim = 2;

using Features = std::array<double, kStateDim>;
using Action2 = std::array<double, kActionDim>;
/// true = that state dimension is zeroed before the networks see it.
using StateMask = std::array<bool, kStateDim>;

/// (level, attained criterion, corrector iterations, convergence velocity).
Features state_features(const SolverState& state);

/// Accepts "level", "tolerance", "iters", "velocity" (and a few aliases).
int parse_state_field(const std::string& name);
const char* state_field_name(int index);

// ------------------------------------------------------------------ MLP

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;
};

/// Fully connected network, ReLU on hidden layers, linear output.
class Mlp {
 public:
  struct Tape {
    std::vector<std::vector<double>> inputs;  // input to each layer (post-activation)
    std::vector<std::vector<double>> pre;     // pre-activation of each layer
  };

  Mlp() = default;
  explicit Mlp(const std::vector<int>& sizes);

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, Tape& tape) const;
  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(const Tape& tape, std::span<const double> dout, std::span<double> grad) const;

  std::size_t n_params() const;
  void get_params(std::span<double> out) const;
  void set_params(std::span<const double> in);
  std::vector<int> sizes() const;

  std::vector<DenseLayer> layers;
};

/// Orthogonal initialization with the given gains, zero biases.
void orthogonal_init(Mlp& net, double hidden_gain, double output_gain, SeededRng& rng);

// ------------------------------------------------------------------ normalizer

struct Normalizer {
  Features mean{};
  Features var{1.0, 1.0, 1.0, 1.0};
  double count = 1e-4;
  double clip = 10.0;

  void update(const std::vector<Features>& batch);
  Features apply(const Features& raw) const;
};

// ------------------------------------------------------------------ policy

struct ActionBounds {
  Action2 lo{};
  Action2 hi{};
};

/// Per-kind bounds: delta_u in [1e-3, 0.5]; MaxIters in [1, 20]; log10
/// tolerance in [-8, -2] (GNC) or [-12, -2] (HC).
ActionBounds default_action_bounds(ProblemKind kind);
BudgetVariant default_budget_variant(ProblemKind kind);

struct PolicyModel {
  Mlp policy;
  Action2 log_std{};
  Mlp value;
  Normalizer normalizer;
  ActionBounds bounds;
  ProblemKind kind = ProblemKind::kGh;
  BudgetVariant variant = BudgetVariant::kMaxIters;
  StateMask mask{};
  std::vector<int> hidden{16, 16};
  /// Free-form metadata carried through save/load (reward settings, seed).
  std::string metadata_json = "{}";

  static PolicyModel create(ProblemKind kind, std::uint64_t seed, std::vector<int> hidden = {16, 16});

  std::size_t n_params() const;
  /// Flat layout: policy params, log_std, value params.
  std::vector<double> get_params() const;
  void set_params(std::span<const double> params);
  /// Normalized and masked network input.
  Features network_input(const Features& raw) const;
};

double clamp_log_std(double v);

struct PolicyOutput {
  Action2 mean{};
  Action2 log_std{};
  double value = 0.0;
};

/// Forward pass on an already normalized input.
PolicyOutput forward_normalized(const PolicyModel& model, const Features& input);
PolicyOutput policy_forward(const PolicyModel& model, const SolverState& state);

/// Log-density of the bounded action obtained by squashing `raw`.
double squashed_log_prob(const Action2& mean, const Action2& log_std, const Action2& raw, const ActionBounds& bounds);
/// Gaussian part only; differs from squashed_log_prob by a parameter-free term.
double gaussian_log_prob(const Action2& mean, const Action2& log_std, const Action2& raw);

/// Maps a raw (pre-tanh) sample onto the bounded action space.
Action2 squash_to_bounds(const Action2& raw, const ActionBounds& bounds);
PcAction to_pc_action(const Action2& bounded, BudgetVariant variant);

struct SampledAction {
  PcAction action;
  Action2 raw{};
  double log_prob = 0.0;
  double value = 0.0;
};

SampledAction sample_and_squash(const PolicyModel& model, const SolverState& state, SeededRng& rng);
/// Action at the distribution mean.
PcAction deterministic_action(const PolicyModel& model, const SolverState& state);

// ------------------------------------------------------------------ rewards

struct RewardConfig {
  double lambda1 = 1.0;
  double lambda2 = 1e-3;
  int t_max = 1000;
};

RewardConfig default_reward_config(ProblemKind kind);

/// One reward per level record: r_n = lambda1 * clip(velocity(m_n -> m_{n+1}), +-10)
/// for all but the last record, which instead receives lambda2 * (T_max - T)
/// on success and 0 on failure.
std::vector<double> compute_rewards(const SolveTrace& trace, const RewardConfig& cfg);

// ------------------------------------------------------------------ PPO

struct Transition {
  Features obs{};  // network input (normalized, masked)
  Action2 raw{};
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

struct RolloutBuffer {
  std::vector<Transition> steps;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Episodes end at done; the step after a done is never bootstrapped.
GaeResult gae(const RolloutBuffer& buffer, double gamma, double lambda);

struct PpoConfig {
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int n_steps = 2048;
  int batch_size = 64;
  int n_epochs = 10;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct PpoSample {
  Features obs{};
  Action2 raw{};
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct PpoLoss {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// Per-sample clipped surrogate -min(rho A, clip(rho) A).
double clipped_surrogate(double ratio, double advantage, double clip);

/// Loss over `batch` (advantages used as given). When `grad` is non-null it
/// receives d(total)/d(params) in the get_params() layout.
PpoLoss ppo_loss(const PolicyModel& model, std::span<const PpoSample> batch, const PpoConfig& cfg,
                 std::vector<double>* grad);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state, double lr,
               const PpoConfig& cfg);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int skipped = 0;
  int minibatches = 0;
};

class PpoTrainer {
 public:
  PpoTrainer(PolicyModel& model, PpoConfig cfg);

  UpdateStats update(const RolloutBuffer& buffer, SeededRng& rng);

  const AdamState& adam() const { return adam_; }
  AdamState& adam() { return adam_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr, bool halved) {
    lr_ = lr;
    lr_halved_ = halved;
  }
  bool lr_halved() const { return lr_halved_; }

 private:
  PolicyModel& model_;
  PpoConfig cfg_;
  AdamState adam_;
  double lr_;
  bool lr_halved_ = false;
};

// ------------------------------------------------------------------ controllers

/// Evaluation-time controller: acts at the policy mean (or samples).
class PolicyController : public ScheduleController {
 public:
  explicit PolicyController(const PolicyModel& model, bool stochastic = false);
  BudgetVariant budget_variant() const override { return model_.variant; }
  PcAction next_action(const SolverState& state, SeededRng& rng) override;

 private:
  const PolicyModel& model_;
  bool stochastic_;
};

/// Training-time controller: samples actions with its own stream and records
/// what the PPO update needs.
class RolloutController : public ScheduleController {
 public:
  struct Step {
    Features raw_state{};
    Transition transition;
    int record = -1;  // index of the accepted level record, -1 if rejected
  };

  RolloutController(const PolicyModel& model, SeededRng rng);
  BudgetVariant budget_variant() const override { return model_.variant; }
  PcAction next_action(const SolverState& state, SeededRng& engine_rng) override;
  void on_rejected() override;
  void on_accepted(const SolverState& state, const LevelRecord& record) override;

  std::vector<Step>& steps() { return steps_; }

 private:
  const PolicyModel& model_;
  SeededRng rng_;
  std::vector<Step> steps_;
  int accepted_ = 0;
};

// ------------------------------------------------------------------ training

struct TrainingInstance {
  std::unique_ptr<HomotopyProblem> problem;
  SolveLimits limits;
};

using InstanceSampler = std::function<TrainingInstance(SeededRng&)>;

struct Episode {
  std::vector<Transition> steps;
  std::vector<Features> raw_states;
  SolveTrace trace;
  double total_reward = 0.0;
};

/// Runs one solve with a sampling controller and attaches rewards. Rejected
/// steps earn 0; the terminal bonus goes to the final action.
Episode run_episode(const PolicyModel& model, TrainingInstance& instance, const RewardConfig& reward,
                    SeededRng& solver_rng, SeededRng& policy_rng);

struct CurvePoint {
  long env_steps = 0;
  double mean_reward = 0.0;
  double mean_iters = 0.0;
};

struct TrainConfig {
  long total_env_steps = 300000;
  PpoConfig ppo;
  RewardConfig reward;
  /// Written every `checkpoint_every` updates when non-empty.
  std::string checkpoint_path;
  int checkpoint_every = 5;
  /// Worker threads for rollouts (results do not depend on it).
  int threads = 1;
  /// Stop after this many updates (for tests of checkpoint/resume); 0 = no limit.
  int max_updates = 0;
  bool verbose = false;
};

/// Everything needed to resume training bit-for-bit.
struct TrainState {
  PolicyModel model;
  AdamState adam;
  double learning_rate = 3e-4;
  bool lr_halved = false;
  long env_steps = 0;
  long episodes = 0;
  int updates = 0;
  std::vector<CurvePoint> curve;
  PolicyModel best;
  double best_reward = -1e300;
};

struct TrainResult {
  TrainState state;
  bool diverged = false;
  std::string diagnostic;
};

TrainResult train(const InstanceSampler& sampler, PolicyModel init, const TrainConfig& cfg, std::uint64_t seed);
TrainResult resume_training(const InstanceSampler& sampler, TrainState state, const TrainConfig& cfg,
                            std::uint64_t seed);

void save_train_state(const TrainState& state, const std::string& path);
TrainState load_train_state(const std::string& path);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

// ------------------------------------------------------------------ serialization

constexpr int kPolicyFormatVersion = 1;

std::string policy_to_json(const PolicyModel& model);
/// Throws VersionError on malformed text, version or shape mismatch.
PolicyModel policy_from_json(const std::string& text, const std::vector<int>& expected_hidden = {16, 16});
void save_policy(const PolicyModel& model, const std::string& path);
PolicyModel load_policy(const std::string& path, const std::vector<int>& expected_hidden = {16, 16});

}  // namespace npc::rl
