#pragma once

// Command-line front end: npc train|solve|bench|compare|ablate.
//
// Exit codes: 0 success, 1 more than 10% of bench trials failed, 2 invalid
// configuration, 3 training diverged.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "npc/experiment.hpp"
#include "npc/rl.hpp"

namespace npc::cli {

constexpr int kExitOk = 0;
constexpr int kExitTrialsFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

/// Everything a command needs. Loaded from a JSON file, then overridden by
/// command-line flags. See README.md for the file schema.
struct ExperimentConfig {
  exp::Task task;
  std::uint64_t seed = 0;
  int trials = 50;
  /// Empty selects the classic controller.
  std::string policy;
  std::string out = "out";
  rl::StateMask mask{};
  rl::RewardConfig reward;
  rl::TrainConfig train;
  std::vector<int> sweep_levels;
  std::vector<double> sweep_budgets;
  int threads = 0;
};

/// Defaults for a problem kind (task, reward, limits).
ExperimentConfig default_config(ProblemKind kind);

/// Applies a JSON config object on top of `base`. Throws ConfigError on
/// unknown keys or bad values.
ExperimentConfig apply_config_json(const std::string& text, ExperimentConfig base);
ExperimentConfig load_config(const std::string& path);

/// Runs one command line (argv[0] is the program name).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace npc::cli
