#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmimo/config.hpp"
#include "dmimo/trainer.hpp"

namespace dmimo::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitVerification = 3;

/// Scenario flags shared by all subcommands. `pilot_power_watts` is applied
/// to the config after parsing so a changed --K resizes the power vector.
struct ScenarioOptions {
  SystemConfig config;
  double pilot_power_watts = 6.0;

  SystemConfig resolved() const {
    SystemConfig resolved_config = config;
    resolved_config.set_uniform_pilot_power(pilot_power_watts);
    return resolved_config;
  }
};

struct GenDataOptions {
  ScenarioOptions scenario;
  int count = 0;
  std::string out_path = "dataset.txt";
};

struct TrainOptions {
  ScenarioOptions scenario;
  TrainConfig train;
  std::vector<int> hidden_sizes = {64, 128, 128, 128, 64};
  std::string optimizer_name = "adam";
  std::uint64_t init_seed = 1;
  std::string log_path = "train_log.csv";
};

struct EvalOptions {
  ScenarioOptions scenario;
  std::string dataset_path;
  std::vector<std::string> methods = {"appa"};
  std::string checkpoint_path;
  std::string out_dir = ".";
  std::int64_t espa_budget = 20'000'000;
  int espa_limit = 0;  // 0: all instances
  int contopt_steps = 500;
  double contopt_step_size = 0.1;
};

struct GradcheckOptions {
  ScenarioOptions scenario;
  std::vector<int> hidden_sizes = {64, 128, 128, 128, 64};
  int instances = 5;
  int coordinates = 50;
  double allocation_tolerance = 1e-5;
  double network_tolerance = 1e-4;
  std::uint64_t seed = 1;
};

int run_gen_data(const GenDataOptions& options, const std::vector<std::string>& argv);
int run_train(const TrainOptions& options, const std::vector<std::string>& argv);
int run_eval(const EvalOptions& options, const std::vector<std::string>& argv);
int run_gradcheck(const GradcheckOptions& options, const std::vector<std::string>& argv);

}  // namespace dmimo::cli
