#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using dmimo::cli::ScenarioOptions;

void add_scenario_flags(CLI::App* cmd, ScenarioOptions& scenario) {
  cmd->add_option("--K", scenario.config.num_users, "Number of users")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--M", scenario.config.num_raus, "Number of RAUs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--N", scenario.config.antennas_per_rau, "Antennas per RAU")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--tau", scenario.config.num_pilots, "Number of orthogonal pilots")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--r", scenario.config.cell_radius_m, "Cell circumradius, meters")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--zeta", scenario.config.pathloss_exponent, "Path-loss exponent")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--shadow-std", scenario.config.shadow_std_db,
                  "Shadow fading standard deviation, dB")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--p-tot", scenario.pilot_power_watts,
                  "Per-user total pilot power, Watts")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--noise", scenario.config.noise_power, "Noise power, Watts")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--min-dist", scenario.config.min_link_distance_m,
                  "Minimum user-RAU distance, meters")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--seed", scenario.config.rng_seed, "Channel data seed")
      ->capture_default_str();
  cmd->add_flag("--freeze-geometry", scenario.config.freeze_geometry,
                "Reuse one geometry for every instance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pilot power allocation for distributed massive MIMO: data generation, "
               "training, baselines, evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML key=value file");

  dmimo::cli::GenDataOptions gen_options;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a fading dataset");
  add_scenario_flags(gen_cmd, gen_options.scenario);
  gen_cmd->add_option("--count", gen_options.count, "Number of instances")
      ->required()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen_options.out_path, "Output dataset path")
      ->capture_default_str();

  dmimo::cli::TrainOptions train_options;
  train_options.train.checkpoint_path = "checkpoint.dmnn";
  CLI::App* train_cmd = app.add_subcommand("train", "Train the allocation network");
  add_scenario_flags(train_cmd, train_options.scenario);
  train_cmd->add_option("--hidden", train_options.hidden_sizes, "Hidden layer sizes")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--batch", train_options.train.batch_size, "Mini-batch size")
      ->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();
  train_cmd->add_option("--iterations", train_options.train.iterations, "Training iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--optimizer", train_options.optimizer_name, "Optimizer")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  train_cmd->add_option("--lr", train_options.train.learning_rate, "Learning rate")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_cmd->add_option("--beta1", train_options.train.adam_beta1, "Adam beta1")
      ->capture_default_str();
  train_cmd->add_option("--beta2", train_options.train.adam_beta2, "Adam beta2")
      ->capture_default_str();
  train_cmd->add_option("--adam-eps", train_options.train.adam_epsilon, "Adam epsilon")
      ->capture_default_str();
  train_cmd
      ->add_option("--loss-scale", train_options.train.loss_scale,
                   "Gradient scale fed to the optimizer (logged losses stay unscaled)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--dataset", train_options.train.fixed_dataset_path,
                        "Train on a fixed dataset file instead of fresh batches");
  train_cmd->add_option("--eval-every", train_options.train.eval_every,
                        "Held-out evaluation interval, iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--holdout", train_options.train.holdout_size,
                        "Held-out set size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_flag("--log-input", train_options.train.log_input,
                      "Feed log10 fading to the network");
  train_cmd->add_option("--checkpoint", train_options.train.checkpoint_path,
                        "Best-held-out checkpoint path")
      ->capture_default_str();
  train_cmd->add_option("--log", train_options.log_path, "Training log CSV path")
      ->capture_default_str();
  train_cmd->add_option("--init-seed", train_options.init_seed, "Parameter init seed")
      ->capture_default_str();

  dmimo::cli::EvalOptions eval_options;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate allocation methods on a dataset");
  add_scenario_flags(eval_cmd, eval_options.scenario);
  eval_cmd->add_option("--dataset", eval_options.dataset_path, "Dataset file")->required();
  eval_cmd->add_option("--methods", eval_options.methods, "Methods to evaluate")
      ->delimiter(',')
      ->check(CLI::IsMember({"dnn", "appa", "rpa", "espa", "contopt"}))
      ->capture_default_str();
  eval_cmd->add_option("--checkpoint", eval_options.checkpoint_path,
                       "Network checkpoint (required for method dnn)");
  eval_cmd->add_option("--out-dir", eval_options.out_dir, "Report output directory")
      ->capture_default_str();
  eval_cmd->add_option("--espa-budget", eval_options.espa_budget,
                       "Maximum exhaustive-search assignments per instance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->add_option("--espa-limit", eval_options.espa_limit,
                       "Run exhaustive search on only the first k instances (0 = all)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  eval_cmd->add_option("--contopt-steps", eval_options.contopt_steps,
                       "Continuous reference optimizer steps")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  eval_cmd->add_option("--contopt-step-size", eval_options.contopt_step_size,
                       "Continuous reference optimizer logit step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  dmimo::cli::GradcheckOptions gradcheck_options;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference verification of the gradients");
  add_scenario_flags(gradcheck_cmd, gradcheck_options.scenario);
  gradcheck_cmd->add_option("--hidden", gradcheck_options.hidden_sizes, "Hidden layer sizes")
      ->delimiter(',')
      ->capture_default_str();
  gradcheck_cmd->add_option("--instances", gradcheck_options.instances, "Seeded instances")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gradcheck_cmd->add_option("--coords", gradcheck_options.coordinates,
                            "Sampled coordinates per suite")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gradcheck_cmd->add_option("--tol-alloc", gradcheck_options.allocation_tolerance,
                            "Allocation gradient tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gradcheck_cmd->add_option("--tol-net", gradcheck_options.network_tolerance,
                            "Network gradient tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gradcheck_cmd->add_option("--gc-seed", gradcheck_options.seed, "Suite seed")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? dmimo::cli::kExitOk : dmimo::cli::kExitUsage;
  }

  const std::vector<std::string> argv_copy(argv, argv + argc);
  try {
    if (*gen_cmd) return dmimo::cli::run_gen_data(gen_options, argv_copy);
    if (*train_cmd) return dmimo::cli::run_train(train_options, argv_copy);
    if (*eval_cmd) return dmimo::cli::run_eval(eval_options, argv_copy);
    if (*gradcheck_cmd) return dmimo::cli::run_gradcheck(gradcheck_options, argv_copy);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dmimo::cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dmimo::cli::kExitRuntime;
  }
  return dmimo::cli::kExitUsage;
}
