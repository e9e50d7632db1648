#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "dmimo/allocators.hpp"
#include "dmimo/channel.hpp"
#include "dmimo/dataset.hpp"
#include "dmimo/gradcheck.hpp"
#include "dmimo/network.hpp"
#include "dmimo/rng.hpp"
#include "manifest.hpp"

namespace dmimo::cli {

namespace {

namespace fs = std::filesystem;

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void require_parent_dir(const std::string& path, const char* what) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
    throw std::runtime_error(std::string(what) + " directory does not exist: " +
                             parent.string());
}

void write_per_instance_csv(const std::string& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "instance,sum_mse\n";
  char buffer[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buffer, sizeof(buffer), "%zu,%.17g\n", i, values[i]);
    out << buffer;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_cdf_csv(const std::string& path, const EvalSummary& summary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "sum_mse,quantile\n";
  char buffer[64];
  for (std::size_t i = 0; i < summary.sorted_values.size(); ++i) {
    std::snprintf(buffer, sizeof(buffer), "%.17g,%.17g\n", summary.sorted_values[i],
                  summary.quantiles[i]);
    out << buffer;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

struct MethodTiming {
  std::string method;
  std::size_t instances = 0;
  double total_seconds = 0.0;
};

void write_timing_csv(const std::string& path, const std::vector<MethodTiming>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "method,instances,total_seconds,per_instance_seconds\n";
  char buffer[128];
  for (const MethodTiming& row : rows) {
    const double per_instance =
        row.instances > 0 ? row.total_seconds / static_cast<double>(row.instances) : 0.0;
    std::snprintf(buffer, sizeof(buffer), "%s,%zu,%.6f,%.9f\n", row.method.c_str(),
                  row.instances, row.total_seconds, per_instance);
    out << buffer;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

/// Allocations produced by one method over (a prefix of) the dataset, plus
/// the wall time spent producing them (scoring is not part of the method).
struct MethodRun {
  std::vector<PowerAllocation> allocations;
  double seconds = 0.0;
};

MethodRun run_method(const std::string& method, const std::vector<ChannelInstance>& dataset,
                     const SystemConfig& config, const EvalOptions& options) {
  MethodRun run;
  const auto start = std::chrono::steady_clock::now();
  if (method == "appa") {
    const PowerAllocation alloc = appa(config);
    run.allocations.assign(dataset.size(), alloc);
  } else if (method == "rpa") {
    run.allocations.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      auto rng = make_stream(config.rng_seed ^ kAssignmentSalt, i);
      run.allocations.push_back(to_allocation(rpa(config, rng), config));
    }
  } else if (method == "espa") {
    const std::size_t limit = options.espa_limit > 0
                                  ? std::min<std::size_t>(options.espa_limit, dataset.size())
                                  : dataset.size();
    run.allocations.reserve(limit);
    for (std::size_t i = 0; i < limit; ++i) {
      const EspaResult result = espa(dataset[i], config, options.espa_budget);
      run.allocations.push_back(to_allocation(result.assignment, config));
    }
  } else if (method == "contopt") {
    const PowerAllocation init = appa(config);
    run.allocations.reserve(dataset.size());
    for (const ChannelInstance& instance : dataset)
      run.allocations.push_back(continuous_opt(instance, config, init, options.contopt_steps,
                                               options.contopt_step_size));
  } else if (method == "dnn") {
    if (options.checkpoint_path.empty())
      throw std::runtime_error("method dnn needs --checkpoint");
    NetworkParams params = load_params(options.checkpoint_path);
    if (params.num_users != config.num_users || params.num_raus != config.num_raus ||
        params.num_pilots != config.num_pilots ||
        !params.pilot_power_total.isApprox(config.pilot_power_total))
      throw std::runtime_error("checkpoint scenario does not match the evaluation flags");
    const Eigen::MatrixXd inputs = batch_input(dataset, params.log_input);
    const ForwardTrace trace = forward(params, inputs, ForwardMode::kInfer);
    run.allocations.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
      run.allocations.push_back(
          allocation_from_output(params, trace.output.row(static_cast<Eigen::Index>(i))));
  } else {
    throw std::runtime_error("unknown method: " + method);
  }
  run.seconds = seconds_since(start);
  return run;
}

}  // namespace

int run_gen_data(const GenDataOptions& options, const std::vector<std::string>& argv) {
  const SystemConfig config = options.scenario.resolved();
  validate(config);
  require_parent_dir(options.out_path, "output");

  const std::vector<ChannelInstance> instances = generate_dataset(config, options.count);
  write_dataset(options.out_path, instances);

  RunManifest manifest;
  manifest.command = "gen-data";
  manifest.argv = argv;
  manifest.config = scenario_json(config);
  manifest.config["count"] = options.count;
  manifest.artifacts = {options.out_path};
  write_manifest(manifest, options.out_path + ".manifest.json");

  std::cout << "wrote " << instances.size() << " instances (" << config.num_users << " users x "
            << config.num_raus << " RAUs) to " << options.out_path << "\n";
  return kExitOk;
}

int run_train(const TrainOptions& options, const std::vector<std::string>& argv) {
  const SystemConfig config = options.scenario.resolved();
  validate(config);

  TrainConfig train_config = options.train;
  train_config.optimizer = options.optimizer_name == "sgd" ? Optimizer::kSgd : Optimizer::kAdam;
  validate(train_config);
  if (!train_config.checkpoint_path.empty())
    require_parent_dir(train_config.checkpoint_path, "checkpoint");
  require_parent_dir(options.log_path, "train log");

  const NetworkArch arch = make_arch(config, options.hidden_sizes);
  auto init_rng = make_stream(options.init_seed, kInitStream);
  const TrainResult result = train(arch, train_config, config, init_rng);
  write_train_log(result.log, options.log_path);

  RunManifest manifest;
  manifest.command = "train";
  manifest.argv = argv;
  manifest.config = scenario_json(config);
  manifest.config["hidden_sizes"] = options.hidden_sizes;
  manifest.config["batch_size"] = train_config.batch_size;
  manifest.config["iterations"] = train_config.iterations;
  manifest.config["optimizer"] = options.optimizer_name;
  manifest.config["learning_rate"] = train_config.learning_rate;
  manifest.config["loss_scale"] = train_config.loss_scale;
  manifest.config["eval_every"] = train_config.eval_every;
  manifest.config["holdout_size"] = train_config.holdout_size;
  manifest.config["fixed_dataset"] = train_config.fixed_dataset_path;
  manifest.config["log_input"] = train_config.log_input;
  manifest.config["init_seed"] = options.init_seed;
  manifest.artifacts = {options.log_path};
  if (!train_config.checkpoint_path.empty())
    manifest.artifacts.push_back(train_config.checkpoint_path);
  write_manifest(manifest, options.log_path + ".manifest.json");

  if (!result.log.iteration_loss.empty())
    std::cout << "final training loss " << result.log.iteration_loss.back() << " after "
              << result.log.iteration_loss.size() << " iterations\n";
  std::cout << "best held-out mean sum MSE " << result.best_holdout_mean << " at iteration "
            << result.best_iteration << "\n";
  if (result.log.diverged) {
    std::cerr << "training diverged; kept the last good checkpoint\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int run_eval(const EvalOptions& options, const std::vector<std::string>& argv) {
  const SystemConfig config = options.scenario.resolved();
  validate(config);

  const std::vector<ChannelInstance> dataset = read_dataset(options.dataset_path);
  if (dataset.empty()) throw std::runtime_error("dataset is empty: " + options.dataset_path);
  if (dataset.front().num_users() != config.num_users ||
      dataset.front().num_raus() != config.num_raus)
    throw std::runtime_error("dataset dimensions do not match the scenario flags");

  fs::create_directories(options.out_dir);
  const auto out_file = [&](const std::string& name) {
    return (fs::path(options.out_dir) / name).string();
  };

  RunManifest manifest;
  manifest.command = "eval";
  manifest.argv = argv;
  manifest.config = scenario_json(config);
  manifest.config["dataset"] = options.dataset_path;
  manifest.config["methods"] = options.methods;
  manifest.config["espa_budget"] = options.espa_budget;
  manifest.config["espa_limit"] = options.espa_limit;
  manifest.config["contopt_steps"] = options.contopt_steps;
  manifest.config["contopt_step_size"] = options.contopt_step_size;
  if (!options.checkpoint_path.empty())
    manifest.config["checkpoint"] = options.checkpoint_path;

  std::vector<MethodTiming> timings;
  for (const std::string& method : options.methods) {
    const MethodRun run = run_method(method, dataset, config, options);

    std::vector<double> values;
    values.reserve(run.allocations.size());
    for (std::size_t i = 0; i < run.allocations.size(); ++i)
      values.push_back(sum_mse(dataset[i], run.allocations[i], config));
    const EvalSummary summary = summarize(values);

    const std::string per_instance_path = out_file(method + "_per_instance.csv");
    const std::string cdf_path = out_file(method + "_cdf.csv");
    write_per_instance_csv(per_instance_path, values);
    write_cdf_csv(cdf_path, summary);
    manifest.artifacts.push_back(per_instance_path);
    manifest.artifacts.push_back(cdf_path);
    timings.push_back({method, values.size(), run.seconds});

    std::cout << method << ": " << values.size() << " instances, mean " << summary.mean
              << ", median " << summary.median << ", " << run.seconds << " s\n";
  }

  const std::string timing_path = out_file("timing.csv");
  write_timing_csv(timing_path, timings);
  manifest.artifacts.push_back(timing_path);
  write_manifest(manifest, out_file("manifest.json"));
  return kExitOk;
}

int run_gradcheck(const GradcheckOptions& options, const std::vector<std::string>& argv) {
  const SystemConfig config = options.scenario.resolved();
  validate(config);
  (void)argv;

  const GradCheckReport allocation = check_allocation_gradient(
      config, options.instances, options.coordinates, options.seed,
      options.allocation_tolerance);
  const GradCheckReport network =
      check_network_gradient(config, options.hidden_sizes, options.instances,
                             options.coordinates, options.seed, options.network_tolerance);

  bool all_passed = true;
  for (const GradCheckReport& report : {allocation, network}) {
    std::printf("%s: max relative error %.3e over %d coordinates (tolerance %.1e) -- %s\n",
                report.suite.c_str(), report.max_rel_error, report.coordinates,
                report.tolerance, report.passed ? "pass" : "FAIL");
    all_passed = all_passed && report.passed;
  }
  return all_passed ? kExitOk : kExitVerification;
}

}  // namespace dmimo::cli
