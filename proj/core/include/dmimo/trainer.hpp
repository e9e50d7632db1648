#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dmimo/channel.hpp"
#include "dmimo/config.hpp"
#include "dmimo/mse.hpp"
#include "dmimo/network.hpp"

namespace dmimo {

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  int batch_size = 1000;
  int iterations = 1000;
  Optimizer optimizer = Optimizer::kAdam;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // The sum MSE sits around 1e-8-1e-6, far below Adam's epsilon, so the
  // gradients fed to the optimizer are scaled by this constant (direction
  // unchanged). Logged and reported losses are always the exact unscaled
  // objective.
  double loss_scale = 1e8;
  // Empty: fresh mini-batches from the seeded generator each iteration.
  // Otherwise: a dataset file, consumed as cyclic contiguous batches.
  std::string fixed_dataset_path;
  int eval_every = 50;
  std::string checkpoint_path;  // best-held-out checkpoint; empty disables saving
  int holdout_size = 2000;
  bool log_input = false;
};

void validate(const TrainConfig& config);

struct TrainLogRow {
  int iteration = 0;
  double loss = 0.0;
  double holdout_mean = 0.0;
  double elapsed_seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;            // one per evaluation point
  std::vector<double> iteration_loss;       // exact objective, every iteration
  bool diverged = false;
};

void write_train_log(const TrainLog& log, const std::string& path);

struct TrainResult {
  NetworkParams final_params;
  NetworkParams best_params;  // lowest held-out mean seen
  double best_holdout_mean = 0.0;
  int best_iteration = 0;
  TrainLog log;
};

/// Mean sum MSE over the batch and its gradient with respect to every
/// trainable parameter. Runs a train-mode forward pass (so batch statistics
/// are used and running statistics advance in `params`).
struct LossAndGrad {
  double loss = 0.0;
  ParamGradients grads;
};

LossAndGrad loss_and_grad(NetworkParams& params, const std::vector<ChannelInstance>& batch,
                          const SystemConfig& config);

/// Unsupervised training: each iteration feeds a mini-batch of fading
/// instances forward, uses the mean closed-form sum MSE as the loss, and
/// backpropagates it into an optimizer step. Held-out evaluation every
/// `eval_every` iterations (and at the end) drives best-checkpoint selection.
/// The held-out set is generated from a seed derived from, and disjoint
/// from, the training data streams. A nonfinite loss or an infeasible
/// network output aborts training, restores the best evaluated parameters,
/// and returns with `log.diverged` set.
TrainResult train(const NetworkArch& arch, const TrainConfig& train_config,
                  const SystemConfig& system_config, std::mt19937_64& init_rng);

/// Held-out set used by train(); exposed so evaluations can target the same
/// instances.
std::vector<ChannelInstance> holdout_set(const SystemConfig& system_config, int count);

struct EvalSummary {
  double mean = 0.0;
  double median = 0.0;
  std::vector<double> sorted_values;  // CDF support
  std::vector<double> quantiles;      // (i+1)/n, spans (0, 1]
};

EvalSummary summarize(std::vector<double> values);

struct EvalResult {
  std::vector<MseReport> reports;  // one per instance, dataset order
  EvalSummary summary;
};

/// Infer-mode network evaluation over a dataset.
EvalResult evaluate(const NetworkParams& params, const std::vector<ChannelInstance>& dataset,
                    const SystemConfig& config);

/// Same fixed allocation applied to every instance.
EvalResult evaluate(const PowerAllocation& alloc, const std::vector<ChannelInstance>& dataset,
                    const SystemConfig& config);

}  // namespace dmimo
