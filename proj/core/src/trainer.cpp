#include "dmimo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dmimo/dataset.hpp"
#include "dmimo/rng.hpp"

namespace dmimo {

void validate(const TrainConfig& config) {
  if (config.batch_size < 2)
    throw std::invalid_argument("TrainConfig: batch size must be at least 2 (batch norm)");
  if (config.iterations < 1)
    throw std::invalid_argument("TrainConfig: iterations must be positive");
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate))
    throw std::invalid_argument("TrainConfig: learning rate must be finite and nonnegative");
  if (!(config.loss_scale > 0.0))
    throw std::invalid_argument("TrainConfig: loss scale must be positive");
  if (config.adam_beta1 < 0.0 || config.adam_beta1 >= 1.0 || config.adam_beta2 < 0.0 ||
      config.adam_beta2 >= 1.0 || !(config.adam_epsilon > 0.0))
    throw std::invalid_argument("TrainConfig: invalid Adam constants");
  if (config.eval_every < 1)
    throw std::invalid_argument("TrainConfig: eval_every must be positive");
  if (config.holdout_size < 1)
    throw std::invalid_argument("TrainConfig: holdout size must be positive");
}

LossAndGrad loss_and_grad(NetworkParams& params, const std::vector<ChannelInstance>& batch,
                          const SystemConfig& config) {
  if (batch.size() < 2)
    throw std::invalid_argument("loss_and_grad: need at least 2 instances per batch");

  const Eigen::MatrixXd inputs = batch_input(batch, params.log_input);
  ForwardTrace trace = forward(params, inputs, ForwardMode::kTrain);

  const Eigen::Index s = inputs.rows();
  const double inv_s = 1.0 / static_cast<double>(s);
  Eigen::MatrixXd dloss_doutput(s, trace.output.cols());

  LossAndGrad result;
  for (Eigen::Index i = 0; i < s; ++i) {
    PowerAllocation alloc = allocation_from_output(params, trace.output.row(i));
    validate(alloc, config);  // feasibility is architectural; assert per batch
    result.loss += inv_s * sum_mse(batch[i], alloc, config);
    const Eigen::MatrixXd grad = sum_mse_gradient(batch[i], alloc, config);
    for (int k = 0; k < params.num_users; ++k)
      dloss_doutput.row(i).segment(k * params.num_pilots, params.num_pilots) =
          inv_s * grad.row(k);
  }
  result.grads = backward(params, trace, dloss_doutput);
  return result;
}

namespace {

struct AdamSlot {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
};

struct AdamState {
  struct Hidden {
    AdamSlot weight, bias, bn_scale, bn_shift;
  };
  std::vector<Hidden> hidden;
  AdamSlot output_weight, output_bias;
  std::int64_t step = 0;
};

AdamSlot make_slot(Eigen::Index rows, Eigen::Index cols) {
  return {Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd::Zero(rows, cols)};
}

AdamState make_adam_state(const NetworkParams& params) {
  AdamState state;
  state.hidden.resize(params.hidden.size());
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    const HiddenLayer& layer = params.hidden[l];
    state.hidden[l].weight = make_slot(layer.weight.rows(), layer.weight.cols());
    state.hidden[l].bias = make_slot(layer.bias.size(), 1);
    state.hidden[l].bn_scale = make_slot(layer.bn_scale.size(), 1);
    state.hidden[l].bn_shift = make_slot(layer.bn_shift.size(), 1);
  }
  state.output_weight = make_slot(params.output.weight.rows(), params.output.weight.cols());
  state.output_bias = make_slot(params.output.bias.size(), 1);
  return state;
}

void apply_update(NetworkParams& params, const ParamGradients& grads, AdamState& state,
                  const TrainConfig& config) {
  ++state.step;
  const double corr1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));

  auto update = [&](auto& param, const auto& raw_grad, AdamSlot& slot) {
    const auto grad = (config.loss_scale * raw_grad.array()).eval();
    if (config.optimizer == Optimizer::kSgd) {
      param.array() -= config.learning_rate * grad;
      return;
    }
    slot.m.array() = config.adam_beta1 * slot.m.array() + (1.0 - config.adam_beta1) * grad;
    slot.v.array() =
        config.adam_beta2 * slot.v.array() + (1.0 - config.adam_beta2) * grad.square();
    param.array() -= config.learning_rate * (slot.m.array() / corr1) /
                     ((slot.v.array() / corr2).sqrt() + config.adam_epsilon);
  };

  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    HiddenLayer& layer = params.hidden[l];
    const ParamGradients::HiddenGrads& g = grads.hidden[l];
    update(layer.weight, g.weight, state.hidden[l].weight);
    if (l > 0) update(layer.bias, g.bias, state.hidden[l].bias);  // first bias frozen
    update(layer.bn_scale, g.bn_scale, state.hidden[l].bn_scale);
    update(layer.bn_shift, g.bn_shift, state.hidden[l].bn_shift);
  }
  update(params.output.weight, grads.output_weight, state.output_weight);
  update(params.output.bias, grads.output_bias, state.output_bias);
}

}  // namespace

std::vector<ChannelInstance> holdout_set(const SystemConfig& system_config, int count) {
  // Reserved index range rather than a derived seed: the holdout must come
  // from the same scenario -- including the same frozen geometry when that is
  // enabled -- while staying disjoint from the training streams.
  return generate_dataset(system_config, count, kHoldoutBaseIndex);
}

TrainResult train(const NetworkArch& arch, const TrainConfig& train_config,
                  const SystemConfig& system_config, std::mt19937_64& init_rng) {
  validate(train_config);
  validate(system_config);

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  NetworkParams params =
      init_params(arch, system_config, init_rng, train_config.log_input);
  AdamState adam = make_adam_state(params);

  std::vector<ChannelInstance> fixed_data;
  if (!train_config.fixed_dataset_path.empty()) {
    fixed_data = read_dataset(train_config.fixed_dataset_path);
    if (static_cast<int>(fixed_data.size()) < train_config.batch_size)
      throw std::invalid_argument("train: fixed dataset has fewer instances than one batch");
    for (const ChannelInstance& instance : fixed_data)
      if (instance.num_users() != system_config.num_users ||
          instance.num_raus() != system_config.num_raus)
        throw std::invalid_argument("train: fixed dataset shape does not match scenario");
  }

  const std::vector<ChannelInstance> holdout =
      holdout_set(system_config, train_config.holdout_size);

  TrainResult result;
  result.best_params = params;
  result.best_holdout_mean = evaluate(params, holdout, system_config).summary.mean;
  result.best_iteration = 0;

  const int s = train_config.batch_size;
  for (int iter = 1; iter <= train_config.iterations; ++iter) {
    std::vector<ChannelInstance> batch;
    if (fixed_data.empty()) {
      batch = generate_dataset(system_config, s,
                               static_cast<std::int64_t>(iter - 1) * s);
    } else {
      batch.reserve(s);
      const std::size_t n = fixed_data.size();
      const std::size_t first = (static_cast<std::size_t>(iter - 1) * s) % n;
      for (int j = 0; j < s; ++j) batch.push_back(fixed_data[(first + j) % n]);
    }

    double loss = std::numeric_limits<double>::quiet_NaN();
    bool step_ok = true;
    try {
      const LossAndGrad lg = loss_and_grad(params, batch, system_config);
      loss = lg.loss;
      if (std::isfinite(loss)) {
        apply_update(params, lg.grads, adam, train_config);
      } else {
        step_ok = false;
      }
    } catch (const BoundaryPointError&) {
      // A softmax group saturated all the way to an exact one-hot; the
      // objective is no longer differentiable there. Treat as divergence.
      step_ok = false;
    } catch (const std::invalid_argument&) {
      // Inside the loop this can only be the per-sample feasibility check,
      // i.e. the network emitted a nonfinite allocation.
      step_ok = false;
    }
    if (!step_ok) {
      result.log.diverged = true;
      params = result.best_params;  // discard the broken step
      break;
    }
    result.log.iteration_loss.push_back(loss);

    if (iter % train_config.eval_every == 0 || iter == train_config.iterations) {
      const double holdout_mean = evaluate(params, holdout, system_config).summary.mean;
      result.log.rows.push_back({iter, loss, holdout_mean, elapsed()});
      if (holdout_mean < result.best_holdout_mean) {
        result.best_holdout_mean = holdout_mean;
        result.best_iteration = iter;
        result.best_params = params;
        if (!train_config.checkpoint_path.empty())
          save_params(result.best_params, train_config.checkpoint_path);
      }
    }
  }

  if (!train_config.checkpoint_path.empty() && result.best_iteration == 0)
    save_params(result.best_params, train_config.checkpoint_path);
  result.final_params = std::move(params);
  return result;
}

EvalSummary summarize(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  EvalSummary summary;
  summary.mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  summary.median =
      n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  summary.quantiles.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    summary.quantiles[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  summary.sorted_values = std::move(values);
  return summary;
}

EvalResult evaluate(const NetworkParams& params, const std::vector<ChannelInstance>& dataset,
                    const SystemConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (params.num_users != config.num_users || params.num_raus != config.num_raus ||
      params.num_pilots != config.num_pilots)
    throw std::invalid_argument("evaluate: network scenario does not match config");

  NetworkParams working = params;  // infer mode leaves parameters untouched
  const Eigen::MatrixXd inputs = batch_input(dataset, params.log_input);
  const ForwardTrace trace = forward(working, inputs, ForwardMode::kInfer);

  EvalResult result;
  result.reports.reserve(dataset.size());
  std::vector<double> values;
  values.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    PowerAllocation alloc =
        allocation_from_output(params, trace.output.row(static_cast<Eigen::Index>(i)));
    validate(alloc, config);
    MseReport report = per_link_mse(dataset[i], alloc, config);
    report.method_tag = "dnn";
    values.push_back(report.sum_mse);
    result.reports.push_back(std::move(report));
  }
  result.summary = summarize(std::move(values));
  return result;
}

EvalResult evaluate(const PowerAllocation& alloc, const std::vector<ChannelInstance>& dataset,
                    const SystemConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  validate(alloc, config);

  EvalResult result;
  result.reports.reserve(dataset.size());
  std::vector<double> values;
  values.reserve(dataset.size());
  for (const ChannelInstance& instance : dataset) {
    MseReport report = per_link_mse(instance, alloc, config);
    report.method_tag = "fixed";
    values.push_back(report.sum_mse);
    result.reports.push_back(std::move(report));
  }
  result.summary = summarize(std::move(values));
  return result;
}

void write_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open train log for writing: " + path);
  out << "iteration,loss,holdout_mean,elapsed_s\n";
  char buffer[128];
  for (const TrainLogRow& row : log.rows) {
    std::snprintf(buffer, sizeof(buffer), "%d,%.17g,%.17g,%.6f\n", row.iteration, row.loss,
                  row.holdout_mean, row.elapsed_seconds);
    out << buffer;
  }
  if (!out) throw std::runtime_error("train log write failed: " + path);
}

}  // namespace dmimo
