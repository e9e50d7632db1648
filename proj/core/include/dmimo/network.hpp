#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmimo/channel.hpp"
#include "dmimo/config.hpp"
#include "dmimo/mse.hpp"

namespace dmimo {

/// Layer widths n_0 .. n_L. n_0 must equal num_users * num_raus (flattened
/// fading input) and n_L must equal num_users * num_pilots (one logit group
/// of num_pilots entries per user).
struct NetworkArch {
  std::vector<int> layer_sizes;

  int depth() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
};

inline const std::vector<int> kDefaultHiddenSizes = {64, 128, 128, 128, 64};

NetworkArch make_arch(const SystemConfig& config, const std::vector<int>& hidden_sizes);
void validate(const NetworkArch& arch, const SystemConfig& config);

struct HiddenLayer {
  Eigen::MatrixXd weight;  // n_l x n_{l-1}
  Eigen::VectorXd bias;    // frozen to zero for the first hidden layer
  Eigen::VectorXd bn_scale;
  Eigen::VectorXd bn_shift;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

struct OutputLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Full parameter set plus the scenario facts the network needs to be
/// self-contained at inference time (output grouping and per-user power
/// scale). These travel with the checkpoint.
struct NetworkParams {
  NetworkArch arch;
  int num_users = 0;
  int num_raus = 0;
  int num_pilots = 0;
  Eigen::VectorXd pilot_power_total;
  bool log_input = false;  // feed log10(fading) instead of raw fading

  std::vector<HiddenLayer> hidden;
  OutputLayer output;
};

void validate(const NetworkParams& params);

/// He-initialized parameters: weights ~ N(0, 2/n_{l-1}), biases zero,
/// batch-norm scale 1 / shift 0, running statistics (0, 1).
NetworkParams init_params(const NetworkArch& arch, const SystemConfig& config,
                          std::mt19937_64& rng, bool log_input = false);

struct LayerTrace {
  Eigen::MatrixXd pre_bn;      // W o_{l-1} + b, per sample row
  Eigen::MatrixXd normalized;  // batch-norm output before scale/shift
  Eigen::MatrixXd output;      // ReLU(scale * normalized + shift)
  Eigen::VectorXd mean;        // statistics used for normalization
  Eigen::VectorXd variance;
};

struct ForwardTrace {
  bool train_mode = false;
  Eigen::MatrixXd input;   // s x n_0, after the optional log transform
  std::vector<LayerTrace> hidden;
  Eigen::MatrixXd logits;  // s x n_L
  Eigen::MatrixXd weights;  // grouped softmax weights, rows sum to 1 per group
  Eigen::MatrixXd output;   // weights scaled by the per-user power budget
};

enum class ForwardMode { kTrain, kInfer };

/// Counts multiply-accumulate operations of the dense-layer products
/// (the O(n_{l-1} n_l) terms); see docs/cost_model.md for what is excluded.
struct MacCounter {
  std::int64_t macs = 0;
};

/// Runs the network on a batch with one sample per row, columns ordered
/// user-major: column k*num_raus + m holds the fading of user k at RAU m.
/// Train mode normalizes with batch statistics and updates the running
/// statistics in `params`; infer mode uses the running statistics and leaves
/// `params` untouched. Output columns are user-major over pilots: column
/// k*num_pilots + b is user k's power on pilot b; each user's group is a
/// scaled softmax of its logits, so rows satisfy the power constraint by
/// construction.
ForwardTrace forward(NetworkParams& params, const Eigen::Ref<const Eigen::MatrixXd>& batch,
                     ForwardMode mode, MacCounter* counter = nullptr);

/// Gradients for every trainable parameter. The first hidden layer's bias is
/// frozen, so its gradient stays empty.
struct ParamGradients {
  struct HiddenGrads {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;  // empty for the first hidden layer
    Eigen::VectorXd bn_scale;
    Eigen::VectorXd bn_shift;
  };
  std::vector<HiddenGrads> hidden;
  Eigen::MatrixXd output_weight;
  Eigen::VectorXd output_bias;
};

/// Backpropagates d(loss)/d(output) through the scaled grouped softmax, the
/// dense layers, ReLU, and batch normalization (including the batch-statistics
/// terms). The trace must come from a train-mode forward pass.
ParamGradients backward(const NetworkParams& params, const ForwardTrace& trace,
                        const Eigen::Ref<const Eigen::MatrixXd>& dloss_doutput);

/// Flattens channel instances into network input rows (user-major fading
/// order, optionally log10-transformed).
Eigen::MatrixXd batch_input(const std::vector<ChannelInstance>& instances, bool log_input);

/// Reshapes one network output row into a per-user allocation matrix.
PowerAllocation allocation_from_output(const NetworkParams& params,
                                       const Eigen::Ref<const Eigen::RowVectorXd>& output_row);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary checkpoint: self-describing header (format version, scenario
/// dimensions, per-user power budget, layer sizes) followed by all parameter
/// arrays as little-endian 64-bit floats. Round-trips bit-exactly.
void save_params(const NetworkParams& params, const std::string& path);
NetworkParams load_params(const std::string& path);
NetworkParams load_params(const std::string& path, const NetworkArch& expected);

}  // namespace dmimo
