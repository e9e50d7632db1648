#include "dmimo/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace dmimo {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {
constexpr double kBnEpsilon = 1e-5;
constexpr double kBnMomentum = 0.9;
}  // namespace

NetworkArch make_arch(const SystemConfig& config, const std::vector<int>& hidden_sizes) {
  NetworkArch arch;
  arch.layer_sizes.reserve(hidden_sizes.size() + 2);
  arch.layer_sizes.push_back(config.num_users * config.num_raus);
  arch.layer_sizes.insert(arch.layer_sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
  arch.layer_sizes.push_back(config.num_users * config.num_pilots);
  validate(arch, config);
  return arch;
}

void validate(const NetworkArch& arch, const SystemConfig& config) {
  if (arch.layer_sizes.size() < 2)
    throw std::invalid_argument("NetworkArch: need at least input and output layers");
  for (int size : arch.layer_sizes)
    if (size < 1) throw std::invalid_argument("NetworkArch: layer sizes must be positive");
  if (arch.input_size() != config.num_users * config.num_raus)
    throw std::invalid_argument("NetworkArch: input size must be num_users * num_raus");
  if (arch.output_size() != config.num_users * config.num_pilots)
    throw std::invalid_argument("NetworkArch: output size must be num_users * num_pilots");
}

void validate(const NetworkParams& params) {
  const int L = params.arch.depth();
  if (L < 1 || static_cast<int>(params.hidden.size()) != L - 1)
    throw std::invalid_argument("NetworkParams: layer count does not match architecture");
  if (params.num_users < 1 || params.num_raus < 1 || params.num_pilots < 1)
    throw std::invalid_argument("NetworkParams: invalid scenario dimensions");
  if (params.arch.input_size() != params.num_users * params.num_raus ||
      params.arch.output_size() != params.num_users * params.num_pilots)
    throw std::invalid_argument("NetworkParams: architecture does not match scenario");
  if (params.pilot_power_total.size() != params.num_users ||
      (params.pilot_power_total.array() <= 0.0).any())
    throw std::invalid_argument("NetworkParams: invalid per-user power budget");
  for (int l = 0; l < L - 1; ++l) {
    const HiddenLayer& layer = params.hidden[l];
    const int n = params.arch.layer_sizes[l + 1];
    const int n_prev = params.arch.layer_sizes[l];
    if (layer.weight.rows() != n || layer.weight.cols() != n_prev || layer.bias.size() != n ||
        layer.bn_scale.size() != n || layer.bn_shift.size() != n ||
        layer.running_mean.size() != n || layer.running_var.size() != n)
      throw std::invalid_argument("NetworkParams: hidden layer " + std::to_string(l + 1) +
                                  " has inconsistent shapes");
    if ((layer.running_var.array() < 0.0).any())
      throw std::invalid_argument("NetworkParams: negative running variance");
  }
  if (!params.hidden.empty() && !params.hidden.front().bias.isZero(0.0))
    throw std::invalid_argument("NetworkParams: first hidden bias must stay zero");
  if (params.output.weight.rows() != params.arch.output_size() ||
      params.output.weight.cols() != params.arch.layer_sizes[L - 1] ||
      params.output.bias.size() != params.arch.output_size())
    throw std::invalid_argument("NetworkParams: output layer has inconsistent shapes");
}

NetworkParams init_params(const NetworkArch& arch, const SystemConfig& config,
                          std::mt19937_64& rng, bool log_input) {
  validate(arch, config);
  validate(config);

  NetworkParams params;
  params.arch = arch;
  params.num_users = config.num_users;
  params.num_raus = config.num_raus;
  params.num_pilots = config.num_pilots;
  params.pilot_power_total = config.pilot_power_total;
  params.log_input = log_input;

  auto he_fill = [&rng](Eigen::MatrixXd& weight, int fan_in) {
    std::normal_distribution<double> draw(0.0, std::sqrt(2.0 / fan_in));
    for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = draw(rng);
  };

  const int L = arch.depth();
  params.hidden.resize(L - 1);
  for (int l = 0; l < L - 1; ++l) {
    const int n = arch.layer_sizes[l + 1];
    const int n_prev = arch.layer_sizes[l];
    HiddenLayer& layer = params.hidden[l];
    layer.weight.resize(n, n_prev);
    he_fill(layer.weight, n_prev);
    layer.bias = Eigen::VectorXd::Zero(n);
    layer.bn_scale = Eigen::VectorXd::Ones(n);
    layer.bn_shift = Eigen::VectorXd::Zero(n);
    layer.running_mean = Eigen::VectorXd::Zero(n);
    layer.running_var = Eigen::VectorXd::Ones(n);
  }
  params.output.weight.resize(arch.output_size(), arch.layer_sizes[L - 1]);
  he_fill(params.output.weight, arch.layer_sizes[L - 1]);
  params.output.bias = Eigen::VectorXd::Zero(arch.output_size());
  return params;
}

ForwardTrace forward(NetworkParams& params, const Eigen::Ref<const Eigen::MatrixXd>& batch,
                     ForwardMode mode, MacCounter* counter) {
  validate(params);
  const Eigen::Index s = batch.rows();
  if (batch.cols() != params.arch.input_size())
    throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                " columns, expected " +
                                std::to_string(params.arch.input_size()));
  if (!batch.allFinite()) throw std::invalid_argument("forward: nonfinite input");
  const bool train = mode == ForwardMode::kTrain;
  if (train && s < 2)
    throw std::invalid_argument("forward: train mode needs at least 2 samples for batch stats");
  if (s < 1) throw std::invalid_argument("forward: empty batch");

  ForwardTrace trace;
  trace.train_mode = train;
  // `batch` is the finished feature matrix; when params.log_input is set the
  // caller (see batch_input) has already applied the log transform.
  trace.input = batch;

  const int L = params.arch.depth();
  trace.hidden.resize(L - 1);
  const Eigen::MatrixXd* prev = &trace.input;
  for (int l = 0; l < L - 1; ++l) {
    HiddenLayer& layer = params.hidden[l];
    LayerTrace& t = trace.hidden[l];

    t.pre_bn.noalias() = *prev * layer.weight.transpose();
    if (l > 0) t.pre_bn.rowwise() += layer.bias.transpose();
    if (counter) counter->macs += static_cast<std::int64_t>(s) * layer.weight.size();

    if (train) {
      t.mean = t.pre_bn.colwise().mean();
      const Eigen::MatrixXd centered = t.pre_bn.rowwise() - t.mean.transpose();
      t.variance = centered.array().square().colwise().mean();
      // Running statistics keep the unbiased batch variance, as is
      // conventional; normalization uses the biased one.
      layer.running_mean = kBnMomentum * layer.running_mean + (1.0 - kBnMomentum) * t.mean;
      layer.running_var = kBnMomentum * layer.running_var +
                          (1.0 - kBnMomentum) * (static_cast<double>(s) / (s - 1)) * t.variance;
      t.normalized = centered.array().rowwise() *
                     (t.variance.array() + kBnEpsilon).rsqrt().transpose();
    } else {
      t.mean = layer.running_mean;
      t.variance = layer.running_var;
      t.normalized = (t.pre_bn.rowwise() - t.mean.transpose()).array().rowwise() *
                     (t.variance.array() + kBnEpsilon).rsqrt().transpose();
    }
    t.output = ((t.normalized.array().rowwise() * layer.bn_scale.transpose().array()).rowwise() +
                layer.bn_shift.transpose().array())
                   .max(0.0);
    prev = &t.output;
  }

  trace.logits.noalias() = *prev * params.output.weight.transpose();
  trace.logits.rowwise() += params.output.bias.transpose();
  if (counter) counter->macs += static_cast<std::int64_t>(s) * params.output.weight.size();

  // Per-user softmax over that user's pilot logits, then scale by the user's
  // power budget; rows land on the power simplex by construction.
  const int tau = params.num_pilots;
  trace.weights.resize(s, trace.logits.cols());
  trace.output.resize(s, trace.logits.cols());
  for (int k = 0; k < params.num_users; ++k) {
    auto group = trace.logits.middleCols(k * tau, tau);
    Eigen::MatrixXd w =
        (group.colwise() - group.rowwise().maxCoeff()).array().exp();
    w.array().colwise() /= w.rowwise().sum().array();
    trace.weights.middleCols(k * tau, tau) = w;
    trace.output.middleCols(k * tau, tau) = w * params.pilot_power_total(k);
  }
  return trace;
}

ParamGradients backward(const NetworkParams& params, const ForwardTrace& trace,
                        const Eigen::Ref<const Eigen::MatrixXd>& dloss_doutput) {
  if (!trace.train_mode)
    throw std::invalid_argument("backward: trace must come from a train-mode forward pass");
  if (dloss_doutput.rows() != trace.output.rows() ||
      dloss_doutput.cols() != trace.output.cols())
    throw std::invalid_argument("backward: gradient shape does not match trace output");

  const int L = params.arch.depth();
  const int tau = params.num_pilots;

  // Scaled grouped softmax: with p = P_k w and w = softmax(t),
  // dL/dt_b = P_k w_b (dL/dp_b - sum_c w_c dL/dp_c).
  Eigen::MatrixXd dlogits(trace.logits.rows(), trace.logits.cols());
  for (int k = 0; k < params.num_users; ++k) {
    const auto w = trace.weights.middleCols(k * tau, tau);
    const auto dp = dloss_doutput.middleCols(k * tau, tau);
    const Eigen::VectorXd mix = (w.array() * dp.array()).rowwise().sum();
    dlogits.middleCols(k * tau, tau) =
        params.pilot_power_total(k) * (w.array() * (dp.colwise() - mix).array());
  }

  ParamGradients grads;
  grads.hidden.resize(L - 1);

  const Eigen::MatrixXd& last_hidden =
      L >= 2 && !trace.hidden.empty() ? trace.hidden.back().output : trace.input;
  grads.output_weight.noalias() = dlogits.transpose() * last_hidden;
  grads.output_bias = dlogits.colwise().sum();

  Eigen::MatrixXd dout = dlogits * params.output.weight;
  for (int l = L - 2; l >= 0; --l) {
    const HiddenLayer& layer = params.hidden[l];
    const LayerTrace& t = trace.hidden[l];
    ParamGradients::HiddenGrads& g = grads.hidden[l];

    const Eigen::MatrixXd dact =
        (t.output.array() > 0.0).select(dout, Eigen::MatrixXd::Zero(dout.rows(), dout.cols()));
    g.bn_scale = (dact.array() * t.normalized.array()).colwise().sum();
    g.bn_shift = dact.colwise().sum();

    const Eigen::MatrixXd dnorm =
        dact.array().rowwise() * layer.bn_scale.transpose().array();
    // Batch-norm backward with the batch-statistics terms folded in:
    // dZ = inv_std * (dXhat - mean(dXhat) - Xhat * mean(dXhat .* Xhat)).
    const Eigen::RowVectorXd inv_std =
        (t.variance.array() + kBnEpsilon).rsqrt().transpose();
    const Eigen::RowVectorXd mean_dnorm = dnorm.colwise().mean();
    const Eigen::RowVectorXd mean_dnorm_norm =
        (dnorm.array() * t.normalized.array()).colwise().mean();
    const Eigen::MatrixXd dpre =
        (((dnorm.rowwise() - mean_dnorm).array() -
          t.normalized.array().rowwise() * mean_dnorm_norm.array())
             .rowwise() *
         inv_std.array())
            .matrix();

    const Eigen::MatrixXd& prev = l == 0 ? trace.input : trace.hidden[l - 1].output;
    g.weight.noalias() = dpre.transpose() * prev;
    if (l > 0) g.bias = dpre.colwise().sum();
    if (l > 0) dout.noalias() = dpre * layer.weight;
  }
  return grads;
}

Eigen::MatrixXd batch_input(const std::vector<ChannelInstance>& instances, bool log_input) {
  if (instances.empty()) throw std::invalid_argument("batch_input: empty instance list");
  const int K = instances.front().num_users();
  const int M = instances.front().num_raus();
  Eigen::MatrixXd batch(static_cast<Eigen::Index>(instances.size()), K * M);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const ChannelInstance& instance = instances[i];
    if (instance.num_users() != K || instance.num_raus() != M)
      throw std::invalid_argument("batch_input: instance " + std::to_string(i) +
                                  " has mismatched shape");
    for (int k = 0; k < K; ++k)
      for (int m = 0; m < M; ++m) batch(i, k * M + m) = instance.gain(k, m);
  }
  if (log_input) batch = batch.array().log10().matrix();
  return batch;
}

PowerAllocation allocation_from_output(const NetworkParams& params,
                                       const Eigen::Ref<const Eigen::RowVectorXd>& output_row) {
  if (output_row.size() != params.num_users * params.num_pilots)
    throw std::invalid_argument("allocation_from_output: row size does not match scenario");
  PowerAllocation alloc;
  alloc.power.resize(params.num_users, params.num_pilots);
  for (int k = 0; k < params.num_users; ++k)
    alloc.power.row(k) = output_row.segment(k * params.num_pilots, params.num_pilots);
  return alloc;
}

namespace {

constexpr char kMagic[4] = {'D', 'M', 'N', 'N'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kFlagLogInput = 1u << 0;

void write_bytes(std::ofstream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw CheckpointError("checkpoint write failed");
}

void write_u32(std::ofstream& out, std::uint32_t value) { write_bytes(out, &value, 4); }

void write_doubles(std::ofstream& out, const double* data, std::size_t count) {
  write_bytes(out, data, count * sizeof(double));
}

void read_bytes(std::ifstream& in, void* data, std::size_t bytes, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes))
    throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
}

std::uint32_t read_u32(std::ifstream& in, const char* what) {
  std::uint32_t value = 0;
  read_bytes(in, &value, 4, what);
  return value;
}

void read_doubles(std::ifstream& in, double* data, std::size_t count, const char* what) {
  read_bytes(in, data, count * sizeof(double), what);
}

}  // namespace

void save_params(const NetworkParams& params, const std::string& path) {
  validate(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);

  write_bytes(out, kMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, params.log_input ? kFlagLogInput : 0);
  write_u32(out, static_cast<std::uint32_t>(params.num_users));
  write_u32(out, static_cast<std::uint32_t>(params.num_raus));
  write_u32(out, static_cast<std::uint32_t>(params.num_pilots));
  write_u32(out, static_cast<std::uint32_t>(params.arch.layer_sizes.size()));
  for (int size : params.arch.layer_sizes) write_u32(out, static_cast<std::uint32_t>(size));
  write_doubles(out, params.pilot_power_total.data(),
                static_cast<std::size_t>(params.pilot_power_total.size()));

  for (const HiddenLayer& layer : params.hidden) {
    write_doubles(out, layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    write_doubles(out, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    write_doubles(out, layer.bn_scale.data(), static_cast<std::size_t>(layer.bn_scale.size()));
    write_doubles(out, layer.bn_shift.data(), static_cast<std::size_t>(layer.bn_shift.size()));
    write_doubles(out, layer.running_mean.data(),
                  static_cast<std::size_t>(layer.running_mean.size()));
    write_doubles(out, layer.running_var.data(),
                  static_cast<std::size_t>(layer.running_var.size()));
  }
  write_doubles(out, params.output.weight.data(),
                static_cast<std::size_t>(params.output.weight.size()));
  write_doubles(out, params.output.bias.data(),
                static_cast<std::size_t>(params.output.bias.size()));
  out.close();
  if (!out) throw CheckpointError("checkpoint close failed: " + path);
}

NetworkParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);

  char magic[4] = {};
  read_bytes(in, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("not a network checkpoint: " + path);
  const std::uint32_t version = read_u32(in, "version");
  if (version != kFormatVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t flags = read_u32(in, "flags");

  NetworkParams params;
  params.log_input = (flags & kFlagLogInput) != 0;
  params.num_users = static_cast<int>(read_u32(in, "num_users"));
  params.num_raus = static_cast<int>(read_u32(in, "num_raus"));
  params.num_pilots = static_cast<int>(read_u32(in, "num_pilots"));
  const std::uint32_t num_sizes = read_u32(in, "layer count");
  constexpr std::uint32_t kMaxLayers = 1024;
  constexpr std::uint32_t kMaxWidth = 1u << 24;
  if (num_sizes < 2 || num_sizes > kMaxLayers)
    throw CheckpointError("implausible layer count in checkpoint header");
  params.arch.layer_sizes.resize(num_sizes);
  for (std::uint32_t i = 0; i < num_sizes; ++i) {
    const std::uint32_t size = read_u32(in, "layer size");
    if (size < 1 || size > kMaxWidth)
      throw CheckpointError("implausible layer width in checkpoint header");
    params.arch.layer_sizes[i] = static_cast<int>(size);
  }
  if (params.num_users < 1 || params.num_raus < 1 || params.num_pilots < 1 ||
      params.num_users > static_cast<int>(kMaxWidth))
    throw CheckpointError("implausible scenario dimensions in checkpoint header");
  params.pilot_power_total.resize(params.num_users);
  read_doubles(in, params.pilot_power_total.data(),
               static_cast<std::size_t>(params.num_users), "power budget");

  const int L = params.arch.depth();
  params.hidden.resize(L - 1);
  for (int l = 0; l < L - 1; ++l) {
    const int n = params.arch.layer_sizes[l + 1];
    const int n_prev = params.arch.layer_sizes[l];
    HiddenLayer& layer = params.hidden[l];
    layer.weight.resize(n, n_prev);
    layer.bias.resize(n);
    layer.bn_scale.resize(n);
    layer.bn_shift.resize(n);
    layer.running_mean.resize(n);
    layer.running_var.resize(n);
    read_doubles(in, layer.weight.data(), static_cast<std::size_t>(layer.weight.size()),
                 "hidden weight");
    read_doubles(in, layer.bias.data(), static_cast<std::size_t>(n), "hidden bias");
    read_doubles(in, layer.bn_scale.data(), static_cast<std::size_t>(n), "bn scale");
    read_doubles(in, layer.bn_shift.data(), static_cast<std::size_t>(n), "bn shift");
    read_doubles(in, layer.running_mean.data(), static_cast<std::size_t>(n), "running mean");
    read_doubles(in, layer.running_var.data(), static_cast<std::size_t>(n), "running var");
  }
  params.output.weight.resize(params.arch.output_size(), params.arch.layer_sizes[L - 1]);
  params.output.bias.resize(params.arch.output_size());
  read_doubles(in, params.output.weight.data(),
               static_cast<std::size_t>(params.output.weight.size()), "output weight");
  read_doubles(in, params.output.bias.data(),
               static_cast<std::size_t>(params.output.bias.size()), "output bias");

  if (in.peek() != std::ifstream::traits_type::eof())
    throw CheckpointError("trailing bytes after checkpoint payload: " + path);
  validate(params);
  return params;
}

NetworkParams load_params(const std::string& path, const NetworkArch& expected) {
  NetworkParams params = load_params(path);
  if (params.arch.layer_sizes != expected.layer_sizes)
    throw CheckpointError("checkpoint architecture does not match the expected layer sizes");
  return params;
}

}  // namespace dmimo
