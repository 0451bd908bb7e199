#ifndef FUGU_NN_HPP
#define FUGU_NN_HPP

// Small fully-connected network: ReLU hidden layers, softmax output,
// weighted cross-entropy, hand-written backprop and plain minibatch SGD.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace fugu::nn {

using Eigen::Index;

struct MlpSpec {
  Index input_dim = 1;
  std::vector<Index> hidden_layers;
  Index output_dim = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (input_dim <= 0) throw std::invalid_argument("input_dim must be positive");
    if (output_dim < 2) throw std::invalid_argument("output_dim must be at least 2");
    for (Index w : hidden_layers)
      if (w <= 0) throw std::invalid_argument("hidden layer widths must be positive");
  }

  /// Widths of every layer boundary: input, hidden..., output.
  [[nodiscard]] std::vector<Index> widths() const {
    std::vector<Index> w{input_dim};
    w.insert(w.end(), hidden_layers.begin(), hidden_layers.end());
    w.push_back(output_dim);
    return w;
  }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

template <typename Scalar>
struct DenseLayer {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weight;  // out x in
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;                 // out
};

template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Layer = DenseLayer<Scalar>;

  Mlp() = default;

  /// All parameters zero.
  static Mlp zeros(const MlpSpec& spec) {
    spec.validate();
    Mlp net;
    net.spec_ = spec;
    const auto w = spec.widths();
    for (std::size_t l = 0; l + 1 < w.size(); ++l)
      net.layers_.push_back({Matrix::Zero(w[l + 1], w[l]), Vector::Zero(w[l + 1])});
    return net;
  }

  /// Glorot-uniform weights drawn from spec.seed, zero biases.
  static Mlp initialize(const MlpSpec& spec) {
    Mlp net = zeros(spec);
    std::mt19937_64 rng(spec.seed);
    for (auto& layer : net.layers_) {
      const double fan = static_cast<double>(layer.weight.rows() + layer.weight.cols());
      std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan), std::sqrt(6.0 / fan));
      for (Index r = 0; r < layer.weight.rows(); ++r)
        for (Index c = 0; c < layer.weight.cols(); ++c)
          layer.weight(r, c) = static_cast<Scalar>(dist(rng));
    }
    return net;
  }

  /// Wraps explicit parameters; shapes must agree with the spec.
  static Mlp from_layers(const MlpSpec& spec, std::vector<Layer> layers) {
    Mlp net = zeros(spec);
    if (layers.size() != net.layers_.size())
      throw std::invalid_argument("layer count does not match spec");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].weight.rows() != net.layers_[l].weight.rows() ||
          layers[l].weight.cols() != net.layers_[l].weight.cols() ||
          layers[l].bias.size() != net.layers_[l].bias.size())
        throw std::invalid_argument("layer shape does not match spec");
    }
    net.layers_ = std::move(layers);
    return net;
  }

  [[nodiscard]] const MlpSpec& spec() const { return spec_; }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
  [[nodiscard]] std::vector<Layer>& layers() { return layers_; }
  [[nodiscard]] Index input_dim() const { return spec_.input_dim; }
  [[nodiscard]] Index output_dim() const { return spec_.output_dim; }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(layers_.begin(), layers_.end(), [](const Layer& l) {
      return l.weight.allFinite() && l.bias.allFinite();
    });
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (!(a.spec_ == b.spec_) || a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l)
      if (a.layers_[l].weight != b.layers_[l].weight || a.layers_[l].bias != b.layers_[l].bias)
        return false;
    return true;
  }

 private:
  MlpSpec spec_;
  std::vector<Layer> layers_;
};

/// Same layout as the network's parameters.
template <typename Scalar>
struct Gradients {
  std::vector<DenseLayer<Scalar>> layers;

  static Gradients zeros_like(const Mlp<Scalar>& net) {
    Gradients g;
    for (const auto& l : net.layers())
      g.layers.push_back({Mlp<Scalar>::Matrix::Zero(l.weight.rows(), l.weight.cols()),
                          Mlp<Scalar>::Vector::Zero(l.bias.size())});
    return g;
  }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(layers.begin(), layers.end(), [](const auto& l) {
      return l.weight.allFinite() && l.bias.allFinite();
    });
  }

  Gradients& operator+=(const Gradients& o) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weight += o.layers[l].weight;
      layers[l].bias += o.layers[l].bias;
    }
    return *this;
  }
};

template <typename Scalar>
struct LossAndGradients {
  Scalar loss{};
  Gradients<Scalar> gradients;
};

namespace detail {

template <typename Scalar>
void check_input_rows(const Mlp<Scalar>& net, Index rows) {
  if (rows != net.input_dim())
    throw std::invalid_argument("input dimension " + std::to_string(rows) +
                                " does not match network input_dim " +
                                std::to_string(net.input_dim()));
}

// Column-wise log-softmax with max subtraction.
template <typename Derived>
auto log_softmax_columns(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = logits;
  for (Index c = 0; c < out.cols(); ++c) {
    const Scalar m = out.col(c).maxCoeff();
    out.col(c).array() -= m;
    const Scalar lse = std::log(out.col(c).array().exp().sum());
    out.col(c).array() -= lse;
  }
  return out;
}

}  // namespace detail

/// Logits for a batch of inputs stored one per column.
template <typename Scalar, typename Derived>
typename Mlp<Scalar>::Matrix forward_batch(const Mlp<Scalar>& net,
                                           const Eigen::MatrixBase<Derived>& inputs) {
  detail::check_input_rows(net, inputs.rows());
  typename Mlp<Scalar>::Matrix act = inputs;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    typename Mlp<Scalar>::Matrix z = layers[l].weight * act;
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) z = z.cwiseMax(Scalar(0));
    act = std::move(z);
  }
  return act;
}

template <typename Scalar, typename Derived>
typename Mlp<Scalar>::Vector forward(const Mlp<Scalar>& net,
                                     const Eigen::MatrixBase<Derived>& input) {
  if (input.cols() != 1) throw std::invalid_argument("forward expects a column vector");
  return forward_batch(net, input).col(0);
}

/// Numerically stable softmax; the result sums to one.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_columns(
    const Eigen::MatrixBase<Derived>& logits) {
  return detail::log_softmax_columns(logits).array().exp().matrix();
}

/// Summed weighted cross-entropy of a batch and its exact gradients.
/// Inputs are columns; targets[i] and weights(i) belong to column i.
template <typename Scalar, typename Derived>
LossAndGradients<Scalar> batch_cross_entropy_grad(
    const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& inputs,
    const std::vector<Index>& targets,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& weights) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  detail::check_input_rows(net, inputs.rows());
  const Index n = inputs.cols();
  if (static_cast<Index>(targets.size()) != n || weights.size() != n)
    throw std::invalid_argument("targets/weights do not match batch size");

  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  std::vector<Matrix> acts;  // acts[l] feeds layer l
  std::vector<Matrix> pre;   // pre-activations of layer l
  acts.reserve(depth + 1);
  pre.reserve(depth);
  acts.emplace_back(inputs);
  for (std::size_t l = 0; l < depth; ++l) {
    Matrix z = layers[l].weight * acts.back();
    z.colwise() += layers[l].bias;
    pre.push_back(z);
    if (l + 1 < depth) acts.emplace_back(z.cwiseMax(Scalar(0)));
  }

  const Matrix log_p = detail::log_softmax_columns(pre.back());
  LossAndGradients<Scalar> out{Scalar(0), Gradients<Scalar>::zeros_like(net)};
  Matrix delta = log_p.array().exp().matrix();
  for (Index c = 0; c < n; ++c) {
    const Index t = targets[static_cast<std::size_t>(c)];
    if (t < 0 || t >= net.output_dim()) throw std::out_of_range("target bin out of range");
    out.loss -= weights(c) * log_p(t, c);
    delta(t, c) -= Scalar(1);
    delta.col(c) *= weights(c);
  }

  for (std::size_t l = depth; l-- > 0;) {
    out.gradients.layers[l].weight.noalias() = delta * acts[l].transpose();
    out.gradients.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Matrix back = layers[l].weight.transpose() * delta;
      delta = back.cwiseProduct((pre[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
  }
  return out;
}

/// loss = -weight * ln softmax(forward(input))[target_bin], with exact gradients.
template <typename Scalar, typename Derived>
LossAndGradients<Scalar> cross_entropy_grad(const Mlp<Scalar>& net,
                                            const Eigen::MatrixBase<Derived>& input,
                                            Index target_bin, Scalar weight) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(1);
  w(0) = weight;
  return batch_cross_entropy_grad(net, input, std::vector<Index>{target_bin}, w);
}

/// p <- p - learning_rate * g for every parameter.
template <typename Scalar>
Mlp<Scalar> sgd_step(Mlp<Scalar> net, const Gradients<Scalar>& grads, Scalar learning_rate) {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size())
    throw std::invalid_argument("gradient layer count mismatch");
  if (!grads.all_finite()) throw std::domain_error("non-finite gradient");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (grads.layers[l].weight.rows() != layers[l].weight.rows() ||
        grads.layers[l].weight.cols() != layers[l].weight.cols() ||
        grads.layers[l].bias.size() != layers[l].bias.size())
      throw std::invalid_argument("gradient shape mismatch");
    layers[l].weight -= learning_rate * grads.layers[l].weight;
    layers[l].bias -= learning_rate * grads.layers[l].bias;
  }
  return net;
}

/// Training examples stored column-wise.
template <typename Scalar>
struct Dataset {
  typename Mlp<Scalar>::Matrix inputs;  // input_dim x n
  std::vector<Index> targets;
  typename Mlp<Scalar>::Vector weights;

  [[nodiscard]] Index size() const { return static_cast<Index>(targets.size()); }
  [[nodiscard]] bool empty() const { return targets.empty(); }

  /// Columns `idx` of this dataset, in the given order.
  [[nodiscard]] Dataset subset(const std::vector<Index>& idx) const {
    Dataset out;
    out.inputs.resize(inputs.rows(), static_cast<Index>(idx.size()));
    out.weights.resize(static_cast<Index>(idx.size()));
    out.targets.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.inputs.col(static_cast<Index>(i)) = inputs.col(idx[i]);
      out.weights(static_cast<Index>(i)) = weights(idx[i]);
      out.targets.push_back(targets[static_cast<std::size_t>(idx[i])]);
    }
    return out;
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  Index batch_size = 64;
  int epochs = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
  }
};

template <typename Scalar>
struct TrainResult {
  Mlp<Scalar> net;
  std::vector<Scalar> epoch_loss;  // mean weighted loss seen during each epoch
  bool warm_started = false;
};

/// Weighted mean cross-entropy (sum of weighted losses / sum of weights).
template <typename Scalar>
Scalar mean_cross_entropy(const Mlp<Scalar>& net, const Dataset<Scalar>& data) {
  if (data.empty()) throw std::invalid_argument("empty dataset");
  const auto log_p = detail::log_softmax_columns(forward_batch(net, data.inputs));
  Scalar total(0);
  for (Index c = 0; c < data.size(); ++c)
    total -= data.weights(c) * log_p(data.targets[static_cast<std::size_t>(c)], c);
  return total / data.weights.sum();
}

/// Minibatch SGD, reshuffling each epoch with a seeded RNG. Each step uses
/// the batch-mean gradient. Starts from `warm_start` when given, else `net`.
template <typename Scalar>
TrainResult<Scalar> train(const Mlp<Scalar>& net, const Dataset<Scalar>& data,
                          const TrainConfig& config,
                          const std::optional<Mlp<Scalar>>& warm_start = std::nullopt) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  detail::check_input_rows(net, data.inputs.rows());

  TrainResult<Scalar> result{warm_start ? *warm_start : net, {}, warm_start.has_value()};
  if (!(result.net.spec().widths() == net.spec().widths()))
    throw std::invalid_argument("warm start network shape differs from target network");

  std::mt19937_64 rng(config.seed);
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  const Scalar lr = static_cast<Scalar>(config.learning_rate);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    Scalar epoch_total(0);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto batch = data.subset(idx);
      auto step = batch_cross_entropy_grad(result.net, batch.inputs, batch.targets, batch.weights);
      epoch_total += step.loss;
      const Scalar scale = Scalar(1) / static_cast<Scalar>(idx.size());
      for (auto& l : step.gradients.layers) {
        l.weight *= scale;
        l.bias *= scale;
      }
      result.net = sgd_step(std::move(result.net), step.gradients, lr);
    }
    result.epoch_loss.push_back(epoch_total / static_cast<Scalar>(order.size()));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Text serialization. Layout:
//
//   fugu-mlp 1
//   input_dim <n>
//   hidden <count> <w1> <w2> ...
//   output_dim <n>
//   seed <u64>
//   layer <index> <rows> <cols>
//   <rows lines of cols weights, row-major>
//   <one line of rows biases>
//   ... (one block per layer)
//   end
//
// Numbers use the shortest representation that parses back to the same value.

namespace detail {

template <typename Scalar>
void write_number(std::ostream& os, Scalar v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, res.ptr - buf);
}

template <typename Scalar>
Scalar parse_number(const std::string& token) {
  Scalar v{};
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
    throw std::runtime_error("invalid number in model file: '" + token + "'");
  return v;
}

inline std::string expect_key(std::istream& is, const std::string& key) {
  std::string got;
  if (!(is >> got) || got != key)
    throw std::runtime_error("model file: expected '" + key + "', got '" + got + "'");
  return got;
}

template <typename T>
T read_value(std::istream& is, const std::string& what) {
  T v{};
  if (!(is >> v)) throw std::runtime_error("model file: cannot read " + what);
  return v;
}

}  // namespace detail

inline constexpr int kModelFormatVersion = 1;

template <typename Scalar>
void write_mlp(std::ostream& os, const Mlp<Scalar>& net) {
  const auto& spec = net.spec();
  os << "fugu-mlp " << kModelFormatVersion << '\n';
  os << "input_dim " << spec.input_dim << '\n';
  os << "hidden " << spec.hidden_layers.size();
  for (Index w : spec.hidden_layers) os << ' ' << w;
  os << '\n';
  os << "output_dim " << spec.output_dim << '\n';
  os << "seed " << spec.seed << '\n';
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    os << "layer " << l << ' ' << layer.weight.rows() << ' ' << layer.weight.cols() << '\n';
    for (Index r = 0; r < layer.weight.rows(); ++r) {
      for (Index c = 0; c < layer.weight.cols(); ++c) {
        if (c) os << ' ';
        detail::write_number(os, layer.weight(r, c));
      }
      os << '\n';
    }
    for (Index r = 0; r < layer.bias.size(); ++r) {
      if (r) os << ' ';
      detail::write_number(os, layer.bias(r));
    }
    os << '\n';
  }
  os << "end\n";
}

template <typename Scalar>
Mlp<Scalar> read_mlp(std::istream& is) {
  detail::expect_key(is, "fugu-mlp");
  const int version = detail::read_value<int>(is, "format version");
  if (version != kModelFormatVersion)
    throw std::runtime_error("unsupported model format version " + std::to_string(version));
  MlpSpec spec;
  detail::expect_key(is, "input_dim");
  spec.input_dim = detail::read_value<Index>(is, "input_dim");
  detail::expect_key(is, "hidden");
  const auto n_hidden = detail::read_value<std::size_t>(is, "hidden layer count");
  if (n_hidden > 64) throw std::runtime_error("model file: implausible hidden layer count");
  for (std::size_t i = 0; i < n_hidden; ++i)
    spec.hidden_layers.push_back(detail::read_value<Index>(is, "hidden width"));
  detail::expect_key(is, "output_dim");
  spec.output_dim = detail::read_value<Index>(is, "output_dim");
  detail::expect_key(is, "seed");
  spec.seed = detail::read_value<std::uint64_t>(is, "seed");
  spec.validate();

  Mlp<Scalar> net = Mlp<Scalar>::zeros(spec);
  std::string token;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    detail::expect_key(is, "layer");
    const auto idx = detail::read_value<std::size_t>(is, "layer index");
    const auto rows = detail::read_value<Index>(is, "layer rows");
    const auto cols = detail::read_value<Index>(is, "layer cols");
    if (idx != l || rows != layer.weight.rows() || cols != layer.weight.cols())
      throw std::runtime_error("model file: layer header inconsistent with spec");
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        if (!(is >> token)) throw std::runtime_error("model file: truncated weights");
        layer.weight(r, c) = detail::parse_number<Scalar>(token);
      }
    for (Index r = 0; r < rows; ++r) {
      if (!(is >> token)) throw std::runtime_error("model file: truncated biases");
      layer.bias(r) = detail::parse_number<Scalar>(token);
    }
  }
  detail::expect_key(is, "end");
  if (!net.all_finite()) throw std::runtime_error("model file: non-finite parameter");
  return net;
}

template <typename Scalar>
std::string to_text(const Mlp<Scalar>& net) {
  std::ostringstream os;
  write_mlp(os, net);
  return os.str();
}

}  // namespace fugu::nn

#endif  // FUGU_NN_HPP
