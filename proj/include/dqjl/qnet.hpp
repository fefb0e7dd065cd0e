#pragma once

// Multilayer-perceptron Q-function with hand-written backpropagation and Adam.
//
// Standard head:  6K -> h1 -> h2 -> K+1, ReLU on both hidden layers.
// Dueling head:   6K -> h1 shared, then value stream h1 -> h2 -> 1 and advantage
//                 stream h1 -> h2 -> K+1, aggregated as Q = V + A - mean(A).
//
// Batched routines take inputs as columns of a (6K x B) matrix.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dqjl/errors.hpp"

namespace dqjl {

enum class Architecture { Standard, Dueling };

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view text);

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;    // out

  Eigen::Index inputs() const { return weight.cols(); }
  Eigen::Index outputs() const { return weight.rows(); }

  static DenseLayer zeros(Eigen::Index in, Eigen::Index out) {
    return {MatrixX<Scalar>::Zero(out, in), VectorX<Scalar>::Zero(out)};
  }
};

/// Same shapes as the network's layers; also used for Adam moments.
template <typename Scalar>
using LayerGradients = std::vector<DenseLayer<Scalar>>;

inline constexpr int kDefaultHidden1 = 128;
inline constexpr int kDefaultHidden2 = 256;

/// Layer order. Standard: [in->h1, h1->h2, h2->out].
/// Dueling: [in->h1, value h1->h2, value h2->1, advantage h1->h2, advantage h2->out].
template <typename Scalar>
struct QNetwork {
  Architecture architecture = Architecture::Standard;
  int pad_size = 0;
  std::vector<DenseLayer<Scalar>> layers;
  LayerGradients<Scalar> adam_m;
  LayerGradients<Scalar> adam_v;
  std::int64_t adam_step = 0;

  int input_size() const { return 6 * pad_size; }
  int output_size() const { return pad_size + 1; }
  int hidden1() const { return static_cast<int>(layers.front().outputs()); }
  int hidden2() const { return static_cast<int>(layers[1].outputs()); }

  /// Copies weights only; Adam state of this network is left untouched.
  void copy_weights_from(const QNetwork& other) { layers = other.layers; }
};

using QNetworkd = QNetwork<double>;

namespace detail {

template <typename Scalar>
std::vector<std::pair<Eigen::Index, Eigen::Index>> layer_shapes(Architecture arch, int in,
                                                                int h1, int h2, int out) {
  if (arch == Architecture::Standard) return {{in, h1}, {h1, h2}, {h2, out}};
  return {{in, h1}, {h1, h2}, {h2, 1}, {h1, h2}, {h2, out}};
}

template <typename Scalar>
LayerGradients<Scalar> zeros_like(const std::vector<DenseLayer<Scalar>>& layers) {
  LayerGradients<Scalar> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(DenseLayer<Scalar>::zeros(l.inputs(), l.outputs()));
  return out;
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& z) {
  return z.cwiseMax(typename Derived::Scalar(0));
}

template <typename Derived>
auto relu_mask(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return (z.array() > S(0)).template cast<S>().matrix();
}

}  // namespace detail

/// Zero-initialised network with zero Adam state.
template <typename Scalar>
QNetwork<Scalar> make_zero_qnetwork(Architecture arch, int pad_size,
                                    int hidden1 = kDefaultHidden1,
                                    int hidden2 = kDefaultHidden2) {
  if (pad_size < 1 || hidden1 < 1 || hidden2 < 1) {
    throw ShapeError("network dimensions must be positive");
  }
  QNetwork<Scalar> net;
  net.architecture = arch;
  net.pad_size = pad_size;
  for (auto [in, out] :
       detail::layer_shapes<Scalar>(arch, 6 * pad_size, hidden1, hidden2, pad_size + 1)) {
    net.layers.push_back(DenseLayer<Scalar>::zeros(in, out));
  }
  net.adam_m = detail::zeros_like(net.layers);
  net.adam_v = detail::zeros_like(net.layers);
  return net;
}

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
template <typename Scalar, typename Urbg>
QNetwork<Scalar> make_qnetwork(Architecture arch, int pad_size, Urbg& rng,
                               int hidden1 = kDefaultHidden1,
                               int hidden2 = kDefaultHidden2) {
  auto net = make_zero_qnetwork<Scalar>(arch, pad_size, hidden1, hidden2);
  for (auto& layer : net.layers) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.inputs() + layer.outputs()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        layer.weight(r, c) = static_cast<Scalar>(dist(rng));
      }
    }
  }
  return net;
}

/// Activations kept for the backward pass (one column per sample).
template <typename Scalar>
struct ForwardCache {
  MatrixX<Scalar> input;
  MatrixX<Scalar> z1, h1;          // shared first hidden layer
  MatrixX<Scalar> z2, h2;          // standard second layer / value stream
  MatrixX<Scalar> za, ha;          // advantage stream (dueling only)
  MatrixX<Scalar> value;           // 1 x B (dueling only)
  MatrixX<Scalar> advantage;       // (K+1) x B (dueling only)
  MatrixX<Scalar> q;               // (K+1) x B
};

template <typename Scalar>
void check_input_rows(const QNetwork<Scalar>& net, Eigen::Index rows) {
  if (rows != net.input_size()) {
    throw ShapeError("network expects " + std::to_string(net.input_size()) +
                     " inputs, got " + std::to_string(rows));
  }
}

/// Dueling aggregation: q_a = V + A_a - mean_a'(A_a'), column-wise.
template <typename Scalar>
MatrixX<Scalar> aggregate_dueling(const MatrixX<Scalar>& value,
                                  const MatrixX<Scalar>& advantage) {
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean = advantage.colwise().mean();
  MatrixX<Scalar> q = advantage;
  q.rowwise() += value.row(0) - mean;
  return q;
}

template <typename Scalar>
ForwardCache<Scalar> forward_cached(const QNetwork<Scalar>& net,
                                    const MatrixX<Scalar>& inputs) {
  check_input_rows(net, inputs.rows());
  ForwardCache<Scalar> c;
  c.input = inputs;
  const auto& L = net.layers;
  c.z1 = (L[0].weight * inputs).colwise() + L[0].bias;
  c.h1 = detail::relu(c.z1);
  c.z2 = (L[1].weight * c.h1).colwise() + L[1].bias;
  c.h2 = detail::relu(c.z2);
  if (net.architecture == Architecture::Standard) {
    c.q = (L[2].weight * c.h2).colwise() + L[2].bias;
  } else {
    c.value = (L[2].weight * c.h2).colwise() + L[2].bias;
    c.za = (L[3].weight * c.h1).colwise() + L[3].bias;
    c.ha = detail::relu(c.za);
    c.advantage = (L[4].weight * c.ha).colwise() + L[4].bias;
    c.q = aggregate_dueling<Scalar>(c.value, c.advantage);
  }
  return c;
}

/// Q-values for a batch of inputs, (K+1) x B.
template <typename Scalar>
MatrixX<Scalar> forward_batch(const QNetwork<Scalar>& net, const MatrixX<Scalar>& inputs) {
  return forward_cached(net, inputs).q;
}

/// Q-values for one state; index 0 is "no instruction", i + 1 is vehicle i.
/// Dispatches on the architecture, so it also covers the dueling head.
template <typename Scalar>
VectorX<Scalar> forward(const QNetwork<Scalar>& net, const VectorX<Scalar>& features) {
  if (!features.allFinite()) throw ShapeError("network input contains non-finite values");
  return forward_batch(net, MatrixX<Scalar>(features)).col(0);
}

template <typename Scalar>
VectorX<Scalar> dueling_forward(const QNetwork<Scalar>& net,
                                const VectorX<Scalar>& features) {
  if (net.architecture != Architecture::Dueling) {
    throw ShapeError("dueling_forward needs dueling-shaped parameters");
  }
  return forward(net, features);
}

struct BatchLoss {
  double mean_squared_error = 0.0;
};

/// Gradient of mean_b (target_b - Q(s_b, a_b))^2 with the targets held
/// constant. `actions` are output indices in [0, K].
template <typename Scalar>
LayerGradients<Scalar> backward_batch(const QNetwork<Scalar>& net,
                                      const MatrixX<Scalar>& inputs,
                                      std::span<const int> actions,
                                      const VectorX<Scalar>& targets,
                                      BatchLoss* loss = nullptr) {
  const auto batch = inputs.cols();
  if (static_cast<Eigen::Index>(actions.size()) != batch || targets.size() != batch) {
    throw ShapeError("batch sizes of inputs, actions and targets differ");
  }
  const auto c = forward_cached(net, inputs);
  const auto& L = net.layers;

  MatrixX<Scalar> dq = MatrixX<Scalar>::Zero(c.q.rows(), batch);
  Scalar sse(0);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int a = actions[static_cast<std::size_t>(b)];
    if (a < 0 || a >= c.q.rows()) throw ShapeError("action index out of range");
    const Scalar residual = targets(b) - c.q(a, b);
    sse += residual * residual;
    dq(a, b) = Scalar(-2) * residual / static_cast<Scalar>(batch);
  }
  if (loss) loss->mean_squared_error = static_cast<double>(sse / static_cast<Scalar>(batch));

  auto grads = detail::zeros_like(net.layers);
  auto dense_grad = [](DenseLayer<Scalar>& g, const MatrixX<Scalar>& delta,
                       const MatrixX<Scalar>& activation) {
    g.weight.noalias() = delta * activation.transpose();
    g.bias = delta.rowwise().sum();
  };

  MatrixX<Scalar> dz1;
  if (net.architecture == Architecture::Standard) {
    dense_grad(grads[2], dq, c.h2);
    const MatrixX<Scalar> dz2 =
        (L[2].weight.transpose() * dq).cwiseProduct(detail::relu_mask(c.z2));
    dense_grad(grads[1], dz2, c.h1);
    dz1 = (L[1].weight.transpose() * dz2).cwiseProduct(detail::relu_mask(c.z1));
  } else {
    // dQ_a/dV = 1, dQ_a/dA_j = [a == j] - 1/(K+1).
    const MatrixX<Scalar> dvalue = dq.colwise().sum();
    MatrixX<Scalar> dadv = dq;
    dadv.rowwise() -= dvalue.row(0) / static_cast<Scalar>(dq.rows());

    dense_grad(grads[2], dvalue, c.h2);
    const MatrixX<Scalar> dzv =
        (L[2].weight.transpose() * dvalue).cwiseProduct(detail::relu_mask(c.z2));
    dense_grad(grads[1], dzv, c.h1);

    dense_grad(grads[4], dadv, c.ha);
    const MatrixX<Scalar> dza =
        (L[4].weight.transpose() * dadv).cwiseProduct(detail::relu_mask(c.za));
    dense_grad(grads[3], dza, c.h1);

    dz1 = (L[1].weight.transpose() * dzv + L[3].weight.transpose() * dza)
              .cwiseProduct(detail::relu_mask(c.z1));
  }
  dense_grad(grads[0], dz1, c.input);
  return grads;
}

/// Gradient of (td_target - Q(s, action))^2 for a single sample.
template <typename Scalar>
LayerGradients<Scalar> backward(const QNetwork<Scalar>& net,
                                const VectorX<Scalar>& features, int action_index,
                                Scalar td_target) {
  const int actions[1] = {action_index};
  VectorX<Scalar> targets(1);
  targets << td_target;
  return backward_batch(net, MatrixX<Scalar>(features), actions, targets);
}

struct AdamConfig {
  double learning_rate = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global L2 norm bound on the gradient; 0 disables clipping.
  double max_grad_norm = 0.0;
};

template <typename Scalar>
Scalar gradient_norm(const LayerGradients<Scalar>& grads) {
  Scalar sq(0);
  for (const auto& g : grads) sq += g.weight.squaredNorm() + g.bias.squaredNorm();
  return std::sqrt(sq);
}

/// Bias-corrected Adam update applied in place; increments adam_step.
template <typename Scalar>
void adam_step(QNetwork<Scalar>& net, const LayerGradients<Scalar>& grads,
               const AdamConfig& cfg = {}) {
  if (grads.size() != net.layers.size()) throw ShapeError("gradient layer count mismatch");
  Scalar scale(1);
  if (cfg.max_grad_norm > 0.0) {
    const Scalar norm = gradient_norm(grads);
    if (norm > Scalar(cfg.max_grad_norm)) scale = Scalar(cfg.max_grad_norm) / norm;
  }
  ++net.adam_step;
  const Scalar b1(cfg.beta1), b2(cfg.beta2), eps(cfg.epsilon), lr(cfg.learning_rate);
  const Scalar t = static_cast<Scalar>(net.adam_step);
  const Scalar correction1 = Scalar(1) - std::pow(b1, t);
  const Scalar correction2 = Scalar(1) - std::pow(b2, t);

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    if (param.rows() != g.rows() || param.cols() != g.cols()) {
      throw ShapeError("gradient shape does not match parameter shape");
    }
    m = b1 * m + (Scalar(1) - b1) * scale * g;
    v = b2 * v + (Scalar(1) - b2) * (scale * g).cwiseAbs2();
    param.array() -= lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    update(net.layers[i].weight, net.adam_m[i].weight, net.adam_v[i].weight, grads[i].weight);
    update(net.layers[i].bias, net.adam_m[i].bias, net.adam_v[i].bias, grads[i].bias);
  }
}

/// Writes the text checkpoint: architecture tag, K, layer shapes and every
/// parameter and Adam moment in row-major order at 17 significant digits.
void save_checkpoint(const QNetworkd& net, const std::filesystem::path& path);
std::string checkpoint_to_string(const QNetworkd& net);

/// Parses a checkpoint; throws CheckpointError on truncation, shape errors or
/// non-finite entries.
QNetworkd load_checkpoint(const std::filesystem::path& path);
QNetworkd checkpoint_from_string(std::string_view text);

}  // namespace dqjl
