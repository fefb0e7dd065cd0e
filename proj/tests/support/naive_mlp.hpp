#pragma once

// Test-only Q-network evaluation with explicit loops in long double. Used as
// the forward oracle and as the loss for central finite differences.

#include <vector>

#include "dqjl/qnet.hpp"

namespace dqjl::oracle {

using Real = long double;

inline std::vector<Real> dense(const DenseLayer<double>& layer, const std::vector<Real>& in,
                               bool relu) {
  std::vector<Real> out(std::size_t(layer.outputs()));
  for (Eigen::Index r = 0; r < layer.outputs(); ++r) {
    Real acc = layer.bias(r);
    for (Eigen::Index c = 0; c < layer.inputs(); ++c) {
      acc += Real(layer.weight(r, c)) * in[std::size_t(c)];
    }
    out[std::size_t(r)] = relu && acc < 0 ? Real(0) : acc;
  }
  return out;
}

inline std::vector<Real> naive_q(const QNetworkd& net, const Eigen::VectorXd& x) {
  std::vector<Real> in(std::size_t(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) in[std::size_t(i)] = x(i);
  const auto& L = net.layers;
  const auto h1 = dense(L[0], in, true);
  if (net.architecture == Architecture::Standard) {
    return dense(L[2], dense(L[1], h1, true), false);
  }
  const Real value = dense(L[2], dense(L[1], h1, true), false)[0];
  auto adv = dense(L[4], dense(L[3], h1, true), false);
  Real mean = 0;
  for (Real a : adv) mean += a;
  mean /= Real(adv.size());
  for (Real& a : adv) a = value + a - mean;
  return adv;
}

inline Real naive_loss(const QNetworkd& net, const Eigen::VectorXd& x, int action,
                       double target) {
  const Real r = Real(target) - naive_q(net, x)[std::size_t(action)];
  return r * r;
}

/// Pre-activations of every ReLU unit, for detecting kinks crossed by a
/// finite-difference probe.
inline std::vector<Real> preactivations(const QNetworkd& net, const Eigen::VectorXd& x) {
  std::vector<Real> in(std::size_t(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) in[std::size_t(i)] = x(i);
  const auto& L = net.layers;
  std::vector<Real> out;
  const auto z1 = dense(L[0], in, false);
  out.insert(out.end(), z1.begin(), z1.end());
  std::vector<Real> h1 = z1;
  for (Real& v : h1) v = v < 0 ? Real(0) : v;
  const auto z2 = dense(L[1], h1, false);
  out.insert(out.end(), z2.begin(), z2.end());
  if (net.architecture == Architecture::Dueling) {
    const auto za = dense(L[3], h1, false);
    out.insert(out.end(), za.begin(), za.end());
  }
  return out;
}

}  // namespace dqjl::oracle
