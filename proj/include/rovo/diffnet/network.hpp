// Copyright 2026  The rovo-desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// A layer-list network with hand-derived reverse-mode gradients.
//
// Tensors are matrices whose rows are time steps (or batch items) and whose
// columns are features. Every layer except MeanPool acts on rows
// independently; MeanPool collapses the rows into one.

#pragma once

#include "rovo/common.hpp"

#include <string>
#include <variant>
#include <vector>

namespace rovo::diffnet {

using Tensor = Matrix;

/// y = x W^T + b, W is out x in.
struct Affine {
  Matrix weight;
  Vector bias;

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
};
struct Tanh {};
struct Relu {};
struct MeanPool {};
struct L2Normalize {};
struct LogSoftmax {};

using Layer = std::variant<Affine, Tanh, Relu, MeanPool, L2Normalize, LogSoftmax>;

inline std::string LayerName(const Layer &layer) {
  constexpr const char *kNames[] = {"affine", "tanh", "relu", "mean_pool", "l2_normalize", "log_softmax"};
  return kNames[layer.index()];
}

/// Parameter gradients for one layer; empty matrices for parameter-free layers.
struct ParamGrad {
  Matrix weight;
  Vector bias;
};

struct GradRecord {
  Tensor input;                  // dL/d(network input)
  std::vector<ParamGrad> params;  // indexed like Network::layers
};

/// Activations retained by a forward pass. activations[i] is the input to
/// layer i; activations.back() is the network output.
struct Tape {
  std::vector<Tensor> activations;

  bool empty() const { return activations.empty(); }
  const Tensor &output() const { return activations.back(); }
};

class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) { Validate(); }

  const std::vector<Layer> &layers() const { return layers_; }
  std::vector<Layer> &mutable_layers() { return layers_; }
  bool empty() const { return layers_.empty(); }

  /// Input feature width, or -1 when the first affine layer is not first.
  Eigen::Index input_dim() const {
    for (const auto &l : layers_)
      if (auto *a = std::get_if<Affine>(&l)) return a->in();
    return -1;
  }
  Eigen::Index output_dim() const {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      if (auto *a = std::get_if<Affine>(&*it)) return a->out();
    return -1;
  }
  bool has_mean_pool() const {
    for (const auto &l : layers_)
      if (std::holds_alternative<MeanPool>(l)) return true;
    return false;
  }

  /// Checks that consecutive affine layers chain and all parameters are finite.
  void Validate() const {
    Eigen::Index width = -1;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (auto *a = std::get_if<Affine>(&layers_[i])) {
        Require(a->bias.size() == a->out(), "network: layer " + std::to_string(i) + " bias/weight mismatch");
        Require(width < 0 || width == a->in(), "network: layer " + std::to_string(i) + " expects width " +
                                                   std::to_string(a->in()) + " but receives " + std::to_string(width));
        if (!a->weight.allFinite() || !a->bias.allFinite())
          Fail(ErrorKind::kNumerical, "network: non-finite parameters in layer " + std::to_string(i));
        width = a->out();
      }
    }
  }

  Tape Forward(const Tensor &x) const {
    Tape tape;
    tape.activations.reserve(layers_.size() + 1);
    tape.activations.push_back(x);
    for (std::size_t i = 0; i < layers_.size(); ++i)
      tape.activations.push_back(ForwardLayer(layers_[i], tape.activations.back(), i));
    return tape;
  }

  Tensor Apply(const Tensor &x) const { return Forward(x).output(); }

  /// Reverse pass seeded with dL/d(output).
  GradRecord Backward(const Tape &tape, const Tensor &upstream) const {
    if (tape.empty()) Fail(ErrorKind::kPrecondition, "backward called before forward");
    Require(tape.activations.size() == layers_.size() + 1, "backward: tape does not belong to this network");
    Require(upstream.rows() == tape.output().rows() && upstream.cols() == tape.output().cols(),
            "backward: upstream gradient shape does not match network output");
    GradRecord rec;
    rec.params.resize(layers_.size());
    Tensor g = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;)
      g = BackwardLayer(layers_[i], tape.activations[i], tape.activations[i + 1], g, rec.params[i]);
    rec.input = std::move(g);
    return rec;
  }

 private:
  static Tensor ForwardLayer(const Layer &layer, const Tensor &x, std::size_t index) {
    return std::visit(
        [&](const auto &l) -> Tensor {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Affine>) {
            if (x.cols() != l.in())
              Fail(ErrorKind::kPrecondition, "forward: layer " + std::to_string(index) + " expects " +
                                                 std::to_string(l.in()) + " features, got " + std::to_string(x.cols()));
            return (x * l.weight.transpose()).rowwise() + l.bias.transpose();
          } else if constexpr (std::is_same_v<T, Tanh>) {
            return x.array().tanh().matrix();
          } else if constexpr (std::is_same_v<T, Relu>) {
            return x.cwiseMax(0.0);
          } else if constexpr (std::is_same_v<T, MeanPool>) {
            Require(x.rows() >= 1, "forward: mean-pool over zero rows");
            return x.colwise().mean();
          } else if constexpr (std::is_same_v<T, L2Normalize>) {
            Tensor y = x;
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
              const double n = x.row(r).norm();
              if (n > 0.0) y.row(r) /= n;
            }
            return y;
          } else {
            Tensor y(x.rows(), x.cols());
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
              const double m = x.row(r).maxCoeff();
              const double lse = m + std::log((x.row(r).array() - m).exp().sum());
              y.row(r) = x.row(r).array() - lse;
            }
            return y;
          }
        },
        layer);
  }

  static Tensor BackwardLayer(const Layer &layer, const Tensor &x, const Tensor &y, const Tensor &gy,
                              ParamGrad &pg) {
    return std::visit(
        [&](const auto &l) -> Tensor {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Affine>) {
            pg.weight = gy.transpose() * x;
            pg.bias = gy.colwise().sum().transpose();
            return gy * l.weight;
          } else if constexpr (std::is_same_v<T, Tanh>) {
            return (gy.array() * (1.0 - y.array().square())).matrix();
          } else if constexpr (std::is_same_v<T, Relu>) {
            return (gy.array() * (x.array() > 0.0).template cast<double>()).matrix();
          } else if constexpr (std::is_same_v<T, MeanPool>) {
            return Tensor::Constant(x.rows(), x.cols(), 0.0).rowwise() + gy.row(0) / static_cast<double>(x.rows());
          } else if constexpr (std::is_same_v<T, L2Normalize>) {
            // d(x/|x|) = (g - y (y.g)) / |x|; defined as zero at x = 0.
            Tensor gx = Tensor::Zero(x.rows(), x.cols());
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
              const double n = x.row(r).norm();
              if (n > 0.0) gx.row(r) = (gy.row(r) - y.row(r) * y.row(r).dot(gy.row(r))) / n;
            }
            return gx;
          } else {
            // y = x - lse(x): dx = g - softmax(x) * sum(g)
            Tensor gx(x.rows(), x.cols());
            for (Eigen::Index r = 0; r < x.rows(); ++r)
              gx.row(r) = gy.row(r).array() - y.row(r).array().exp() * gy.row(r).sum();
            return gx;
          }
        },
        layer);
  }

  std::vector<Layer> layers_;
};

/// Glorot-uniform affine layer with zero bias.
inline Affine MakeAffine(Eigen::Index in, Eigen::Index out, Rng &rng, double gain = 1.0) {
  Affine a;
  a.weight.resize(out, in);
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  for (Eigen::Index i = 0; i < a.weight.size(); ++i) a.weight(i) = rng.Uniform(-limit, limit);
  a.bias = Vector::Zero(out);
  return a;
}

/// Rounds every parameter to float32 so an in-memory network equals its
/// persisted form bit for bit.
inline void RoundParametersToFloat(Network &net) {
  for (auto &l : net.mutable_layers()) {
    if (auto *a = std::get_if<Affine>(&l)) {
      a->weight = a->weight.cast<float>().cast<double>();
      a->bias = a->bias.cast<float>().cast<double>();
    }
  }
}

}  // namespace rovo::diffnet
