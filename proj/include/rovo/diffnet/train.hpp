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

#pragma once

#include "rovo/diffnet/network.hpp"

#include <numeric>
#include <vector>

namespace rovo::diffnet {

struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
};

struct TrainOptions {
  int epochs = 200;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
  std::size_t batch_size = 0;  // 0 = full batch
};

struct TrainResult {
  Network network;
  std::vector<double> loss_curve;  // full-dataset mean NLL before epoch 1 and after every epoch
};

namespace detail {

// Mean negative log-likelihood over `idx`, optionally accumulating parameter
// gradients scaled by 1/|idx|.
inline double NllPass(const Network &net, const Dataset &data, const std::vector<std::size_t> &idx,
                      std::vector<ParamGrad> *grads) {
  const double scale = 1.0 / static_cast<double>(idx.size());
  auto accumulate = [&](const GradRecord &rec) {
    for (std::size_t l = 0; l < rec.params.size(); ++l) {
      if (rec.params[l].weight.size() == 0) continue;
      auto &g = (*grads)[l];
      if (g.weight.size() == 0) {
        g.weight = rec.params[l].weight;
        g.bias = rec.params[l].bias;
      } else {
        g.weight += rec.params[l].weight;
        g.bias += rec.params[l].bias;
      }
    }
  };
  if (grads) grads->assign(net.layers().size(), ParamGrad{});
  double loss = 0.0;
  if (!net.has_mean_pool()) {
    // Rows are independent: run the whole batch as one matrix.
    Tensor batch(static_cast<Eigen::Index>(idx.size()), data.inputs[idx[0]].cols());
    for (std::size_t i = 0; i < idx.size(); ++i) batch.row(static_cast<Eigen::Index>(i)) = data.inputs[idx[i]].row(0);
    const Tape tape = net.Forward(batch);
    Tensor upstream = Tensor::Zero(tape.output().rows(), tape.output().cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      loss -= tape.output()(r, data.labels[idx[i]]);
      upstream(r, data.labels[idx[i]]) = -scale;
    }
    if (grads) accumulate(net.Backward(tape, upstream));
  } else {
    for (std::size_t i : idx) {
      const Tape tape = net.Forward(data.inputs[i]);
      loss -= tape.output()(0, data.labels[i]);
      if (grads) {
        Tensor upstream = Tensor::Zero(1, tape.output().cols());
        upstream(0, data.labels[i]) = -scale;
        accumulate(net.Backward(tape, upstream));
      }
    }
  }
  return loss * scale;
}

}  // namespace detail

inline void ValidateDataset(const Network &net, const Dataset &data) {
  Require(!data.inputs.empty(), "train_classifier: empty dataset");
  Require(data.inputs.size() == data.labels.size(), "train_classifier: inputs/labels size mismatch");
  const Eigen::Index classes = net.output_dim();
  for (std::size_t i = 0; i < data.size(); ++i) {
    Require(data.labels[i] >= 0 && data.labels[i] < classes,
            "train_classifier: label " + std::to_string(data.labels[i]) + " outside class count");
    Require(net.has_mean_pool() || data.inputs[i].rows() == 1,
            "train_classifier: multi-row sample needs a mean-pool layer");
  }
}

/// Mean NLL of a network ending in log-softmax.
inline double MeanNll(const Network &net, const Dataset &data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return detail::NllPass(net, data, all, nullptr);
}

inline double Accuracy(const Network &net, const Dataset &data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor out = net.Apply(data.inputs[i]);
    Eigen::Index arg;
    out.row(0).maxCoeff(&arg);
    correct += (arg == data.labels[i]) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Plain (mini-batch) gradient descent on mean NLL. The network must end in
/// LogSoftmax; the seed drives the mini-batch order only.
inline TrainResult TrainClassifier(Network net, const Dataset &data, const TrainOptions &opts) {
  Require(opts.epochs >= 1, "train_classifier: epochs must be >= 1");
  Require(opts.learning_rate > 0.0, "train_classifier: learning rate must be positive");
  Require(!net.empty() && std::holds_alternative<LogSoftmax>(net.layers().back()),
          "train_classifier: network must end in log-softmax");
  ValidateDataset(net, data);

  TrainResult result;
  result.loss_curve.push_back(MeanNll(net, data));
  Rng rng(opts.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = opts.batch_size == 0 ? data.size() : std::min(opts.batch_size, data.size());
  std::vector<ParamGrad> grads;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    if (batch < data.size()) rng.Shuffle(order);
    for (std::size_t start = 0; start < data.size(); start += batch) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(start + batch, data.size())));
      detail::NllPass(net, data, idx, &grads);
      for (std::size_t l = 0; l < grads.size(); ++l) {
        if (auto *a = std::get_if<Affine>(&net.mutable_layers()[l])) {
          a->weight -= opts.learning_rate * grads[l].weight;
          a->bias -= opts.learning_rate * grads[l].bias;
        }
      }
    }
    const double loss = MeanNll(net, data);
    if (!std::isfinite(loss)) Fail(ErrorKind::kNumerical, "train_classifier: loss diverged at epoch " + std::to_string(epoch));
    result.loss_curve.push_back(loss);
  }
  result.network = std::move(net);
  return result;
}

}  // namespace rovo::diffnet
