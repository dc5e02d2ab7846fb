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

#include <functional>
#include <string>
#include <vector>

namespace rovo::diffnet {

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is ~0 from reporting spurious relative blow-ups.
inline double RelativeError(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct CoordinateCheck {
  std::string where;  // "input" or "layer<i>.weight" / "layer<i>.bias"
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<CoordinateCheck> coordinates;
  double max_rel_error = 0.0;

  bool all_pass() const {
    for (const auto &c : coordinates)
      if (!c.pass) return false;
    return true;
  }
  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto &c : coordinates) n += c.pass ? 0 : 1;
    return n;
  }
};

/// Central-difference check of a scalar function against its analytic
/// gradient, one coordinate at a time.
inline GradCheckReport CheckScalarGradient(const std::function<double(const Matrix &)> &f, const Matrix &x,
                                           const Matrix &analytic, double step, double tol,
                                           const std::string &label = "input") {
  Require(step > 0.0, "grad_check: step must be positive");
  Require(analytic.rows() == x.rows() && analytic.cols() == x.cols(), "grad_check: gradient shape mismatch");
  GradCheckReport report;
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe(i);
    probe(i) = orig + step;
    const double up = f(probe);
    probe(i) = orig - step;
    const double down = f(probe);
    probe(i) = orig;
    CoordinateCheck c{label, i, analytic(i), (up - down) / (2.0 * step), 0.0, true};
    c.rel_error = RelativeError(c.analytic, c.numeric);
    c.pass = c.rel_error < tol;
    report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
    report.coordinates.push_back(c);
  }
  return report;
}

inline void Append(GradCheckReport &into, const GradCheckReport &from) {
  into.coordinates.insert(into.coordinates.end(), from.coordinates.begin(), from.coordinates.end());
  into.max_rel_error = std::max(into.max_rel_error, from.max_rel_error);
}

/// Checks every input coordinate and every parameter of `net` for the scalar
/// loss L = sum(probe .* output), with `probe` a fixed seeded direction.
/// `tamper` may alter the analytic gradients before comparison (fault
/// injection in tests).
inline GradCheckReport GradCheck(const Network &net, const Tensor &x, double step, double tol,
                                 std::uint64_t seed = 7,
                                 const std::function<void(GradRecord &)> &tamper = nullptr) {
  Require(step > 0.0, "grad_check: step must be positive");
  const Tape tape = net.Forward(x);
  Rng rng(seed);
  Tensor probe(tape.output().rows(), tape.output().cols());
  for (Eigen::Index i = 0; i < probe.size(); ++i) probe(i) = rng.Uniform(-1.0, 1.0);
  GradRecord grads = net.Backward(tape, probe);
  if (tamper) tamper(grads);

  auto loss_at = [&](const Network &n, const Tensor &in) { return n.Apply(in).cwiseProduct(probe).sum(); };

  GradCheckReport report =
      CheckScalarGradient([&](const Matrix &in) { return loss_at(net, in); }, x, grads.input, step, tol, "input");

  Network scratch = net;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    if (!std::holds_alternative<Affine>(net.layers()[li])) continue;
    auto &layer = std::get<Affine>(scratch.mutable_layers()[li]);
    const Matrix w0 = layer.weight;
    Append(report, CheckScalarGradient(
                       [&](const Matrix &w) {
                         layer.weight = w;
                         return loss_at(scratch, x);
                       },
                       w0, grads.params[li].weight, step, tol, "layer" + std::to_string(li) + ".weight"));
    layer.weight = w0;
    const Matrix b0 = layer.bias;
    Append(report, CheckScalarGradient(
                       [&](const Matrix &b) {
                         layer.bias = b;
                         return loss_at(scratch, x);
                       },
                       b0, Matrix(grads.params[li].bias), step, tol, "layer" + std::to_string(li) + ".bias"));
    layer.bias = b0;
  }
  return report;
}

}  // namespace rovo::diffnet
