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

// Utterance-level statistics features: per-coefficient mean and standard
// deviation over time, of either the log-mel bands themselves or their
// cepstral (DCT-II) coefficients. Both are differentiable in the log-mel
// input.

#pragma once

#include "rovo/common.hpp"

#include <numbers>
#include <string>

namespace rovo::speaker {

enum class FeatureRecipe { kMelStats, kMfccStats };

inline std::string RecipeName(FeatureRecipe r) { return r == FeatureRecipe::kMelStats ? "mel-stats" : "mfcc-stats"; }

inline FeatureRecipe ParseRecipe(const std::string &s) {
  if (s == "mel-stats" || s == "mel") return FeatureRecipe::kMelStats;
  if (s == "mfcc-stats" || s == "mfcc") return FeatureRecipe::kMfccStats;
  Fail(ErrorKind::kConfig, "unknown speaker feature recipe '" + s + "'");
}

/// Orthonormal DCT-II rows first..first+count-1 over n inputs.
inline Matrix DctMatrix(int n, int first, int count) {
  Matrix d(count, n);
  for (int k = 0; k < count; ++k) {
    const int q = first + k;
    const double scale = std::sqrt((q == 0 ? 1.0 : 2.0) / n);
    for (int i = 0; i < n; ++i) d(k, i) = scale * std::cos(std::numbers::pi * q * (i + 0.5) / n);
  }
  return d;
}

constexpr double kStdEpsilon = 1e-8;

class StatsFeatures {
 public:
  StatsFeatures(FeatureRecipe recipe, int n_mels, int n_ceps = 20) : recipe_(recipe), n_mels_(n_mels) {
    Require(n_mels >= 1, "features: n_mels must be >= 1");
    if (recipe == FeatureRecipe::kMfccStats) {
      Require(n_ceps >= 1 && n_ceps < n_mels, "features: cepstral count must be in [1, n_mels)");
      dct_ = DctMatrix(n_mels, 1, n_ceps);  // c0 (overall level) is dropped
    }
  }

  FeatureRecipe recipe() const { return recipe_; }
  int n_mels() const { return n_mels_; }
  int coefficients() const { return recipe_ == FeatureRecipe::kMelStats ? n_mels_ : static_cast<int>(dct_.rows()); }
  int dim() const { return 2 * coefficients(); }

  struct Tape {
    Matrix centered;  // T x C, rows minus their mean
    Vector stddev;
  };

  /// T x n_mels log-mel -> 1 x dim feature row [mean | std].
  Matrix Forward(const Matrix &log_mel, Tape *tape = nullptr) const {
    Require(log_mel.cols() == n_mels_, "features: expected " + std::to_string(n_mels_) + " mel bands, got " +
                                           std::to_string(log_mel.cols()));
    Require(log_mel.rows() >= 1, "features: need at least one frame");
    const Matrix x = recipe_ == FeatureRecipe::kMelStats ? log_mel : Matrix(log_mel * dct_.transpose());
    const Vector mean = x.colwise().mean().transpose();
    Matrix centered = x.rowwise() - mean.transpose();
    const Vector stddev =
        ((centered.array().square().colwise().sum() / static_cast<double>(x.rows())) + kStdEpsilon).sqrt().matrix().transpose();
    Matrix out(1, dim());
    out.leftCols(coefficients()) = mean.transpose();
    out.rightCols(coefficients()) = stddev.transpose();
    if (tape) {
      tape->centered = std::move(centered);
      tape->stddev = stddev;
    }
    return out;
  }

  /// dL/d(log-mel) from dL/d(features).
  Matrix Backward(const Tape &tape, const Matrix &grad) const {
    if (tape.centered.size() == 0) Fail(ErrorKind::kPrecondition, "features backward called before forward");
    const int c = coefficients();
    const double t = static_cast<double>(tape.centered.rows());
    const Eigen::RowVectorXd g_mean = grad.leftCols(c);
    const Eigen::RowVectorXd g_std = grad.rightCols(c).array() / tape.stddev.transpose().array();
    // d std_j / d x_tj = (x_tj - mean_j) / (T std_j); the mean term of the
    // centering cancels because the centered rows sum to zero.
    Matrix gx = (tape.centered.array().rowwise() * g_std.array()).matrix() / t;
    gx.rowwise() += g_mean / t;
    return recipe_ == FeatureRecipe::kMelStats ? gx : Matrix(gx * dct_);
  }

 private:
  FeatureRecipe recipe_;
  int n_mels_;
  Matrix dct_;
};

}  // namespace rovo::speaker
