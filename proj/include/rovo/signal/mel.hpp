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

#include "rovo/signal/stft.hpp"

#include <cmath>

namespace rovo::signal {

struct MelConfig {
  int n_mels = 64;
  double fmin = 50.0;
  double fmax = 7600.0;
  double log_floor = 1e-10;

  friend bool operator==(const MelConfig &, const MelConfig &) = default;
};

/// frames x n_mels natural-log mel energies.
struct MelFrames {
  Matrix values;
  MelConfig config;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index bands() const { return values.cols(); }
};

inline double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filterbank on the HTK mel scale, one row per band, each row
/// normalized to unit sum. A band too narrow to contain any FFT bin centre
/// is assigned entirely to the bin nearest its centre frequency.
class MelFilterbank {
 public:
  MelFilterbank(const MelConfig &config, const FrameSpec &spec, int sample_rate)
      : config_(config), spec_(spec), sample_rate_(sample_rate) {
    Require(config.n_mels >= 1, "mel: n_mels must be >= 1");
    Require(config.fmin >= 0.0 && config.fmin < config.fmax, "mel: need 0 <= fmin < fmax");
    Require(config.fmax <= sample_rate / 2.0, "mel: fmax above Nyquist");
    Require(config.log_floor > 0.0, "mel: log floor must be positive");
    const int bins = spec.bins();
    const double mel_lo = HzToMel(config.fmin), mel_hi = HzToMel(config.fmax);
    std::vector<double> edges(config.n_mels + 2);
    for (int i = 0; i < config.n_mels + 2; ++i)
      edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (config.n_mels + 1));
    const double bin_hz = static_cast<double>(sample_rate) / spec.n_fft;
    weights_ = Matrix::Zero(config.n_mels, bins);
    for (int m = 0; m < config.n_mels; ++m) {
      const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
      for (int k = 0; k < bins; ++k) {
        const double f = k * bin_hz;
        double w = 0.0;
        if (f > left && f <= centre) w = (f - left) / (centre - left);
        else if (f > centre && f < right) w = (right - f) / (right - centre);
        weights_(m, k) = w;
      }
      const double sum = weights_.row(m).sum();
      if (sum > 0.0) {
        weights_.row(m) /= sum;
      } else {
        const int nearest = std::clamp(static_cast<int>(std::lround(centre / bin_hz)), 0, bins - 1);
        weights_(m, nearest) = 1.0;
      }
    }
    pinv_ = weights_.completeOrthogonalDecomposition().pseudoInverse();
  }

  const Matrix &weights() const { return weights_; }          // n_mels x bins
  const Matrix &pseudo_inverse() const { return pinv_; }      // bins x n_mels
  const MelConfig &config() const { return config_; }
  const FrameSpec &frame_spec() const { return spec_; }
  int sample_rate() const { return sample_rate_; }

  /// frames x bins power -> frames x n_mels linear mel energy.
  Matrix Apply(const Matrix &power) const { return power * weights_.transpose(); }

  /// Least-norm power spectrum for the given mel energies, clipped at zero.
  Matrix InvertToPower(const Matrix &mel_energy) const {
    return (mel_energy * pinv_.transpose()).cwiseMax(0.0);
  }

 private:
  MelConfig config_;
  FrameSpec spec_;
  int sample_rate_;
  Matrix weights_;
  Matrix pinv_;
};

inline MelFrames LogMelFromPower(const Matrix &power, const MelFilterbank &fb) {
  MelFrames out;
  out.config = fb.config();
  out.values = fb.Apply(power).cwiseMax(fb.config().log_floor).array().log().matrix();
  return out;
}

inline MelFrames LogMel(const ComplexSpectrogram &s, const MelFilterbank &fb) {
  Require(s.values.cols() == fb.weights().cols(), "log_mel: bin count does not match filterbank");
  return LogMelFromPower(s.power(), fb);
}

inline MelFrames LogMel(const ComplexSpectrogram &s, const MelConfig &config) {
  return LogMel(s, MelFilterbank(config, s.frame_spec, s.sample_rate));
}

/// Magnitudes for log-mel frames via the clipped filterbank pseudo-inverse.
inline Matrix MelToMagnitude(const Matrix &log_mel, const MelFilterbank &fb) {
  return fb.InvertToPower(log_mel.array().exp().matrix()).cwiseSqrt();
}

}  // namespace rovo::signal
