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

#include "rovo/common.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace rovo::signal {

constexpr int kDefaultSampleRate = 16000;

/// Mono PCM audio, amplitudes nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }

  Eigen::Map<const Vector> view() const {
    return Eigen::Map<const Vector>(samples.data(), static_cast<Eigen::Index>(samples.size()));
  }

  friend bool operator==(const Waveform &, const Waveform &) = default;
};

inline void ValidateWaveform(const Waveform &w, const char *who) {
  Require(w.sample_rate > 0, std::string(who) + ": sample rate must be positive");
  Require(!w.samples.empty(), std::string(who) + ": empty waveform");
  for (double s : w.samples)
    if (!std::isfinite(s)) Fail(ErrorKind::kNumerical, std::string(who) + ": non-finite sample");
}

inline double Rms(const Waveform &w) {
  if (w.empty()) return 0.0;
  return w.view().norm() / std::sqrt(static_cast<double>(w.size()));
}

enum class WindowKind { kHann, kRectangular };

/// Framing parameters shared by every spectral operation.
struct FrameSpec {
  int n_fft = 512;
  int hop = 128;
  WindowKind window = WindowKind::kHann;

  int bins() const { return n_fft / 2 + 1; }

  friend bool operator==(const FrameSpec &, const FrameSpec &) = default;
};

/// Periodic window of length n_fft.
inline Vector MakeWindow(const FrameSpec &spec) {
  Vector w(spec.n_fft);
  for (int n = 0; n < spec.n_fft; ++n) {
    w[n] = spec.window == WindowKind::kRectangular
               ? 1.0
               : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / spec.n_fft);
  }
  return w;
}

inline void ValidateFrameSpec(const FrameSpec &spec) {
  Require(spec.n_fft >= 2 && spec.n_fft % 2 == 0, "frame spec: n_fft must be even and >= 2");
  Require(spec.hop > 0 && spec.hop <= spec.n_fft, "frame spec: need 0 < hop <= n_fft");
}

/// True when the shifted windows sum to a constant (constant overlap-add).
inline bool SatisfiesCola(const FrameSpec &spec, double rel_tol = 1e-9) {
  if (spec.hop <= 0 || spec.hop > spec.n_fft) return false;
  const Vector w = MakeWindow(spec);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int n = 0; n < spec.hop; ++n) {
    double acc = 0.0;
    for (int k = n; k < spec.n_fft; k += spec.hop) acc += w[k];
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  return lo > 0.0 && (hi - lo) <= rel_tol * hi;
}

inline int NumFrames(std::size_t length, const FrameSpec &spec) {
  if (length < static_cast<std::size_t>(spec.n_fft)) return 0;
  return 1 + static_cast<int>((length - spec.n_fft) / spec.hop);
}

}  // namespace rovo::signal
