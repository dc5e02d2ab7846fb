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
#include "rovo/speaker/verify.hpp"

#include <cmath>
#include <vector>

namespace rovo::eval {

constexpr double kSnrCapDb = 120.0;
constexpr double kLogSpectralFloor = 1e-8;

/// Defense success rate: percentage of rejected trials.
inline double Dsr(const std::vector<speaker::Verdict> &cell) {
  if (cell.empty()) Fail(ErrorKind::kPrecondition, "dsr: empty cell");
  std::size_t rejects = 0;
  for (auto v : cell) rejects += v == speaker::Verdict::kReject;
  return 100.0 * static_cast<double>(rejects) / static_cast<double>(cell.size());
}

/// 10 log10(|ref|^2 / |ref - test|^2) over the common prefix, capped at
/// kSnrCapDb (identical signals report the cap).
inline double WaveformSnr(const signal::Waveform &reference, const signal::Waveform &test) {
  const std::size_t n = std::min(reference.size(), test.size());
  Require(n > 0, "waveform_snr: empty input");
  double sig = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sig += reference.samples[i] * reference.samples[i];
    const double d = reference.samples[i] - test.samples[i];
    noise += d * d;
  }
  if (sig == 0.0) Fail(ErrorKind::kPrecondition, "waveform_snr: silent reference");
  if (noise == 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(sig / noise));
}

/// RMS over frames and bins of 20 log10 |X| differences, magnitudes floored
/// at kLogSpectralFloor.
inline double LogSpectralDistance(const signal::Waveform &reference, const signal::Waveform &test,
                                  const signal::FrameSpec &spec = {}) {
  const std::size_t n = std::min(reference.size(), test.size());
  Require(n >= static_cast<std::size_t>(spec.n_fft), "log_spectral_distance: input shorter than one frame");
  auto db = [&](const signal::Waveform &w) {
    signal::Waveform t{std::vector<double>(w.samples.begin(), w.samples.begin() + static_cast<std::ptrdiff_t>(n)),
                       w.sample_rate};
    return Matrix((20.0 * signal::Stft(t, spec).magnitude().array().max(kLogSpectralFloor).log10()).matrix());
  };
  const Matrix d = db(reference) - db(test);
  return std::sqrt(d.squaredNorm() / static_cast<double>(d.size()));
}

}  // namespace rovo::eval
