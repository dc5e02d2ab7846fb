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

#include <numbers>
#include <vector>

namespace rovo::signal {

constexpr std::uint64_t kGriffinLimPhaseSeed = 0x6c696d5f70686173ULL;

/// ‖|S| − A‖_F / ‖A‖_F; zero when both are zero.
inline double SpectralConvergence(const Matrix &estimate_mag, const Matrix &target_mag) {
  const double denom = target_mag.norm();
  const double num = (estimate_mag - target_mag).norm();
  if (denom == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / denom;
}

inline constexpr double kGriffinLimMomentum = 0.99;

/// Griffin-Lim with momentum from a deterministic pseudo-random initial
/// phase. Each iteration tries the extrapolated step and falls back to the
/// plain projection step when the extrapolated one does not lower the
/// spectral convergence; the plain step never raises it, so the sequence
/// written to `convergence` (one entry per iteration) is non-increasing.
inline Waveform GriffinLim(const Matrix &magnitude, const FrameSpec &spec, int iters, int sample_rate,
                           std::uint64_t seed = kGriffinLimPhaseSeed,
                           std::vector<double> *convergence = nullptr) {
  Require(iters >= 1, "griffin_lim: iters must be >= 1");
  Require(magnitude.cols() == spec.bins(), "griffin_lim: bin count does not match frame spec");
  Require(magnitude.rows() >= 1, "griffin_lim: no frames");
  if ((magnitude.array() < 0.0).any()) Fail(ErrorKind::kPrecondition, "griffin_lim: negative magnitude");
  if (!magnitude.allFinite()) Fail(ErrorKind::kNumerical, "griffin_lim: non-finite magnitude");

  Rng rng(seed);
  ComplexMatrix phase(magnitude.rows(), magnitude.cols());
  for (Eigen::Index i = 0; i < phase.size(); ++i)
    phase(i) = std::polar(1.0, 2.0 * std::numbers::pi * rng.Uniform());

  struct Iterate {
    Waveform x;
    ComplexMatrix spectrum;
    double sc = 0.0;
  };
  auto step = [&](const ComplexMatrix &phase_source) {
    Iterate it;
    it.x = Istft(FromPolar(magnitude, phase_source, spec, sample_rate), spec);
    it.spectrum = Stft(it.x, spec).values;
    it.sc = SpectralConvergence(it.spectrum.cwiseAbs(), magnitude);
    return it;
  };

  if (convergence) convergence->clear();
  Iterate cur = step(phase);
  ComplexMatrix prev = cur.spectrum;
  if (convergence) convergence->push_back(cur.sc);
  for (int it = 1; it < iters; ++it) {
    Iterate next = step(cur.spectrum + kGriffinLimMomentum * (cur.spectrum - prev));
    if (next.sc > cur.sc) next = step(cur.spectrum);
    prev = std::move(cur.spectrum);
    cur = std::move(next);
    if (convergence) convergence->push_back(cur.sc);
  }
  return cur.x;
}

}  // namespace rovo::signal
