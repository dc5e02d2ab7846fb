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

// Classical speech enhancement on STFT magnitudes, original phase kept.

#pragma once

#include "rovo/signal/stft.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace rovo::attack {

enum class EnhanceMethod { kSpectralMasking, kWiener, kSmoothing };

inline std::string MethodName(EnhanceMethod m) {
  switch (m) {
    case EnhanceMethod::kSpectralMasking: return "spectral-masking";
    case EnhanceMethod::kWiener: return "wiener";
    case EnhanceMethod::kSmoothing: return "smoothing";
  }
  return "unknown";
}

inline EnhanceMethod ParseMethod(const std::string &s) {
  if (s == "spectral-masking" || s == "masking") return EnhanceMethod::kSpectralMasking;
  if (s == "wiener") return EnhanceMethod::kWiener;
  if (s == "smoothing") return EnhanceMethod::kSmoothing;
  Fail(ErrorKind::kConfig, "unknown enhancement method '" + s + "'");
}

struct EnhanceConfig {
  EnhanceMethod method = EnhanceMethod::kSpectralMasking;
  int noise_frames = 0;  // frames in the noise estimate; 0 = lowest-energy 10%
  double over_subtraction = 2.0;
  double spectral_floor = 0.05;
  int kernel_width = 5;
  signal::FrameSpec frame_spec;
};

inline void ValidateEnhanceConfig(const EnhanceConfig &c) {
  if (!(c.over_subtraction > 0.0)) Fail(ErrorKind::kConfig, "enhance: over-subtraction factor must be > 0");
  if (!(c.spectral_floor > 0.0 && c.spectral_floor < 1.0)) Fail(ErrorKind::kConfig, "enhance: spectral floor must be in (0, 1)");
  if (c.kernel_width < 1 || c.kernel_width % 2 == 0) Fail(ErrorKind::kConfig, "enhance: kernel width must be odd and >= 1");
  if (c.noise_frames < 0) Fail(ErrorKind::kConfig, "enhance: noise frame count must be >= 0");
}

/// Mean magnitude per bin over the lowest-energy frames among `frames`.
inline Vector EstimateNoise(const Matrix &mag, const std::vector<Eigen::Index> &frames, int count) {
  std::vector<std::pair<double, Eigen::Index>> energy;
  for (Eigen::Index t : frames) energy.emplace_back(mag.row(t).squaredNorm(), t);
  std::sort(energy.begin(), energy.end());
  const std::size_t n = count > 0 ? std::min<std::size_t>(count, energy.size())
                                  : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * energy.size())));
  Vector noise = Vector::Zero(mag.cols());
  for (std::size_t i = 0; i < n; ++i) noise += mag.row(energy[i].second).transpose();
  return noise / static_cast<double>(n);
}

/// Temporal median over an odd window, truncated at the edges.
inline Matrix MedianOverTime(const Matrix &mag, int width) {
  if (width == 1) return mag;
  const int half = width / 2;
  Matrix out(mag.rows(), mag.cols());
  std::vector<double> buf;
  for (Eigen::Index k = 0; k < mag.cols(); ++k) {
    for (Eigen::Index t = 0; t < mag.rows(); ++t) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, t - half), hi = std::min<Eigen::Index>(mag.rows() - 1, t + half);
      buf.clear();
      for (Eigen::Index u = lo; u <= hi; ++u) buf.push_back(mag(u, k));
      auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
      std::nth_element(buf.begin(), mid, buf.end());
      double med = *mid;
      if (buf.size() % 2 == 0) med = 0.5 * (med + *std::max_element(buf.begin(), mid));
      out(t, k) = med;
    }
  }
  return out;
}

/// Applies the configured enhancement to the magnitudes of `mag`; frames
/// listed in `interior` feed the noise estimate.
inline Matrix EnhanceMagnitude(const Matrix &mag, const std::vector<Eigen::Index> &interior, const EnhanceConfig &c) {
  switch (c.method) {
    case EnhanceMethod::kSpectralMasking: {
      const Vector noise = EstimateNoise(mag, interior, c.noise_frames);
      Matrix out = mag;
      for (Eigen::Index t = 0; t < mag.rows(); ++t)
        for (Eigen::Index k = 0; k < mag.cols(); ++k)
          out(t, k) = std::max(mag(t, k) - c.over_subtraction * noise[k], c.spectral_floor * mag(t, k));
      return out;
    }
    case EnhanceMethod::kWiener: {
      const Vector noise = EstimateNoise(mag, interior, c.noise_frames);
      Matrix out = mag;
      for (Eigen::Index t = 0; t < mag.rows(); ++t) {
        for (Eigen::Index k = 0; k < mag.cols(); ++k) {
          const double np = noise[k] * noise[k];
          double gain = 1.0;
          if (np > 0.0) {
            const double prior = std::max(mag(t, k) * mag(t, k) / np - 1.0, 0.0);
            gain = prior / (1.0 + prior);
          }
          out(t, k) = std::max(gain, c.spectral_floor) * mag(t, k);
        }
      }
      return out;
    }
    case EnhanceMethod::kSmoothing:
      return MedianOverTime(mag, c.kernel_width);
  }
  return mag;
}

/// Length-preserving enhancement: pad, STFT, modify magnitudes, resynthesize
/// with the original phase, trim.
inline signal::Waveform Enhance(const signal::Waveform &x, const EnhanceConfig &c) {
  ValidateEnhanceConfig(c);
  signal::ValidateFrameSpec(c.frame_spec);
  Require(x.size() >= static_cast<std::size_t>(c.frame_spec.n_fft),
          "enhance: input shorter than the noise-estimate window (" + std::to_string(c.frame_spec.n_fft) + " samples)");
  const signal::PaddedSignal padded = signal::PadForAnalysis(x, c.frame_spec);
  const signal::ComplexSpectrogram s = signal::Stft(padded.padded, c.frame_spec);
  // Frames lying wholly inside the original signal; padding would otherwise
  // masquerade as silence in the noise estimate.
  std::vector<Eigen::Index> interior;
  for (Eigen::Index t = 0; t < s.frames(); ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * c.frame_spec.hop;
    if (start >= padded.offset && start + c.frame_spec.n_fft <= padded.offset + padded.original_length)
      interior.push_back(t);
  }
  Require(!interior.empty(), "enhance: input shorter than the noise-estimate window");
  const Matrix mag = s.magnitude();
  const Matrix out = EnhanceMagnitude(mag, interior, c);
  const signal::Waveform y = signal::Istft(signal::FromPolar(out, s.values, c.frame_spec, s.sample_rate), c.frame_spec);
  return signal::TrimPadded(y, padded);
}

/// |enhanced - original| / |protected - original| over STFT magnitudes,
/// all three trimmed to the shortest. 0 means the perturbation was removed.
inline double RemovalEfficacy(const signal::Waveform &original, const signal::Waveform &protected_audio,
                              const signal::Waveform &enhanced, const signal::FrameSpec &spec = {}) {
  const std::size_t n = std::min({original.size(), protected_audio.size(), enhanced.size()});
  Require(n >= static_cast<std::size_t>(spec.n_fft), "removal_efficacy: inputs shorter than one frame after trimming");
  auto mag = [&](const signal::Waveform &w) {
    signal::Waveform t{std::vector<double>(w.samples.begin(), w.samples.begin() + static_cast<std::ptrdiff_t>(n)),
                       w.sample_rate};
    return signal::Stft(t, spec).magnitude();
  };
  Require(original.sample_rate == protected_audio.sample_rate && original.sample_rate == enhanced.sample_rate,
          "removal_efficacy: sample rate mismatch");
  const Matrix o = mag(original);
  const double den = (mag(protected_audio) - o).norm();
  if (den == 0.0) Fail(ErrorKind::kPrecondition, "removal_efficacy: protected equals original (no perturbation)");
  return (mag(enhanced) - o).norm() / den;
}

}  // namespace rovo::attack
