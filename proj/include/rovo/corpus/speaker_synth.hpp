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

// Source-filter voice synthesis: a jittered glottal pulse train through a
// spectral-tilt pole and three formant resonators.

#pragma once

#include "rovo/signal/waveform.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace rovo::corpus {

struct SpeakerSpec {
  std::string id;
  double f0_hz = 120.0;
  std::array<double, 3> formants_hz{500.0, 1500.0, 2500.0};
  std::array<double, 3> bandwidths_hz{80.0, 110.0, 160.0};
  double tilt_db_per_octave = -6.0;  // gain change of the tilt filter from 1 to 2 kHz
  double jitter = 0.01;              // relative std-dev of each pitch period
};

inline void ValidateSpeakerSpec(const SpeakerSpec &s, int sample_rate) {
  Require(s.f0_hz >= 70.0 && s.f0_hz <= 400.0, "speaker " + s.id + ": f0 outside [70, 400] Hz");
  Require(s.formants_hz[0] > 0.0 && s.formants_hz[0] < s.formants_hz[1] && s.formants_hz[1] < s.formants_hz[2],
          "speaker " + s.id + ": formants must be strictly increasing");
  Require(s.formants_hz[2] < sample_rate / 2.0, "speaker " + s.id + ": formant above Nyquist");
  Require(s.jitter >= 0.0 && s.jitter <= 0.05, "speaker " + s.id + ": jitter outside [0, 0.05]");
  for (double b : s.bandwidths_hz) Require(b > 0.0, "speaker " + s.id + ": non-positive bandwidth");
}

/// Draws a speaker whose parameters span adult voice ranges.
inline SpeakerSpec RandomSpeaker(const std::string &id, Rng &rng) {
  SpeakerSpec s;
  s.id = id;
  s.f0_hz = std::exp(rng.Uniform(std::log(85.0), std::log(260.0)));
  s.formants_hz = {rng.Uniform(320.0, 820.0), rng.Uniform(1000.0, 2200.0), rng.Uniform(2400.0, 3500.0)};
  s.bandwidths_hz = {rng.Uniform(50.0, 110.0), rng.Uniform(70.0, 150.0), rng.Uniform(100.0, 220.0)};
  s.tilt_db_per_octave = rng.Uniform(-5.5, -1.5);
  s.jitter = rng.Uniform(0.003, 0.02);
  return s;
}

namespace detail {

/// Two-pole resonator with unit gain at DC (Klatt-style).
class Resonator {
 public:
  void Set(double freq, double bw, int sr) {
    const double r = std::exp(-std::numbers::pi * bw / sr);
    b_ = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / sr);
    c_ = -r * r;
    a_ = 1.0 - b_ - c_;
  }
  double operator()(double x) {
    const double y = a_ * x + b_ * y1_ + c_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a_ = 1.0, b_ = 0.0, c_ = 0.0, y1_ = 0.0, y2_ = 0.0;
};

/// Pole p of y[n] = (1-p) x[n] + p y[n-1] whose 1 kHz -> 2 kHz gain change
/// equals `tilt_db` (bisection; the response is monotone in p).
inline double TiltPole(double tilt_db, int sr) {
  auto gain_db = [&](double p, double f) {
    const std::complex<double> z = std::polar(1.0, -2.0 * std::numbers::pi * f / sr);
    return 20.0 * std::log10(std::abs((1.0 - p) / (1.0 - p * z)));
  };
  double lo = 0.0, hi = 0.999;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double drop = gain_db(mid, 2000.0) - gain_db(mid, 1000.0);
    (drop > tilt_db ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

struct UtteranceOptions {
  double duration_s = 3.0;
  int sample_rate = signal::kDefaultSampleRate;
  double edge_silence_s = 0.15;
  double noise_floor = 1e-3;  // white background noise amplitude (std-dev)
  double target_rms = 0.08;
};

/// One utterance: a run of vowel-like syllables with a wandering f0 contour,
/// per-syllable formant shifts, short leading/trailing silences and a faint
/// noise floor. Deterministic in (speaker, rng state).
inline signal::Waveform SynthesizeUtterance(const SpeakerSpec &spk, const UtteranceOptions &opt, Rng &rng) {
  ValidateSpeakerSpec(spk, opt.sample_rate);
  const int sr = opt.sample_rate;
  const auto total = static_cast<std::size_t>(std::lround(opt.duration_s * sr));
  const auto edge = static_cast<std::size_t>(std::lround(opt.edge_silence_s * sr));
  Require(total > 2 * edge + static_cast<std::size_t>(sr / 10), "utterance: duration too short");

  signal::Waveform w;
  w.sample_rate = sr;
  w.samples.assign(total, 0.0);

  detail::Resonator res[3];
  const double pole = detail::TiltPole(spk.tilt_db_per_octave, sr);
  double tilt_state = 0.0;

  std::size_t pos = edge;
  const std::size_t end = total - edge;
  double f0_drift = rng.Uniform(-0.08, 0.08);
  double next_pulse = static_cast<double>(pos);
  while (pos < end) {
    const auto syl_len = std::min<std::size_t>(end - pos, static_cast<std::size_t>(rng.Uniform(0.16, 0.38) * sr));
    // Vowel variation moves the lower formants; F3 stays close to the speaker value.
    const double s1 = rng.Uniform(0.85, 1.18), s2 = rng.Uniform(0.88, 1.14), s3 = rng.Uniform(0.97, 1.03);
    std::array<double, 3> f = {spk.formants_hz[0] * s1, spk.formants_hz[1] * s2, spk.formants_hz[2] * s3};
    if (f[1] <= f[0] * 1.2) f[1] = f[0] * 1.2;
    if (f[2] <= f[1] * 1.1) f[2] = f[1] * 1.1;
    for (int k = 0; k < 3; ++k) res[k].Set(f[k], spk.bandwidths_hz[k], sr);
    const double f0_start = spk.f0_hz * (1.0 + f0_drift);
    f0_drift = std::clamp(f0_drift + rng.Uniform(-0.06, 0.06), -0.15, 0.15);
    const double f0_end = spk.f0_hz * (1.0 + f0_drift);
    const double level = rng.Uniform(0.75, 1.0);
    for (std::size_t i = 0; i < syl_len; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(syl_len);
      const double f0 = f0_start + (f0_end - f0_start) * u;
      double excitation = 0.0;
      if (static_cast<double>(pos + i) >= next_pulse) {
        excitation = 1.0;
        next_pulse += sr / f0 * (1.0 + spk.jitter * rng.Normal());
      }
      tilt_state = (1.0 - pole) * excitation + pole * tilt_state;
      double y = tilt_state;
      for (auto &r : res) y = r(y);
      // Raised-cosine attack/decay keeps syllable boundaries click-free.
      const double ramp = std::min({1.0, u / 0.15, (1.0 - u) / 0.15});
      const double env = 0.5 - 0.5 * std::cos(std::numbers::pi * std::max(ramp, 0.0));
      w.samples[pos + i] = level * env * y;
    }
    pos += syl_len;
  }

  const double rms = signal::Rms(w);
  const double gain = rms > 0.0 ? opt.target_rms * std::pow(10.0, rng.Uniform(-2.0, 2.0) / 20.0) / rms : 0.0;
  for (auto &s : w.samples) s = s * gain + opt.noise_floor * rng.Normal();
  return w;
}

}  // namespace rovo::corpus
