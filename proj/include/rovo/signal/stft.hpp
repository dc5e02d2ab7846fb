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

#include "rovo/signal/waveform.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <vector>

namespace rovo::signal {

using ComplexMatrix = Eigen::MatrixXcd;

/// frames x (n_fft/2 + 1) one-sided spectrum.
struct ComplexSpectrogram {
  ComplexMatrix values;
  FrameSpec frame_spec;
  int sample_rate = kDefaultSampleRate;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index bins() const { return values.cols(); }
  Matrix magnitude() const { return values.cwiseAbs(); }
  Matrix power() const { return values.cwiseAbs2(); }
};

namespace detail {

// Eigen::FFT caches twiddles per instance and is not safe to share.
inline Eigen::FFT<double> &ThreadFft() {
  thread_local Eigen::FFT<double> fft = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return f;
  }();
  return fft;
}

}  // namespace detail

/// Short-time Fourier transform without padding: frame t covers samples
/// [t*hop, t*hop + n_fft).
inline ComplexSpectrogram Stft(const Waveform &x, const FrameSpec &spec) {
  ValidateFrameSpec(spec);
  const int frames = NumFrames(x.size(), spec);
  Require(frames >= 1, "stft: waveform shorter than one frame (" + std::to_string(x.size()) + " < " +
                           std::to_string(spec.n_fft) + ")");
  const Vector window = MakeWindow(spec);
  ComplexSpectrogram out;
  out.frame_spec = spec;
  out.sample_rate = x.sample_rate;
  out.values.resize(frames, spec.bins());
  auto &fft = detail::ThreadFft();
  std::vector<double> buf(spec.n_fft);
  std::vector<std::complex<double>> spec_buf;
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * spec.hop;
    for (int n = 0; n < spec.n_fft; ++n) buf[n] = x.samples[start + n] * window[n];
    fft.fwd(spec_buf, buf);
    for (int k = 0; k < spec.bins(); ++k) out.values(t, k) = spec_buf[k];
  }
  return out;
}

/// Least-squares overlap-add inverse: each output sample is the window-weighted
/// average of the frames covering it. Samples with no window support are zero.
inline Waveform Istft(const ComplexSpectrogram &s, const FrameSpec &spec) {
  ValidateFrameSpec(spec);
  if (!SatisfiesCola(spec)) {
    Fail(ErrorKind::kPrecondition, "istft: window/hop combination (n_fft=" + std::to_string(spec.n_fft) +
                                       ", hop=" + std::to_string(spec.hop) + ") is not COLA");
  }
  Require(s.values.cols() == spec.bins(), "istft: bin count does not match frame spec");
  Require(s.values.rows() >= 1, "istft: empty spectrogram");
  const Eigen::Index frames = s.values.rows();
  const std::size_t length = static_cast<std::size_t>(frames - 1) * spec.hop + spec.n_fft;
  const Vector window = MakeWindow(spec);
  std::vector<double> acc(length, 0.0), norm(length, 0.0);
  auto &fft = detail::ThreadFft();
  std::vector<std::complex<double>> half(spec.bins());
  std::vector<double> frame;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int k = 0; k < spec.bins(); ++k) half[k] = s.values(t, k);
    fft.inv(frame, half, spec.n_fft);
    const std::size_t start = static_cast<std::size_t>(t) * spec.hop;
    for (int n = 0; n < spec.n_fft; ++n) {
      acc[start + n] += window[n] * frame[n];
      norm[start + n] += window[n] * window[n];
    }
  }
  Waveform out;
  out.sample_rate = s.sample_rate;
  out.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i) out.samples[i] = norm[i] > 1e-10 ? acc[i] / norm[i] : 0.0;
  return out;
}

inline ComplexSpectrogram FromPolar(const Matrix &magnitude, const ComplexMatrix &phase_source,
                                    const FrameSpec &spec, int sample_rate) {
  ComplexSpectrogram out;
  out.frame_spec = spec;
  out.sample_rate = sample_rate;
  out.values.resize(magnitude.rows(), magnitude.cols());
  for (Eigen::Index i = 0; i < magnitude.size(); ++i) {
    const std::complex<double> z = phase_source(i);
    const double a = std::abs(z);
    out.values(i) = a > 0.0 ? magnitude(i) * (z / a) : std::complex<double>(magnitude(i), 0.0);
  }
  return out;
}

/// Zero padding that gives every original sample full window support, so
/// modify-then-resynthesize round trips are exact when nothing is modified.
struct PaddedSignal {
  Waveform padded;
  std::size_t offset = 0;
  std::size_t original_length = 0;
};

inline PaddedSignal PadForAnalysis(const Waveform &x, const FrameSpec &spec) {
  PaddedSignal p;
  p.offset = static_cast<std::size_t>(spec.n_fft - spec.hop);
  p.original_length = x.size();
  std::size_t length = x.size() + 2 * p.offset;
  const std::size_t rem = (length - spec.n_fft) % spec.hop;
  if (rem != 0) length += spec.hop - rem;
  p.padded.sample_rate = x.sample_rate;
  p.padded.samples.assign(length, 0.0);
  std::copy(x.samples.begin(), x.samples.end(), p.padded.samples.begin() + static_cast<std::ptrdiff_t>(p.offset));
  return p;
}

inline Waveform TrimPadded(const Waveform &y, const PaddedSignal &p) {
  Waveform out;
  out.sample_rate = y.sample_rate;
  out.samples.assign(y.samples.begin() + static_cast<std::ptrdiff_t>(p.offset),
                     y.samples.begin() + static_cast<std::ptrdiff_t>(p.offset + p.original_length));
  return out;
}

}  // namespace rovo::signal
