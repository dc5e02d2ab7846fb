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

// Signal-level baseline: the same PerC-AL loop, but the variable is the STFT
// magnitude of the (padded) input; resynthesis keeps the original phase.

#pragma once

#include "rovo/defense/pgd.hpp"

namespace rovo::defense {

/// RMS over all STFT magnitudes of the given utterances.
inline double MagnitudeRms(const std::vector<signal::Waveform> &waves, const signal::FrameSpec &spec) {
  double sq = 0.0, n = 0.0;
  for (const auto &w : waves) {
    const Matrix m = signal::Stft(w, spec).magnitude();
    sq += m.squaredNorm();
    n += static_cast<double>(m.size());
  }
  Require(n > 0.0, "magnitude rms: no frames");
  return std::sqrt(sq / n);
}

/// Step sizes rescaled to magnitude units; thresholds shared with `base`.
inline PercAlConfig SignalLevelConfig(const PercAlConfig &base, double magnitude_rms, double alpha_rel = 2e-3,
                                      double epsilon_rel = 0.01) {
  PercAlConfig c = base;
  c.alpha = alpha_rel * magnitude_rms;
  c.epsilon_init = epsilon_rel * magnitude_rms;
  return c;
}

/// Identity loss of one encoder on magnitude frames, with dL/dM added into
/// `grad` (scaled by `grad_scale`).
inline double MagnitudeIdentityLoss(const speaker::SpeakerEncoderModel &enc, const Matrix &mag,
                                    const speaker::SpeakerEmbedding &target, DistanceKind kind, Matrix *grad,
                                    double grad_scale) {
  if (target.encoder_id != enc.id())
    Fail(ErrorKind::kPrecondition, "identity_loss: target embedding from encoder '" + target.encoder_id +
                                       "' used with encoder '" + enc.id() + "'");
  const signal::MelFilterbank &fb = enc.filterbank();
  const double floor = fb.config().log_floor;
  const Matrix mel = fb.Apply(mag.cwiseAbs2());
  const Matrix log_mel = mel.cwiseMax(floor).array().log().matrix();
  speaker::SpeakerEncoderModel::Tape tape;
  const speaker::SpeakerEmbedding g = enc.EmbedMel(log_mel, grad ? &tape : nullptr);
  Vector dg;
  const double loss = EmbeddingDistance(g.values, target.values, kind, grad ? &dg : nullptr);
  if (grad) {
    const Matrix d_log = enc.Backward(tape, dg * grad_scale);
    const Matrix d_mel = (mel.array() > floor).select(d_log.array() / mel.array(), 0.0).matrix();
    *grad += 2.0 * mag.cwiseProduct(d_mel * fb.weights());
  }
  return loss;
}

/// Signal-level PerC-AL protection. Deterministic in `seed`.
inline DefenseResult SignalLevelProtect(const EncoderList &encoders, const signal::Waveform &x,
                                        const std::vector<speaker::SpeakerEmbedding> &targets, const PercAlConfig &config,
                                        std::uint64_t seed) {
  ValidatePercAlConfig(config);
  if (encoders.empty()) Fail(ErrorKind::kPrecondition, "signal_level_protect: no speaker encoders");
  Require(encoders.size() == targets.size(), "signal_level_protect: need one target per encoder");
  const signal::FrameSpec spec = encoders.front()->frame_spec();
  for (const auto *e : encoders)
    Require(e->frame_spec().n_fft == spec.n_fft && e->frame_spec().hop == spec.hop,
            "signal_level_protect: encoders disagree on the frame layout");
  Require(x.size() >= static_cast<std::size_t>(spec.n_fft), "signal_level_protect: input shorter than one frame");

  const signal::PaddedSignal padded = signal::PadForAnalysis(x, spec);
  const signal::ComplexSpectrogram s = signal::Stft(padded.padded, spec);
  const Matrix m_orig = s.magnitude();
  // Padded frame (offset / hop + j) is frame j of the unpadded input.
  const Eigen::Index first = static_cast<Eigen::Index>(padded.offset / spec.hop);
  const Eigen::Index count = signal::NumFrames(x.size(), spec);

  Rng rng(DeriveSeed(seed, "signal/init"));
  Matrix m = m_orig;
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::max(0.0, m.data()[i] + config.epsilon_init * rng.Normal());

  const double w = 1.0 / static_cast<double>(encoders.size());
  auto evaluate = [&](const Matrix &v, Matrix *g_id, Matrix *g_snr) {
    Matrix g_inner = Matrix::Zero(count, v.cols());
    double l = 0.0;
    for (std::size_t i = 0; i < encoders.size(); ++i)
      l += w * MagnitudeIdentityLoss(*encoders[i], v.middleRows(first, count), targets[i], config.distance, &g_inner, w);
    g_id->middleRows(first, count) = g_inner;
    const double snr = SnrLoss(m_orig, v, config.epsilon_stab, g_snr);
    return std::pair<double, double>{l, snr};
  };
  auto project = [&](Matrix &v) {
    v = v.cwiseMax(0.0);
    if (config.budget_rho) {
      const double r = *config.budget_rho;
      v = v.array().max(m_orig.array() - r).min(m_orig.array() + r).max(0.0).matrix();
    }
  };

  DefenseResult result;
  result.trace = RunPercAl(m, config, evaluate, project, &result.termination);
  result.identity_reentries = CountReentries(result.trace);
  result.e_adv = m;
  const signal::Waveform y = signal::Istft(signal::FromPolar(m, s.values, spec, s.sample_rate), spec);
  result.protected_audio = signal::TrimPadded(y, padded);
  return result;
}

}  // namespace rovo::defense
