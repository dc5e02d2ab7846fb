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

// Embedding-level protection: perturb the codec embeddings of an utterance
// until the speaker encoders place it near a target speaker, then pull the
// perturbation back while the target stays reached, then decode.

#pragma once

#include "rovo/defense/perc_al.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace rovo::defense {

using EncoderList = std::vector<const speaker::SpeakerEncoderModel *>;

/// One target embedding per encoder, taken from a target utterance.
inline std::vector<speaker::SpeakerEmbedding> TargetsFromWaveform(const EncoderList &encoders, const signal::Waveform &w) {
  std::vector<speaker::SpeakerEmbedding> out;
  for (const auto *e : encoders) out.push_back(e->Embed(w));
  return out;
}

/// One target embedding per encoder, taken from enrolled profiles (matched
/// by encoder id).
inline std::vector<speaker::SpeakerEmbedding> TargetsFromProfiles(const EncoderList &encoders,
                                                                  const std::vector<speaker::SpeakerProfile> &profiles) {
  std::vector<speaker::SpeakerEmbedding> out;
  for (const auto *e : encoders) {
    auto it = std::find_if(profiles.begin(), profiles.end(),
                           [&](const speaker::SpeakerProfile &p) { return p.encoder_id == e->id(); });
    if (it == profiles.end()) Fail(ErrorKind::kPrecondition, "defense: no target profile for encoder '" + e->id() + "'");
    out.push_back({it->embedding, it->encoder_id});
  }
  return out;
}

/// Corpus-derived defaults: thresholds and step sizes scaled to the data.
struct DefenseScales {
  double embedding_rms = 1.0;         // RMS of codec embedding coordinates
  double mean_impostor_distance = 1.0;  // mean D between different-speaker embeddings
};

inline PercAlConfig DefaultPercAlConfig(const DefenseScales &s) {
  PercAlConfig c;
  c.tau_identity = 0.8 * s.mean_impostor_distance;
  c.tau_snr_db = 15.0;
  c.max_iters = 500;
  c.alpha = 2e-3 * s.embedding_rms;
  c.epsilon_init = 0.01 * s.embedding_rms;
  return c;
}

inline double EmbeddingRms(const std::vector<codec::EmbeddingSeq> &embeddings) {
  double sq = 0.0, n = 0.0;
  for (const auto &e : embeddings) {
    sq += e.values.squaredNorm();
    n += static_cast<double>(e.values.size());
  }
  Require(n > 0.0, "embedding rms: no embeddings");
  return std::sqrt(sq / n);
}

/// Mean distance over all pairs of embeddings with different speaker labels.
inline double MeanImpostorDistance(const std::vector<speaker::SpeakerEmbedding> &embs, const std::vector<std::string> &labels,
                                   DistanceKind kind) {
  Require(embs.size() == labels.size(), "impostor distance: label count mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < embs.size(); ++i)
    for (std::size_t j = i + 1; j < embs.size(); ++j)
      if (labels[i] != labels[j]) {
        sum += EmbeddingDistance(embs[i].values, embs[j].values, kind);
        ++n;
      }
  Require(n > 0, "impostor distance: need at least two speakers");
  return sum / static_cast<double>(n);
}

/// Embedding-level PGD under the PerC-AL schedule. Deterministic in `seed`.
inline DefenseResult PgdProtect(const codec::CodecModel &codec, const EncoderList &encoders, const signal::Waveform &x,
                                const std::vector<speaker::SpeakerEmbedding> &targets, const PercAlConfig &config,
                                std::uint64_t seed) {
  ValidatePercAlConfig(config);
  if (encoders.empty()) Fail(ErrorKind::kPrecondition, "pgd_protect: no speaker encoders");
  Require(x.size() >= static_cast<std::size_t>(codec.frame_spec().n_fft), "pgd_protect: input shorter than one frame");
  const Matrix e_orig = codec.Encode(x).values;
  if (!e_orig.allFinite()) Fail(ErrorKind::kNumerical, "pgd_protect: encoding produced non-finite values");

  Rng rng(DeriveSeed(seed, "pgd/init"));
  Matrix e = e_orig;
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] += config.epsilon_init * rng.Normal();

  auto evaluate = [&](const Matrix &v, Matrix *g_id, Matrix *g_snr) {
    const double l = EnsembleIdentityLoss(codec, encoders, v, targets, config.distance, g_id);
    const double s = SnrLoss(e_orig, v, config.epsilon_stab, g_snr);
    return std::pair<double, double>{l, s};
  };
  auto project = [&](Matrix &v) {
    if (!config.budget_rho) return;
    const double r = *config.budget_rho;
    v = v.array().max(e_orig.array() - r).min(e_orig.array() + r).matrix();
  };

  DefenseResult result;
  result.trace = RunPercAl(e, config, evaluate, project, &result.termination);
  result.identity_reentries = CountReentries(result.trace);
  result.e_adv = e;
  result.protected_audio = codec.Decode(e);
  // Frames cover all but the tail remainder; zero-fill back to input length.
  result.protected_audio.samples.resize(std::max(result.protected_audio.size(), x.size()), 0.0);
  return result;
}

}  // namespace rovo::defense
