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

#include "rovo/speaker/encoder.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace rovo::speaker {

/// Cosine similarity, clamped to [-1, 1] against rounding.
inline double Similarity(const Vector &a, const Vector &b) {
  if (a.size() != b.size())
    Fail(ErrorKind::kPrecondition, "similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                                       std::to_string(b.size()) + ")");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

inline double Similarity(const SpeakerEmbedding &a, const SpeakerEmbedding &b) { return Similarity(a.values, b.values); }

struct SpeakerProfile {
  std::string speaker_id;
  std::string encoder_id;
  Vector embedding;  // unit norm
  int count = 0;
};

/// Mean of the sample embeddings, re-normalized.
inline SpeakerProfile EnrollEmbeddings(const std::string &speaker_id, const std::vector<SpeakerEmbedding> &samples) {
  Require(!samples.empty(), "enroll: no samples for speaker '" + speaker_id + "'");
  SpeakerProfile p;
  p.speaker_id = speaker_id;
  p.encoder_id = samples.front().encoder_id;
  p.embedding = Vector::Zero(samples.front().dim());
  for (const auto &s : samples) {
    Require(s.encoder_id == p.encoder_id, "enroll: samples come from different encoders");
    p.embedding += s.values;
  }
  const double n = p.embedding.norm();
  if (n > 0.0) p.embedding /= n;
  p.count = static_cast<int>(samples.size());
  return p;
}

inline SpeakerProfile Enroll(const SpeakerEncoderModel &model, const std::string &speaker_id,
                             const std::vector<signal::Waveform> &samples) {
  Require(!samples.empty(), "enroll: no samples for speaker '" + speaker_id + "'");
  std::vector<SpeakerEmbedding> embs;
  for (const auto &w : samples) embs.push_back(model.Embed(w));
  return EnrollEmbeddings(speaker_id, embs);
}

struct VerifierConfig {
  std::string encoder_id;
  double threshold = 0.5;
  double eer = 0.0;
};

struct ScoredTrial {
  double score;
  bool same_speaker;
};

struct EerPoint {
  double threshold = 0.0;
  double eer = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

/// Equal-error-rate operating point. Candidate thresholds are the midpoints
/// between consecutive distinct scores plus one below/above the range;
/// accept means score >= threshold. The candidate minimizing |FAR - FRR|
/// wins; ties go to the lower threshold.
inline EerPoint ComputeEer(const std::vector<ScoredTrial> &trials) {
  std::size_t n_target = 0, n_nontarget = 0;
  for (const auto &t : trials) (t.same_speaker ? n_target : n_nontarget)++;
  Require(n_target > 0 && n_nontarget > 0, "calibrate_threshold: trial set needs both same- and different-speaker pairs");

  std::vector<double> scores;
  for (const auto &t : trials) scores.push_back(t.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> candidates;
  candidates.push_back(scores.front() - 1e-6);
  for (std::size_t i = 1; i < scores.size(); ++i) candidates.push_back(0.5 * (scores[i - 1] + scores[i]));
  candidates.push_back(scores.back() + 1e-6);

  EerPoint best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double th : candidates) {
    std::size_t fa = 0, fr = 0;
    for (const auto &t : trials) {
      const bool accept = t.score >= th;
      if (t.same_speaker && !accept) ++fr;
      if (!t.same_speaker && accept) ++fa;
    }
    const double far = static_cast<double>(fa) / n_nontarget, frr = static_cast<double>(fr) / n_target;
    const double gap = std::abs(far - frr);
    if (gap < best_gap - 1e-15) {  // strict: the first (lowest) threshold keeps ties
      best_gap = gap;
      best = {th, 0.5 * (far + frr), far, frr};
    }
  }
  best.threshold = std::clamp(best.threshold, -1.0, 1.0);
  return best;
}

inline VerifierConfig CalibrateThreshold(const std::string &encoder_id, const std::vector<ScoredTrial> &trials) {
  const EerPoint p = ComputeEer(trials);
  return {encoder_id, p.threshold, p.eer};
}

enum class Verdict { kAccept, kReject };

inline const char *VerdictName(Verdict v) { return v == Verdict::kAccept ? "accept" : "reject"; }

/// Accept iff cosine(profile, probe) >= threshold (ties accept).
inline Verdict Verify(const SpeakerProfile &profile, const SpeakerEmbedding &probe, const VerifierConfig &config,
                      double *score_out = nullptr) {
  if (profile.encoder_id != config.encoder_id)
    Fail(ErrorKind::kPrecondition, "verify: profile encoder '" + profile.encoder_id + "' does not match verifier '" +
                                       config.encoder_id + "'");
  if (probe.encoder_id != config.encoder_id)
    Fail(ErrorKind::kPrecondition, "verify: probe encoder '" + probe.encoder_id + "' does not match verifier '" +
                                       config.encoder_id + "'");
  const double s = Similarity(profile.embedding, probe.values);
  if (score_out) *score_out = s;
  return s >= config.threshold ? Verdict::kAccept : Verdict::kReject;
}

}  // namespace rovo::speaker
