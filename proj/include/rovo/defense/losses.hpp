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

// Identity (target-distance) and quality (SNR) losses with gradients.

#pragma once

#include "rovo/codec/codec.hpp"
#include "rovo/speaker/verify.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace rovo::defense {

enum class DistanceKind { kL2, kCosine };

inline std::string DistanceName(DistanceKind k) { return k == DistanceKind::kL2 ? "l2" : "cosine"; }

inline DistanceKind ParseDistance(const std::string &s) {
  if (s == "l2") return DistanceKind::kL2;
  if (s == "cosine") return DistanceKind::kCosine;
  Fail(ErrorKind::kConfig, "unknown distance kind '" + s + "'");
}

/// D(a, b) and, when `grad_a` is set, dD/da.
inline double EmbeddingDistance(const Vector &a, const Vector &b, DistanceKind kind, Vector *grad_a = nullptr) {
  if (a.size() != b.size())
    Fail(ErrorKind::kPrecondition, "identity_loss: embedding shape mismatch (" + std::to_string(a.size()) + " vs " +
                                       std::to_string(b.size()) + ")");
  if (kind == DistanceKind::kL2) {
    const Vector diff = a - b;
    const double d = diff.norm();
    if (grad_a) *grad_a = d > 0.0 ? Vector(diff / d) : Vector(Vector::Zero(a.size()));
    return d;
  }
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    if (grad_a) *grad_a = Vector::Zero(a.size());
    return 1.0;
  }
  const double c = a.dot(b) / (na * nb);
  if (grad_a) *grad_a = -(b / (na * nb) - c * a / (na * na));
  return 1.0 - c;
}

/// Speaker-encoder output for codec embeddings, through decode_features.
inline speaker::SpeakerEmbedding EmbedCodecFeatures(const codec::CodecModel &codec, const speaker::SpeakerEncoderModel &enc,
                                                    const Matrix &embedding) {
  return enc.EmbedMel(codec.DecodeFeatures(embedding).values);
}

/// Identity loss for one encoder; adds dL/d(embedding) into `grad` when set.
inline double IdentityLoss(const codec::CodecModel &codec, const speaker::SpeakerEncoderModel &enc, const Matrix &e_perturb,
                           const speaker::SpeakerEmbedding &target, DistanceKind kind, Matrix *grad = nullptr,
                           double grad_scale = 1.0) {
  if (target.encoder_id != enc.id())
    Fail(ErrorKind::kPrecondition, "identity_loss: target embedding from encoder '" + target.encoder_id +
                                       "' used with encoder '" + enc.id() + "'");
  if (e_perturb.cols() != codec.dim())
    Fail(ErrorKind::kPrecondition, "identity_loss: embedding dim " + std::to_string(e_perturb.cols()) +
                                       " does not match codec dim " + std::to_string(codec.dim()));
  if (!grad) return EmbeddingDistance(EmbedCodecFeatures(codec, enc, e_perturb).values, target.values, kind);
  codec::CodecModel::DecodeTape dtape;
  const Matrix mel = codec.DecodeFeatures(e_perturb, &dtape).values;
  speaker::SpeakerEncoderModel::Tape stape;
  const speaker::SpeakerEmbedding g = enc.EmbedMel(mel, &stape);
  Vector dg;
  const double loss = EmbeddingDistance(g.values, target.values, kind, &dg);
  const Matrix dmel = enc.Backward(stape, dg * grad_scale);
  *grad += codec.BackwardDecodeFeatures(dtape, dmel);
  return loss;
}

/// Target given as codec embeddings: G(e_target) is computed the same way.
inline double IdentityLoss(const codec::CodecModel &codec, const speaker::SpeakerEncoderModel &enc, const Matrix &e_perturb,
                           const codec::EmbeddingSeq &e_target, DistanceKind kind) {
  return IdentityLoss(codec, enc, e_perturb, EmbedCodecFeatures(codec, enc, e_target.values), kind);
}

/// Mean of the per-encoder identity losses; gradient likewise averaged.
inline double EnsembleIdentityLoss(const codec::CodecModel &codec,
                                   const std::vector<const speaker::SpeakerEncoderModel *> &encoders,
                                   const Matrix &e_perturb, const std::vector<speaker::SpeakerEmbedding> &targets,
                                   DistanceKind kind, Matrix *grad = nullptr) {
  if (encoders.empty()) Fail(ErrorKind::kPrecondition, "ensemble_identity_loss: empty encoder list");
  Require(encoders.size() == targets.size(), "ensemble_identity_loss: need one target per encoder");
  const double w = 1.0 / static_cast<double>(encoders.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < encoders.size(); ++i)
    sum += IdentityLoss(codec, *encoders[i], e_perturb, targets[i], kind, grad, w);
  return sum * w;
}

/// 10 log10(|e_orig|^2 / (|e_orig - e_perturb|^2 + eps)), Frobenius norms.
/// With `grad` set, stores dSNR/d(e_perturb).
inline double SnrLoss(const Matrix &e_orig, const Matrix &e_perturb, double epsilon_stab, Matrix *grad = nullptr) {
  if (e_orig.rows() != e_perturb.rows() || e_orig.cols() != e_perturb.cols())
    Fail(ErrorKind::kPrecondition, "snr_loss: shape mismatch");
  Require(epsilon_stab > 0.0, "snr_loss: epsilon_stab must be > 0");
  const double signal = e_orig.squaredNorm();
  if (signal == 0.0) Fail(ErrorKind::kPrecondition, "snr_loss: all-zero original embedding");
  const double noise = (e_orig - e_perturb).squaredNorm() + epsilon_stab;
  if (grad) *grad = (-20.0 / std::numbers::ln10) * (e_perturb - e_orig) / noise;
  return 10.0 * std::log10(signal / noise);
}

}  // namespace rovo::defense
