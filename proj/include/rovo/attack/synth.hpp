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

// Toy voice conversion by per-band statistics transfer.
//
// Each training speaker s has a per-band log-mel mean mu_s and std sigma_s.
// Relative to the corpus-wide (neutral) mu_0, sigma_0 the speaker is the
// affine band map  m -> g_s * m + o_s  with  g_s = sigma_s / sigma_0  and
// o_s = mu_s - g_s * mu_0. A ridge regression predicts [g; o] from a speaker
// embedding. Conversion neutralizes the content utterance with its own
// statistics, applies the predicted map, and resynthesizes.

#pragma once

#include "rovo/codec/codec.hpp"
#include "rovo/speaker/verify.hpp"

#include <map>
#include <string>
#include <vector>

namespace rovo::attack {

class ToySynthModel {
 public:
  ToySynthModel(std::string encoder_id, diffnet::Affine map, Vector neutral_mean, Vector neutral_std,
                signal::MelConfig mel, signal::FrameSpec spec, int sample_rate, int gl_iters)
      : encoder_id_(std::move(encoder_id)),
        map_(std::move(map)),
        neutral_mean_(std::move(neutral_mean)),
        neutral_std_(std::move(neutral_std)),
        mel_(mel),
        spec_(spec),
        sample_rate_(sample_rate),
        gl_iters_(gl_iters),
        filterbank_(std::make_shared<signal::MelFilterbank>(mel, spec, sample_rate)) {
    Require(map_.out() == 2 * mel.n_mels, "toy synth: map must output 2 * n_mels values");
    Require(neutral_mean_.size() == mel.n_mels && neutral_std_.size() == mel.n_mels, "toy synth: neutral profile size");
    if (!map_.weight.allFinite() || !map_.bias.allFinite()) Fail(ErrorKind::kNumerical, "toy synth: non-finite parameters");
    Require(gl_iters_ >= 1, "toy synth: griffin-lim iterations must be >= 1");
  }

  const std::string &encoder_id() const { return encoder_id_; }
  const diffnet::Affine &map() const { return map_; }
  const Vector &neutral_mean() const { return neutral_mean_; }
  const Vector &neutral_std() const { return neutral_std_; }
  const signal::MelConfig &mel_config() const { return mel_; }
  const signal::FrameSpec &frame_spec() const { return spec_; }
  int sample_rate() const { return sample_rate_; }
  int griffin_lim_iters() const { return gl_iters_; }
  int embedding_dim() const { return static_cast<int>(map_.in()); }

  /// Per-band [gain | offset] predicted for `embedding`.
  Vector PredictTransform(const Vector &embedding) const {
    Require(embedding.size() == map_.in(), "toy synth: embedding dim " + std::to_string(embedding.size()) +
                                               " does not match model dim " + std::to_string(map_.in()));
    return map_.weight * embedding + map_.bias;
  }

  /// Predicted mean log-mel profile of the speaker behind `embedding`.
  Vector PredictMeanProfile(const Vector &embedding) const {
    const Vector t = PredictTransform(embedding);
    const int b = mel_.n_mels;
    return t.head(b).cwiseProduct(neutral_mean_) + t.tail(b);
  }

  /// Converted log-mel frames (before resynthesis).
  Matrix ConvertMel(const Matrix &content_mel, const speaker::SpeakerEmbedding &stolen) const {
    if (stolen.encoder_id != encoder_id_)
      Fail(ErrorKind::kPrecondition, "synthesize_vc: embedding from encoder '" + stolen.encoder_id +
                                         "' but model expects '" + encoder_id_ + "'");
    const int b = mel_.n_mels;
    const Vector t = PredictTransform(stolen.values);
    const Eigen::RowVectorXd mu = content_mel.colwise().mean();
    const Eigen::RowVectorXd sd =
        ((content_mel.rowwise() - mu).array().square().colwise().mean() + 1e-8).sqrt();
    Matrix z = ((content_mel.rowwise() - mu).array().rowwise() / sd.array()).matrix();
    z = (z.array().rowwise() * neutral_std_.transpose().array()).matrix();
    z.rowwise() += neutral_mean_.transpose();
    Matrix out = (z.array().rowwise() * t.head(b).transpose().array()).matrix();
    out.rowwise() += t.tail(b).transpose();
    return out;
  }

  signal::Waveform Synthesize(const signal::Waveform &content, const speaker::SpeakerEmbedding &stolen) const {
    Require(content.sample_rate == sample_rate_, "synthesize_vc: sample rate mismatch");
    Require(content.size() >= static_cast<std::size_t>(spec_.n_fft), "synthesize_vc: content shorter than one frame");
    const Matrix mel = signal::LogMel(signal::Stft(content, spec_), *filterbank_).values;
    const Matrix converted = ConvertMel(mel, stolen);
    return signal::GriffinLim(signal::MelToMagnitude(converted, *filterbank_), spec_, gl_iters_, sample_rate_);
  }

 private:
  std::string encoder_id_;
  diffnet::Affine map_;
  Vector neutral_mean_;
  Vector neutral_std_;
  signal::MelConfig mel_;
  signal::FrameSpec spec_;
  int sample_rate_;
  int gl_iters_;
  std::shared_ptr<const signal::MelFilterbank> filterbank_;
};

struct SynthTrainOptions {
  double ridge = 1e-2;
  int griffin_lim_iters = 32;
  std::uint64_t seed = 1;
};

struct SpeakerUtterance {
  std::string speaker;
  const signal::MelFrames *mel;
};

struct SpeakerStats {
  Vector mean;
  Vector stddev;
};

/// Per-band mean/std over all frames of all utterances of each speaker, plus
/// the pooled ("neutral") statistics under key "".
inline std::map<std::string, SpeakerStats> BandStatistics(const std::vector<SpeakerUtterance> &corpus) {
  std::map<std::string, std::vector<const Matrix *>> by_speaker;
  for (const auto &u : corpus) {
    by_speaker[u.speaker].push_back(&u.mel->values);
    by_speaker[""].push_back(&u.mel->values);
  }
  std::map<std::string, SpeakerStats> out;
  for (const auto &[spk, mats] : by_speaker) {
    const Eigen::Index bands = mats.front()->cols();
    Vector sum = Vector::Zero(bands), sq = Vector::Zero(bands);
    double n = 0.0;
    for (const Matrix *m : mats) {
      sum += m->colwise().sum().transpose();
      sq += m->array().square().colwise().sum().matrix().transpose();
      n += static_cast<double>(m->rows());
    }
    SpeakerStats s;
    s.mean = sum / n;
    s.stddev = ((sq / n).array() - s.mean.array().square()).max(0.0).sqrt().max(1e-6).matrix();
    out.emplace(spk, std::move(s));
  }
  return out;
}

/// Fits the embedding -> band-transform regression over every training
/// utterance (its embedding paired with its speaker's transform).
inline ToySynthModel TrainToySynth(const std::vector<SpeakerUtterance> &corpus, const speaker::SpeakerEncoderModel &encoder,
                                   const SynthTrainOptions &opts) {
  Require(!corpus.empty(), "train_toy_synth: empty corpus");
  const auto stats = BandStatistics(corpus);
  Require(stats.size() >= 3, "train_toy_synth: need at least 2 speakers");  // +1 for the pooled entry
  const SpeakerStats &neutral = stats.at("");
  const int b = encoder.mel_config().n_mels;
  Require(neutral.mean.size() == b, "train_toy_synth: corpus band count does not match encoder mel config");

  std::map<std::string, Vector> targets;
  for (const auto &[spk, s] : stats) {
    if (spk.empty()) continue;
    Vector t(2 * b);
    t.head(b) = s.stddev.cwiseQuotient(neutral.stddev);
    t.tail(b) = s.mean - t.head(b).cwiseProduct(neutral.mean);
    targets.emplace(spk, std::move(t));
  }
  Matrix x(static_cast<Eigen::Index>(corpus.size()), encoder.embedding_dim());
  Matrix y(static_cast<Eigen::Index>(corpus.size()), 2 * b);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = encoder.Embed(*corpus[i].mel).values.transpose();
    y.row(static_cast<Eigen::Index>(i)) = targets.at(corpus[i].speaker).transpose();
  }
  diffnet::Network net({codec::RidgeAffine(x, y, opts.ridge)});
  diffnet::RoundParametersToFloat(net);
  const Vector mean = neutral.mean.cast<float>().cast<double>();
  const Vector sd = neutral.stddev.cast<float>().cast<double>();
  return ToySynthModel(encoder.id(), std::get<diffnet::Affine>(net.layers()[0]), mean, sd, encoder.mel_config(),
                       encoder.frame_spec(), encoder.sample_rate(), opts.griffin_lim_iters);
}

}  // namespace rovo::attack
