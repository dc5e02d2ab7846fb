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

#include "rovo/diffnet/train.hpp"
#include "rovo/signal/mel.hpp"
#include "rovo/speaker/features.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace rovo::speaker {

/// Unit-norm speaker vector tagged with the encoder that produced it.
struct SpeakerEmbedding {
  Vector values;
  std::string encoder_id;

  Eigen::Index dim() const { return values.size(); }
};

/// d-vector style encoder: stats features -> affine -> tanh -> affine ->
/// L2-normalize. Feature standardization is folded into the first affine.
class SpeakerEncoderModel {
 public:
  SpeakerEncoderModel(std::string id, FeatureRecipe recipe, int n_ceps, signal::MelConfig mel,
                      signal::FrameSpec spec, int sample_rate, diffnet::Network network)
      : id_(std::move(id)),
        features_(recipe, mel.n_mels, n_ceps),
        n_ceps_(n_ceps),
        mel_(mel),
        spec_(spec),
        sample_rate_(sample_rate),
        network_(std::move(network)),
        filterbank_(std::make_shared<signal::MelFilterbank>(mel, spec, sample_rate)) {
    Require(!network_.empty() && std::holds_alternative<diffnet::L2Normalize>(network_.layers().back()),
            "speaker encoder: network must end in L2-normalize");
    Require(network_.input_dim() == features_.dim(), "speaker encoder: network input width " +
                                                         std::to_string(network_.input_dim()) +
                                                         " does not match feature width " +
                                                         std::to_string(features_.dim()));
  }

  const std::string &id() const { return id_; }
  FeatureRecipe recipe() const { return features_.recipe(); }
  int n_ceps() const { return n_ceps_; }
  int embedding_dim() const { return static_cast<int>(network_.output_dim()); }
  const signal::MelConfig &mel_config() const { return mel_; }
  const signal::FrameSpec &frame_spec() const { return spec_; }
  int sample_rate() const { return sample_rate_; }
  const diffnet::Network &network() const { return network_; }
  const StatsFeatures &features() const { return features_; }
  const signal::MelFilterbank &filterbank() const { return *filterbank_; }

  signal::MelFrames Analyze(const signal::Waveform &x) const {
    Require(x.sample_rate == sample_rate_, "speaker encoder: sample rate mismatch");
    Require(x.size() >= static_cast<std::size_t>(spec_.n_fft), "embed_speaker: input shorter than one frame");
    return signal::LogMel(signal::Stft(x, spec_), *filterbank_);
  }

  struct Tape {
    StatsFeatures::Tape features;
    diffnet::Tape network;
  };

  SpeakerEmbedding EmbedMel(const Matrix &log_mel, Tape *tape = nullptr) const {
    StatsFeatures::Tape ft;
    const Matrix f = features_.Forward(log_mel, tape ? &tape->features : &ft);
    diffnet::Tape nt = network_.Forward(f);
    SpeakerEmbedding e{nt.output().row(0).transpose(), id_};
    if (tape) tape->network = std::move(nt);
    return e;
  }
  SpeakerEmbedding Embed(const signal::MelFrames &mel, Tape *tape = nullptr) const { return EmbedMel(mel.values, tape); }
  SpeakerEmbedding Embed(const signal::Waveform &x) const { return EmbedMel(Analyze(x).values); }

  /// dL/d(log-mel) from dL/d(embedding).
  Matrix Backward(const Tape &tape, const Vector &grad_embedding) const {
    if (tape.network.empty()) Fail(ErrorKind::kPrecondition, "speaker backward called before forward");
    const Matrix g = network_.Backward(tape.network, grad_embedding.transpose()).input;
    return features_.Backward(tape.features, g);
  }

 private:
  std::string id_;
  StatsFeatures features_;
  int n_ceps_;
  signal::MelConfig mel_;
  signal::FrameSpec spec_;
  int sample_rate_;
  diffnet::Network network_;
  std::shared_ptr<const signal::MelFilterbank> filterbank_;
};

struct EncoderTrainOptions {
  int hidden = 64;
  int embedding_dim = 0;  // 0 = variant default (32 mel-stats, 24 mfcc-stats)
  int n_ceps = 20;
  int epochs = 800;
  double learning_rate = 0.5;
  double head_gain = 4.0;
  std::uint64_t seed = 1;
  signal::MelConfig mel;
  signal::FrameSpec frame_spec;
  int sample_rate = signal::kDefaultSampleRate;
};

inline int DefaultEmbeddingDim(FeatureRecipe r) { return r == FeatureRecipe::kMelStats ? 32 : 24; }

struct LabeledMel {
  const signal::MelFrames *mel;
  int label;
};

struct EncoderTrainResult {
  SpeakerEncoderModel model;
  double train_accuracy = 0.0;
  std::vector<double> loss_curve;
};

/// Trains encoder + softmax head on speaker classification, then keeps the
/// encoder (the head is discarded). Deterministic in `opts.seed`.
inline EncoderTrainResult TrainSpeakerEncoder(const std::vector<LabeledMel> &corpus, FeatureRecipe recipe,
                                              const EncoderTrainOptions &opts) {
  Require(!corpus.empty(), "train_speaker_encoder: empty corpus");
  std::map<int, int> counts;
  for (const auto &s : corpus) ++counts[s.label];
  Require(counts.size() >= 2, "train_speaker_encoder: need at least 2 speakers");
  const int classes = counts.rbegin()->first + 1;
  Require(counts.begin()->first >= 0, "train_speaker_encoder: negative label");

  const StatsFeatures features(recipe, opts.mel.n_mels, opts.n_ceps);
  Matrix feats(static_cast<Eigen::Index>(corpus.size()), features.dim());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    feats.row(static_cast<Eigen::Index>(i)) = features.Forward(corpus[i].mel->values);
  const Eigen::RowVectorXd mu = feats.colwise().mean();
  Eigen::RowVectorXd sigma = ((feats.rowwise() - mu).array().square().colwise().mean()).sqrt();
  sigma = sigma.cwiseMax(1e-6);

  diffnet::Dataset data;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    data.inputs.push_back(((feats.row(static_cast<Eigen::Index>(i)) - mu).array() / sigma.array()).matrix());
    data.labels.push_back(corpus[i].label);
  }

  const int emb = opts.embedding_dim > 0 ? opts.embedding_dim : DefaultEmbeddingDim(recipe);
  Rng rng(DeriveSeed(opts.seed, "speaker/" + RecipeName(recipe)));
  diffnet::Network net({diffnet::MakeAffine(features.dim(), opts.hidden, rng), diffnet::Tanh{},
                        diffnet::MakeAffine(opts.hidden, emb, rng), diffnet::L2Normalize{},
                        diffnet::MakeAffine(emb, classes, rng, opts.head_gain), diffnet::LogSoftmax{}});
  diffnet::TrainOptions to;
  to.epochs = opts.epochs;
  to.learning_rate = opts.learning_rate;
  to.seed = opts.seed;
  diffnet::TrainResult trained = diffnet::TrainClassifier(std::move(net), data, to);
  const double acc = diffnet::Accuracy(trained.network, data);

  // Keep the encoder part and fold standardization into its first layer.
  std::vector<diffnet::Layer> layers(trained.network.layers().begin(), trained.network.layers().begin() + 4);
  auto &first = std::get<diffnet::Affine>(layers[0]);
  const Eigen::RowVectorXd inv = sigma.cwiseInverse();
  first.bias -= first.weight * (mu.array() * inv.array()).matrix().transpose();
  first.weight = first.weight * inv.asDiagonal();
  diffnet::Network encoder(std::move(layers));
  diffnet::RoundParametersToFloat(encoder);

  return {SpeakerEncoderModel(RecipeName(recipe), recipe, opts.n_ceps, opts.mel, opts.frame_spec, opts.sample_rate,
                              std::move(encoder)),
          acc, std::move(trained.loss_curve)};
}

}  // namespace rovo::speaker
