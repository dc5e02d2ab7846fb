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

// Learned linear autoencoder over log-mel frames.
//
//   encode:          waveform -> STFT -> log-mel -> analysis affine -> embedding
//   decode_features: embedding -> residual refinement stages -> synthesis affine -> log-mel
//   decode:          log-mel -> clipped filterbank pseudo-inverse -> Griffin-Lim
//
// Only decode_features carries gradients; waveform synthesis happens once,
// after optimization.

#pragma once

#include "rovo/diffnet/network.hpp"
#include "rovo/signal/griffin_lim.hpp"
#include "rovo/signal/mel.hpp"

#include <memory>
#include <vector>

namespace rovo::codec {

/// frames x d codec embeddings.
struct EmbeddingSeq {
  Matrix values;
  signal::FrameSpec frame_spec;
  int sample_rate = signal::kDefaultSampleRate;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

struct CodecOptions {
  int dim = 32;
  double ridge = 1e-3;
  int refinement_stages = 0;
  int refinement_hidden = 32;
  int refinement_epochs = 200;
  double refinement_lr = 1e-3;
  int griffin_lim_iters = 32;
  std::uint64_t seed = 1;
  signal::MelConfig mel;
  signal::FrameSpec frame_spec;
  int sample_rate = signal::kDefaultSampleRate;
};

class CodecModel {
 public:
  CodecModel(signal::MelConfig mel, signal::FrameSpec spec, int sample_rate, diffnet::Affine analysis,
             diffnet::Network synthesis, std::vector<diffnet::Network> refinement, int gl_iters)
      : mel_(mel),
        spec_(spec),
        sample_rate_(sample_rate),
        analysis_(std::move(analysis)),
        synthesis_(std::move(synthesis)),
        refinement_(std::move(refinement)),
        gl_iters_(gl_iters),
        filterbank_(std::make_shared<signal::MelFilterbank>(mel, spec, sample_rate)) {
    Require(analysis_.in() == mel.n_mels, "codec: analysis map must consume n_mels features");
    Require(synthesis_.input_dim() == analysis_.out(), "codec: synthesis input must equal embedding dim");
    Require(synthesis_.output_dim() == mel.n_mels, "codec: synthesis output must equal n_mels");
    for (const auto &r : refinement_)
      Require(r.input_dim() == analysis_.out() && r.output_dim() == analysis_.out(),
              "codec: refinement stages must preserve the embedding shape");
    Require(gl_iters_ >= 1, "codec: griffin-lim iterations must be >= 1");
  }

  int dim() const { return static_cast<int>(analysis_.out()); }
  const signal::MelConfig &mel_config() const { return mel_; }
  const signal::FrameSpec &frame_spec() const { return spec_; }
  int sample_rate() const { return sample_rate_; }
  int griffin_lim_iters() const { return gl_iters_; }
  const diffnet::Affine &analysis() const { return analysis_; }
  const diffnet::Network &synthesis() const { return synthesis_; }
  const std::vector<diffnet::Network> &refinement() const { return refinement_; }
  const signal::MelFilterbank &filterbank() const { return *filterbank_; }

  signal::MelFrames Analyze(const signal::Waveform &x) const {
    Require(x.sample_rate == sample_rate_, "codec: sample rate " + std::to_string(x.sample_rate) +
                                               " does not match model rate " + std::to_string(sample_rate_));
    return signal::LogMel(signal::Stft(x, spec_), *filterbank_);
  }

  EmbeddingSeq EncodeMel(const signal::MelFrames &mel) const {
    Require(mel.values.cols() == mel_.n_mels, "encode: mel band count mismatch");
    EmbeddingSeq e;
    e.values = (mel.values * analysis_.weight.transpose()).rowwise() + analysis_.bias.transpose();
    e.frame_spec = spec_;
    e.sample_rate = sample_rate_;
    return e;
  }

  EmbeddingSeq Encode(const signal::Waveform &x) const { return EncodeMel(Analyze(x)); }

  /// Retained activations of decode_features for the reverse pass.
  struct DecodeTape {
    std::vector<diffnet::Tape> refinement;
    diffnet::Tape synthesis;
  };

  signal::MelFrames DecodeFeatures(const Matrix &embedding, DecodeTape *tape = nullptr) const {
    CheckEmbedding(embedding);
    Matrix e = embedding;
    if (tape) tape->refinement.clear();
    for (const auto &stage : refinement_) {
      diffnet::Tape t = stage.Forward(e);
      e = e + t.output();
      if (tape) tape->refinement.push_back(std::move(t));
    }
    diffnet::Tape syn = synthesis_.Forward(e);
    signal::MelFrames out;
    out.config = mel_;
    out.values = syn.output();
    if (tape) tape->synthesis = std::move(syn);
    return out;
  }
  signal::MelFrames DecodeFeatures(const EmbeddingSeq &e, DecodeTape *tape = nullptr) const {
    return DecodeFeatures(e.values, tape);
  }

  /// dL/d(embedding) from dL/d(log-mel).
  Matrix BackwardDecodeFeatures(const DecodeTape &tape, const Matrix &mel_grad) const {
    if (tape.synthesis.empty()) Fail(ErrorKind::kPrecondition, "codec backward called before decode_features");
    Matrix g = synthesis_.Backward(tape.synthesis, mel_grad).input;
    for (std::size_t i = refinement_.size(); i-- > 0;) g = g + refinement_[i].Backward(tape.refinement[i], g).input;
    return g;
  }

  /// Log-mel -> magnitude via the clipped pseudo-inverse, then Griffin-Lim.
  signal::Waveform Synthesize(const Matrix &log_mel) const {
    const Matrix mag = signal::MelToMagnitude(log_mel, *filterbank_);
    return signal::GriffinLim(mag, spec_, gl_iters_, sample_rate_);
  }

  signal::Waveform Decode(const Matrix &embedding) const { return Synthesize(DecodeFeatures(embedding).values); }
  signal::Waveform Decode(const EmbeddingSeq &e) const { return Decode(e.values); }

 private:
  void CheckEmbedding(const Matrix &e) const {
    if (e.cols() != dim())
      Fail(ErrorKind::kPrecondition, "decode: embedding dim " + std::to_string(e.cols()) + " does not match model dim " +
                                         std::to_string(dim()));
    Require(e.rows() >= 1, "decode: no frames");
    if (!e.allFinite()) Fail(ErrorKind::kNumerical, "decode: non-finite embedding");
  }

  signal::MelConfig mel_;
  signal::FrameSpec spec_;
  int sample_rate_;
  diffnet::Affine analysis_;
  diffnet::Network synthesis_;
  std::vector<diffnet::Network> refinement_;
  int gl_iters_;
  std::shared_ptr<const signal::MelFilterbank> filterbank_;
};

/// Stacks the log-mel frames of every utterance (rows) into one matrix.
inline Matrix StackFrames(const std::vector<signal::MelFrames> &mels) {
  Eigen::Index rows = 0;
  for (const auto &m : mels) rows += m.values.rows();
  Require(rows > 0, "fit_codec: empty corpus");
  Matrix out(rows, mels.front().values.cols());
  Eigen::Index r = 0;
  for (const auto &m : mels) {
    out.middleRows(r, m.values.rows()) = m.values;
    r += m.values.rows();
  }
  return out;
}

/// Ridge least squares Y ~ X W^T + b; returns the affine layer.
inline diffnet::Affine RidgeAffine(const Matrix &x, const Matrix &y, double ridge) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Matrix xa(n, d + 1);
  xa.leftCols(d) = x;
  xa.col(d).setOnes();
  Matrix gram = xa.transpose() * xa;
  gram.topLeftCorner(d, d).diagonal().array() += ridge;  // bias is not penalized
  const Matrix coef = gram.ldlt().solve(xa.transpose() * y);  // (d+1) x out
  diffnet::Affine a;
  a.weight = coef.topRows(d).transpose();
  a.bias = coef.row(d).transpose();
  return a;
}

/// Ridge least squares Y ~ X W^T without intercept.
inline Matrix RidgeLinear(const Matrix &x, const Matrix &y, double ridge) {
  Matrix gram = x.transpose() * x;
  gram.diagonal().array() += ridge;
  return gram.ldlt().solve(x.transpose() * y).transpose();
}

/// Works on frames lifted by the log floor, so silence sits at the origin
/// and the zero embedding decodes to silence. Analysis is the top-`dim`
/// right singular vectors of the lifted frame matrix; synthesis is the
/// ridge-regularized least-squares inverse map back to log-mel; optional refinement stages are residual MLPs trained by gradient
/// descent on the remaining reconstruction error.
inline CodecModel FitCodec(const std::vector<signal::MelFrames> &corpus, const CodecOptions &opt) {
  Require(!corpus.empty(), "fit_codec: empty corpus");
  Require(opt.dim >= 1 && opt.dim <= opt.mel.n_mels,
          "fit_codec: embedding dim " + std::to_string(opt.dim) + " outside [1, n_mels]");
  Require(opt.ridge >= 0.0, "fit_codec: ridge must be >= 0");
  const Matrix frames = StackFrames(corpus);
  Require(frames.cols() == opt.mel.n_mels, "fit_codec: corpus band count does not match mel config");

  const double silence = std::log(opt.mel.log_floor);
  const Matrix lifted = (frames.array() - silence).matrix();
  Eigen::JacobiSVD<Matrix> svd(lifted.transpose() * lifted, Eigen::ComputeFullU);
  Matrix basis = svd.matrixU().leftCols(opt.dim);  // n_mels x dim
  for (int j = 0; j < opt.dim; ++j) {
    Eigen::Index arg;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < 0.0) basis.col(j) *= -1.0;  // sign convention for reproducible files
  }
  diffnet::Affine analysis;
  analysis.weight = basis.transpose();
  analysis.bias = -silence * analysis.weight.rowwise().sum();

  const Matrix emb = lifted * analysis.weight.transpose();
  diffnet::Affine synth;
  synth.weight = RidgeLinear(emb, lifted, opt.ridge);
  synth.bias = Vector::Constant(opt.mel.n_mels, silence);

  std::vector<diffnet::Network> refinement;
  Rng rng(DeriveSeed(opt.seed, "codec/refinement"));
  for (int s = 0; s < opt.refinement_stages; ++s) {
    // Start near zero so every stage begins as the identity.
    diffnet::Network stage({diffnet::MakeAffine(opt.dim, opt.refinement_hidden, rng), diffnet::Tanh{},
                            diffnet::MakeAffine(opt.refinement_hidden, opt.dim, rng, 1e-3)});
    refinement.push_back(std::move(stage));
  }
  if (!refinement.empty()) {
    diffnet::Network syn_net({synth});
    CodecModel probe(opt.mel, opt.frame_spec, opt.sample_rate, analysis, syn_net, refinement, opt.griffin_lim_iters);
    const double scale = 1.0 / static_cast<double>(frames.size());
    for (int epoch = 0; epoch < opt.refinement_epochs; ++epoch) {
      CodecModel::DecodeTape tape;
      const Matrix recon = probe.DecodeFeatures(emb, &tape).values;
      const Matrix grad = 2.0 * scale * (recon - frames);
      Matrix g = syn_net.Backward(tape.synthesis, grad).input;
      for (std::size_t i = refinement.size(); i-- > 0;) {
        const diffnet::GradRecord rec = refinement[i].Backward(tape.refinement[i], g);
        for (std::size_t l = 0; l < rec.params.size(); ++l) {
          if (auto *a = std::get_if<diffnet::Affine>(&refinement[i].mutable_layers()[l])) {
            a->weight -= opt.refinement_lr * rec.params[l].weight;
            a->bias -= opt.refinement_lr * rec.params[l].bias;
          }
        }
        g = g + rec.input;
      }
      probe = CodecModel(opt.mel, opt.frame_spec, opt.sample_rate, analysis, syn_net, refinement, opt.griffin_lim_iters);
    }
  }

  diffnet::Network synthesis({synth});
  diffnet::Network analysis_net({analysis});
  diffnet::RoundParametersToFloat(synthesis);
  diffnet::RoundParametersToFloat(analysis_net);
  for (auto &r : refinement) diffnet::RoundParametersToFloat(r);
  return CodecModel(opt.mel, opt.frame_spec, opt.sample_rate, std::get<diffnet::Affine>(analysis_net.layers()[0]),
                    std::move(synthesis), std::move(refinement), opt.griffin_lim_iters);
}

}  // namespace rovo::codec
