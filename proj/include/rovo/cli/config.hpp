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

// Run configuration: flat "section.key = value" text. Every key has a
// default; unknown keys are rejected. One master seed drives every stage
// through derived sub-seeds.

#pragma once

#include "rovo/eval/campaign.hpp"

#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace rovo::cli {

struct RunConfig {
  std::string corpus_dir = "corpus";
  std::string model_dir = "models";
  std::string report_dir = "report";
  std::string trace_dir;  // empty = no traces
  std::uint64_t seed = 20240917;
  std::size_t workers = 0;  // 0 = hardware concurrency

  int n_speakers = 16;
  int utts_per_speaker = 10;
  double duration_s = 3.0;
  int sample_rate = signal::kDefaultSampleRate;
  corpus::SplitRatios split;

  signal::FrameSpec frame;
  signal::MelConfig mel;

  codec::CodecOptions codec;
  speaker::EncoderTrainOptions encoder;
  std::vector<std::string> encoder_variants{"mel-stats", "mfcc-stats"};
  attack::SynthTrainOptions synth;

  eval::DefenseSettings defense;
  attack::EnhanceConfig enhance;
  eval::CampaignConfig campaign;

  std::size_t EffectiveWorkers() const { return workers ? workers : std::max(1u, std::thread::hardware_concurrency()); }
};

// ---- list helpers

inline std::vector<std::string> SplitList(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t p = s.find(sep, start);
    const std::string item = Trim(s.substr(start, p == std::string::npos ? std::string::npos : p - start));
    if (!item.empty()) out.push_back(item);
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

inline std::string JoinList(const std::vector<std::string> &items, const std::string &sep) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? sep : "") + items[i];
  return s;
}

// ---- the key table

struct ConfigField {
  std::string key;
  std::string help;
  std::function<std::string(const RunConfig &)> get;
  std::function<void(RunConfig &, const std::string &)> set;
};

namespace detail {

inline double ToDouble(const std::string &v, const std::string &key) {
  try {
    return ParseDouble(v, key);
  } catch (const Error &e) {
    Fail(ErrorKind::kConfig, key + ": '" + v + "' is not a number");
  }
}

inline long long ToInt(const std::string &v, const std::string &key) {
  try {
    return ParseInt(v, key);
  } catch (const Error &e) {
    Fail(ErrorKind::kConfig, key + ": '" + v + "' is not an integer");
  }
}

inline ConfigField Text(std::string key, std::string help, std::string RunConfig::*m) {
  return {key, help, [m](const RunConfig &c) { return c.*m; }, [m](RunConfig &c, const std::string &v) { c.*m = v; }};
}

template <class Get, class Set>
ConfigField Real(std::string key, std::string help, Get get, Set set) {
  return {key, help, [get](const RunConfig &c) { return FormatDouble(get(c)); },
          [key, set](RunConfig &c, const std::string &v) { set(c, ToDouble(v, key)); }};
}

template <class Get, class Set>
ConfigField Integer(std::string key, std::string help, Get get, Set set) {
  return {key, help, [get](const RunConfig &c) { return std::to_string(get(c)); },
          [key, set](RunConfig &c, const std::string &v) { set(c, ToInt(v, key)); }};
}

}  // namespace detail

#define ROVO_REAL(key, help, expr) \
  detail::Real(key, help, [](const RunConfig &c) { return c.expr; }, [](RunConfig &c, double v) { c.expr = v; })
#define ROVO_INT(key, help, expr, type)                                                       \
  detail::Integer(key, help, [](const RunConfig &c) { return static_cast<long long>(c.expr); }, \
                  [](RunConfig &c, long long v) { c.expr = static_cast<type>(v); })

inline const std::vector<ConfigField> &ConfigFields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    f.push_back(detail::Text("paths.corpus_dir", "corpus directory (manifest.txt + wav/)", &RunConfig::corpus_dir));
    f.push_back(detail::Text("paths.model_dir", "trained model directory", &RunConfig::model_dir));
    f.push_back(detail::Text("paths.report_dir", "evaluation report directory", &RunConfig::report_dir));
    f.push_back(detail::Text("paths.trace_dir", "directory for optimization traces (empty = none)", &RunConfig::trace_dir));
    f.push_back(ROVO_INT("run.seed", "master seed", seed, std::uint64_t));
    f.push_back(ROVO_INT("run.workers", "worker threads (0 = hardware concurrency)", workers, std::size_t));

    f.push_back(ROVO_INT("corpus.n_speakers", "synthetic speakers", n_speakers, int));
    f.push_back(ROVO_INT("corpus.utts_per_speaker", "utterances per speaker", utts_per_speaker, int));
    f.push_back(ROVO_REAL("corpus.duration_s", "utterance duration in seconds", duration_s));
    f.push_back(ROVO_INT("corpus.sample_rate", "sample rate in Hz", sample_rate, int));
    f.push_back(ROVO_REAL("split.train", "train (attacker-content) fraction", split.train));
    f.push_back(ROVO_REAL("split.enroll", "enrollment fraction", split.enroll));
    f.push_back(ROVO_REAL("split.test", "test (victim) fraction", split.test));

    f.push_back(ROVO_INT("signal.n_fft", "STFT frame length", frame.n_fft, int));
    f.push_back(ROVO_INT("signal.hop", "STFT hop", frame.hop, int));
    f.push_back(ROVO_INT("mel.n_mels", "mel bands", mel.n_mels, int));
    f.push_back(ROVO_REAL("mel.fmin", "lowest mel edge in Hz", mel.fmin));
    f.push_back(ROVO_REAL("mel.fmax", "highest mel edge in Hz", mel.fmax));
    f.push_back(ROVO_REAL("mel.log_floor", "floor applied before the log", mel.log_floor));

    f.push_back(ROVO_INT("codec.dim", "codec embedding dimension", codec.dim, int));
    f.push_back(ROVO_REAL("codec.ridge", "ridge penalty of the synthesis fit", codec.ridge));
    f.push_back(ROVO_INT("codec.refinement_stages", "residual refinement stages", codec.refinement_stages, int));
    f.push_back(ROVO_INT("codec.griffin_lim_iters", "decoder phase-reconstruction iterations", codec.griffin_lim_iters, int));

    f.push_back({"encoder.variants", "comma-separated speaker encoders (mel-stats, mfcc-stats)",
                 [](const RunConfig &c) { return JoinList(c.encoder_variants, ","); },
                 [](RunConfig &c, const std::string &v) { c.encoder_variants = SplitList(v, ','); }});
    f.push_back(ROVO_INT("encoder.hidden", "hidden width", encoder.hidden, int));
    f.push_back(ROVO_INT("encoder.n_ceps", "cepstra kept by mfcc-stats", encoder.n_ceps, int));
    f.push_back(ROVO_INT("encoder.epochs", "training epochs", encoder.epochs, int));
    f.push_back(ROVO_REAL("encoder.learning_rate", "gradient-descent step", encoder.learning_rate));

    f.push_back(ROVO_REAL("synth.ridge", "ridge penalty of the attacker fit", synth.ridge));
    f.push_back(ROVO_INT("synth.griffin_lim_iters", "attacker phase-reconstruction iterations", synth.griffin_lim_iters, int));

    f.push_back(ROVO_REAL("defense.tau_scale", "identity threshold as a fraction of the mean impostor distance",
                          defense.tau_scale));
    f.push_back(ROVO_REAL("defense.tau_snr_db", "quality threshold in dB", defense.tau_snr_db));
    f.push_back(ROVO_INT("defense.max_iters", "iteration budget", defense.max_iters, int));
    f.push_back(ROVO_REAL("defense.alpha_rel", "embedding step as a fraction of the embedding RMS", defense.alpha_rel));
    f.push_back(ROVO_REAL("defense.epsilon_rel", "embedding init noise as a fraction of the embedding RMS",
                          defense.epsilon_rel));
    f.push_back(ROVO_REAL("defense.signal_alpha_rel", "magnitude step as a fraction of the magnitude RMS",
                          defense.signal_alpha_rel));
    f.push_back(ROVO_REAL("defense.signal_epsilon_rel", "magnitude init noise as a fraction of the magnitude RMS",
                          defense.signal_epsilon_rel));
    f.push_back({"defense.budget_rho", "L-infinity projection radius (none = disabled)",
                 [](const RunConfig &c) { return c.defense.budget_rho ? FormatDouble(*c.defense.budget_rho) : "none"; },
                 [](RunConfig &c, const std::string &v) {
                   if (v == "none" || v.empty())
                     c.defense.budget_rho.reset();
                   else
                     c.defense.budget_rho = detail::ToDouble(v, "defense.budget_rho");
                 }});
    f.push_back({"defense.distance", "identity distance (l2 or cosine)",
                 [](const RunConfig &c) { return defense::DistanceName(c.defense.distance); },
                 [](RunConfig &c, const std::string &v) { c.defense.distance = defense::ParseDistance(v); }});

    f.push_back(ROVO_INT("enhance.noise_frames", "noise-estimate frames (0 = lowest-energy 10%)", enhance.noise_frames, int));
    f.push_back(ROVO_REAL("enhance.over_subtraction", "spectral-masking over-subtraction factor", enhance.over_subtraction));
    f.push_back(ROVO_REAL("enhance.spectral_floor", "floor as a fraction of the input magnitude", enhance.spectral_floor));
    f.push_back(ROVO_INT("enhance.kernel_width", "temporal median width (odd)", enhance.kernel_width, int));

    f.push_back(ROVO_INT("campaign.victims_per_speaker", "test utterances per speaker (0 = all)",
                         campaign.victims_per_speaker, int));
    f.push_back({"campaign.defenses", "comma-separated defenses (raw, embedding-level, signal-level)",
                 [](const RunConfig &c) {
                   std::vector<std::string> v;
                   for (auto d : c.campaign.defenses) v.push_back(eval::DefenseName(d));
                   return JoinList(v, ",");
                 },
                 [](RunConfig &c, const std::string &v) {
                   c.campaign.defenses.clear();
                   for (const auto &s : SplitList(v, ',')) c.campaign.defenses.push_back(eval::ParseDefense(s));
                 }});
    f.push_back({"campaign.protect_sets", "';'-separated encoder sets, encoders joined by '+'",
                 [](const RunConfig &c) {
                   std::vector<std::string> v;
                   for (const auto &s : c.campaign.protect_sets) v.push_back(eval::JoinEncoderSet(s));
                   return JoinList(v, ";");
                 },
                 [](RunConfig &c, const std::string &v) {
                   c.campaign.protect_sets.clear();
                   for (const auto &s : SplitList(v, ';')) c.campaign.protect_sets.push_back(SplitList(s, '+'));
                 }});
    f.push_back({"campaign.enhancements", "comma-separated attacks (none, spectral-masking, wiener, smoothing)",
                 [](const RunConfig &c) { return JoinList(c.campaign.enhancements, ","); },
                 [](RunConfig &c, const std::string &v) { c.campaign.enhancements = SplitList(v, ','); }});
    f.push_back({"campaign.verifiers", "comma-separated verifier encoders",
                 [](const RunConfig &c) { return JoinList(c.campaign.verifiers, ","); },
                 [](RunConfig &c, const std::string &v) { c.campaign.verifiers = SplitList(v, ','); }});
    return f;
  }();
  return fields;
}

#undef ROVO_REAL
#undef ROVO_INT

inline void SetConfigValue(RunConfig &c, const std::string &key, const std::string &value) {
  for (const auto &f : ConfigFields())
    if (f.key == key) {
      try {
        f.set(c, value);
      } catch (const Error &e) {
        if (e.kind() == ErrorKind::kConfig) throw;
        Fail(ErrorKind::kConfig, key + ": " + e.what());
      }
      return;
    }
  Fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

/// Every key with its effective value, in table order.
inline std::string SerializeConfig(const RunConfig &c) {
  std::string out;
  for (const auto &f : ConfigFields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

/// Checks cross-module invariants; every failure is a config error.
inline void ValidateRunConfig(const RunConfig &c) {
  try {
    corpus::CorpusOptions co;
    co.n_speakers = c.n_speakers;
    co.utts_per_speaker = c.utts_per_speaker;
    co.duration_s = c.duration_s;
    corpus::ValidateCorpusOptions(co);
    Require(c.sample_rate > 0, "corpus.sample_rate must be > 0");
    Require(c.split.train > 0.0 && c.split.enroll > 0.0 && c.split.test > 0.0, "split ratios must be positive");
    Require(std::abs(c.split.train + c.split.enroll + c.split.test - 1.0) <= 1e-9, "split ratios must sum to 1");
    signal::ValidateFrameSpec(c.frame);
    Require(signal::SatisfiesCola(c.frame), "signal.hop does not satisfy constant overlap-add for the Hann window");
    signal::MelFilterbank probe(c.mel, c.frame, c.sample_rate);
    Require(c.codec.dim >= 1 && c.codec.dim <= c.mel.n_mels, "codec.dim must lie in [1, mel.n_mels]");
    Require(c.codec.ridge >= 0.0, "codec.ridge must be >= 0");
    Require(c.codec.refinement_stages >= 0, "codec.refinement_stages must be >= 0");
    Require(c.codec.griffin_lim_iters >= 1 && c.synth.griffin_lim_iters >= 1, "griffin-lim iterations must be >= 1");
    Require(!c.encoder_variants.empty(), "encoder.variants is empty");
    for (const auto &v : c.encoder_variants) speaker::ParseRecipe(v);
    Require(c.encoder.hidden >= 1 && c.encoder.epochs >= 1 && c.encoder.learning_rate > 0.0, "encoder settings out of range");
    Require(c.encoder.n_ceps >= 1 && c.encoder.n_ceps < c.mel.n_mels, "encoder.n_ceps must lie in [1, mel.n_mels)");
    Require(c.synth.ridge >= 0.0, "synth.ridge must be >= 0");
    eval::ValidateDefenseSettings(c.defense);
    if (c.defense.max_iters < 1) Fail(ErrorKind::kConfig, "defense.max_iters must be >= 1");
    if (c.defense.budget_rho && !(*c.defense.budget_rho > 0.0)) Fail(ErrorKind::kConfig, "defense.budget_rho must be > 0");
    attack::ValidateEnhanceConfig(c.enhance);
    Require(c.campaign.victims_per_speaker >= 0, "campaign.victims_per_speaker must be >= 0");
    for (const auto &e : c.campaign.enhancements)
      if (e != eval::kNoEnhancement) attack::ParseMethod(e);
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    Fail(ErrorKind::kConfig, e.what());
  }
}

inline RunConfig ParseRunConfig(const std::string &text, const std::string &source) {
  RunConfig c;
  KeyValueFile kv;
  try {
    kv = KeyValueFile::Parse(text, source);
  } catch (const Error &e) {
    Fail(ErrorKind::kConfig, e.what());
  }
  for (const auto &k : kv.keys()) SetConfigValue(c, k, kv.Get(k));
  return c;
}

inline RunConfig LoadRunConfig(const std::string &path) {
  if (!std::filesystem::exists(path)) Fail(ErrorKind::kConfig, path + ": no such config file");
  return ParseRunConfig(diffnet::ReadTextFile(path), path);
}

// ---- derived per-stage settings

inline corpus::CorpusOptions CorpusOptionsFor(const RunConfig &c) {
  corpus::CorpusOptions o;
  o.seed = c.seed;
  o.n_speakers = c.n_speakers;
  o.utts_per_speaker = c.utts_per_speaker;
  o.duration_s = c.duration_s;
  o.sample_rate = c.sample_rate;
  return o;
}

inline std::uint64_t SplitSeed(const RunConfig &c) { return DeriveSeed(c.seed, "split"); }

inline eval::TrainConfig TrainConfigFor(const RunConfig &c) {
  eval::TrainConfig t;
  t.codec = c.codec;
  t.codec.mel = c.mel;
  t.codec.frame_spec = c.frame;
  t.codec.sample_rate = c.sample_rate;
  t.codec.seed = DeriveSeed(c.seed, "codec");
  t.encoder = c.encoder;
  t.encoder.seed = DeriveSeed(c.seed, "encoder");
  t.synth = c.synth;
  t.synth.seed = DeriveSeed(c.seed, "synth");
  t.recipes.clear();
  for (const auto &v : c.encoder_variants) t.recipes.push_back(speaker::ParseRecipe(v));
  return t;
}

inline eval::CampaignConfig CampaignConfigFor(const RunConfig &c) {
  eval::CampaignConfig k = c.campaign;
  k.defense = c.defense;
  k.enhance = c.enhance;
  k.enhance.frame_spec = c.frame;
  k.seed = DeriveSeed(c.seed, "campaign");
  k.workers = c.EffectiveWorkers();
  k.trace_dir = c.trace_dir;
  return k;
}

}  // namespace rovo::cli
