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

// The trained model set (codec, encoders, attackers, verifiers, profiles,
// corpus scales), how it is trained from a split corpus, how it is stored,
// and the two pipeline roles built on it: protecting a victim utterance and
// cloning a voice from it.

#pragma once

#include "rovo/attack/enhance.hpp"
#include "rovo/corpus/generate.hpp"
#include "rovo/defense/signal_level.hpp"
#include "rovo/store.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rovo::eval {

/// Corpus-derived scales used to set default step sizes and thresholds.
struct ModelScales {
  double embedding_rms = 1.0;  // codec embedding coordinates
  double magnitude_rms = 1.0;  // STFT magnitudes
  std::map<std::string, double> impostor_l2;      // per encoder id
  std::map<std::string, double> impostor_cosine;  // per encoder id
};

/// Everything the pipeline needs after training. Vectors are parallel and
/// indexed by encoder position.
struct ModelBundle {
  codec::CodecModel codec;
  std::vector<speaker::SpeakerEncoderModel> encoders;
  std::vector<attack::ToySynthModel> synths;
  std::vector<speaker::VerifierConfig> verifiers;
  std::vector<store::ProfileMap> profiles;
  ModelScales scales;

  std::size_t EncoderIndex(const std::string &id) const {
    for (std::size_t i = 0; i < encoders.size(); ++i)
      if (encoders[i].id() == id) return i;
    Fail(ErrorKind::kConfig, "no trained speaker encoder '" + id + "'");
  }
  std::vector<std::string> EncoderIds() const {
    std::vector<std::string> out;
    for (const auto &e : encoders) out.push_back(e.id());
    return out;
  }
  const speaker::SpeakerProfile &Profile(std::size_t encoder, const std::string &speaker) const {
    auto it = profiles.at(encoder).find(speaker);
    if (it == profiles.at(encoder).end())
      Fail(ErrorKind::kPrecondition, "no enrolled profile for speaker '" + speaker + "' under '" + encoders[encoder].id() + "'");
    return it->second;
  }
};

struct TrainConfig {
  codec::CodecOptions codec;
  speaker::EncoderTrainOptions encoder;
  attack::SynthTrainOptions synth;
  std::vector<speaker::FeatureRecipe> recipes{speaker::FeatureRecipe::kMelStats, speaker::FeatureRecipe::kMfccStats};
};

/// Log-mel frames for every manifest record under the codec's analysis.
inline std::map<std::string, signal::MelFrames> AnalyzeCorpus(const corpus::Manifest &m, const corpus::AudioMap &audio,
                                                              const signal::MelConfig &mel, const signal::FrameSpec &spec,
                                                              int sample_rate, std::size_t workers) {
  const signal::MelFilterbank fb(mel, spec, sample_rate);
  std::vector<signal::MelFrames> out(m.records.size());
  ParallelFor(m.records.size(), workers, [&](std::size_t i) {
    const auto it = audio.find(m.records[i].id);
    if (it == audio.end()) Fail(ErrorKind::kMissingFile, "no audio loaded for '" + m.records[i].id + "'");
    out[i] = signal::LogMel(signal::Stft(it->second, spec), fb);
  });
  std::map<std::string, signal::MelFrames> mels;
  for (std::size_t i = 0; i < out.size(); ++i) mels.emplace(m.records[i].id, std::move(out[i]));
  return mels;
}

/// Same-speaker and different-speaker trials: every test utterance against
/// every enrolled profile.
inline std::vector<speaker::ScoredTrial> CalibrationTrials(const corpus::Manifest &m,
                                                           const std::map<std::string, signal::MelFrames> &mels,
                                                           const speaker::SpeakerEncoderModel &enc,
                                                           const store::ProfileMap &profiles) {
  std::vector<speaker::ScoredTrial> trials;
  for (const auto *r : m.Select("", corpus::kSplitTest)) {
    const speaker::SpeakerEmbedding e = enc.Embed(mels.at(r->id));
    for (const auto &[spk, p] : profiles) trials.push_back({speaker::Similarity(p.embedding, e.values), spk == r->speaker});
  }
  return trials;
}

/// Enrollment profiles from the enroll split.
inline store::ProfileMap EnrollSpeakers(const corpus::Manifest &m, const std::map<std::string, signal::MelFrames> &mels,
                                        const speaker::SpeakerEncoderModel &enc) {
  store::ProfileMap out;
  for (const auto &spk : m.Speakers()) {
    std::vector<speaker::SpeakerEmbedding> embs;
    for (const auto *r : m.Select(spk, corpus::kSplitEnroll)) embs.push_back(enc.Embed(mels.at(r->id)));
    if (embs.empty()) Fail(ErrorKind::kPrecondition, "speaker '" + spk + "' has no enrollment utterances");
    out.emplace(spk, speaker::EnrollEmbeddings(spk, embs));
  }
  return out;
}

/// Fits the codec, trains one encoder and one attacker per recipe on the
/// train split, enrolls from the enroll split and calibrates verifiers on
/// the test split. Deterministic in the configured seeds.
inline ModelBundle TrainModels(const corpus::Manifest &m, const corpus::AudioMap &audio, const TrainConfig &cfg,
                               std::size_t workers = 1) {
  Require(!cfg.recipes.empty(), "train: no speaker encoder variants requested");
  const auto mels = AnalyzeCorpus(m, audio, cfg.codec.mel, cfg.codec.frame_spec, cfg.codec.sample_rate, workers);
  const auto speakers = m.Speakers();
  const auto train = m.Select("", corpus::kSplitTrain);
  Require(!train.empty(), "train: manifest has no train split");

  std::vector<signal::MelFrames> train_mels;
  std::vector<signal::Waveform> train_waves;
  for (const auto *r : train) {
    train_mels.push_back(mels.at(r->id));
    train_waves.push_back(audio.at(r->id));
  }
  codec::CodecModel cod = codec::FitCodec(train_mels, cfg.codec);

  std::vector<std::optional<speaker::SpeakerEncoderModel>> encs(cfg.recipes.size());
  ParallelFor(cfg.recipes.size(), workers, [&](std::size_t k) {
    std::vector<speaker::LabeledMel> labeled;
    for (const auto *r : train) {
      const int label = static_cast<int>(std::find(speakers.begin(), speakers.end(), r->speaker) - speakers.begin());
      labeled.push_back({&mels.at(r->id), label});
    }
    speaker::EncoderTrainOptions eo = cfg.encoder;
    eo.mel = cfg.codec.mel;
    eo.frame_spec = cfg.codec.frame_spec;
    eo.sample_rate = cfg.codec.sample_rate;
    encs[k] = speaker::TrainSpeakerEncoder(labeled, cfg.recipes[k], eo).model;
  });

  ModelBundle b{std::move(cod), {}, {}, {}, {}, {}};
  std::vector<attack::SpeakerUtterance> su;
  for (const auto *r : train) su.push_back({r->speaker, &mels.at(r->id)});
  for (auto &e : encs) {
    const speaker::SpeakerEncoderModel &enc = *e;
    store::ProfileMap profiles = EnrollSpeakers(m, mels, enc);
    b.verifiers.push_back(speaker::CalibrateThreshold(enc.id(), CalibrationTrials(m, mels, enc, profiles)));
    attack::SynthTrainOptions so = cfg.synth;
    b.synths.push_back(attack::TrainToySynth(su, enc, so));
    std::vector<speaker::SpeakerEmbedding> embs;
    std::vector<std::string> labels;
    for (const auto *r : train) {
      embs.push_back(enc.Embed(mels.at(r->id)));
      labels.push_back(r->speaker);
    }
    b.scales.impostor_l2[enc.id()] = defense::MeanImpostorDistance(embs, labels, defense::DistanceKind::kL2);
    b.scales.impostor_cosine[enc.id()] = defense::MeanImpostorDistance(embs, labels, defense::DistanceKind::kCosine);
    b.profiles.push_back(std::move(profiles));
    b.encoders.push_back(enc);
  }
  std::vector<codec::EmbeddingSeq> codes;
  for (const auto &mf : train_mels) codes.push_back(b.codec.EncodeMel(mf));
  b.scales.embedding_rms = defense::EmbeddingRms(codes);
  b.scales.magnitude_rms = defense::MagnitudeRms(train_waves, cfg.codec.frame_spec);
  return b;
}

/// Re-enrolls and re-calibrates the verifiers of an existing bundle.
inline void Recalibrate(ModelBundle &b, const corpus::Manifest &m, const corpus::AudioMap &audio, std::size_t workers = 1) {
  const auto mels = AnalyzeCorpus(m, audio, b.codec.mel_config(), b.codec.frame_spec(), b.codec.sample_rate(), workers);
  for (std::size_t k = 0; k < b.encoders.size(); ++k) {
    b.profiles[k] = EnrollSpeakers(m, mels, b.encoders[k]);
    b.verifiers[k] = speaker::CalibrateThreshold(b.encoders[k].id(), CalibrationTrials(m, mels, b.encoders[k], b.profiles[k]));
  }
}

// ---- storage

inline void SaveVerifiersAndProfiles(const std::string &dir, const ModelBundle &b) {
  for (std::size_t k = 0; k < b.encoders.size(); ++k) {
    store::SaveVerifier(dir, b.verifiers[k]);
    store::SaveProfiles(dir, b.encoders[k].id(), b.profiles[k]);
  }
}

inline void SaveModels(const std::string &dir, const ModelBundle &b) {
  std::filesystem::create_directories(dir);
  store::SaveCodec(dir, b.codec);
  KeyValueFile scales;
  std::string ids;
  for (std::size_t k = 0; k < b.encoders.size(); ++k) {
    const std::string &id = b.encoders[k].id();
    store::SaveEncoder(dir, b.encoders[k]);
    store::SaveSynth(dir, b.synths[k]);
    ids += (k ? "," : "") + id;
  }
  SaveVerifiersAndProfiles(dir, b);
  scales.Set("encoders", ids);
  scales.Set("embedding_rms", b.scales.embedding_rms);
  scales.Set("magnitude_rms", b.scales.magnitude_rms);
  for (const auto &[id, v] : b.scales.impostor_l2) scales.Set("impostor_l2." + id, v);
  for (const auto &[id, v] : b.scales.impostor_cosine) scales.Set("impostor_cosine." + id, v);
  diffnet::WriteTextFile(store::Join(dir, "scales.txt"), scales.Serialize());
}

inline ModelBundle LoadModels(const std::string &dir) {
  if (!std::filesystem::is_directory(dir)) Fail(ErrorKind::kMissingFile, dir + ": no model directory (run 'train' first)");
  const KeyValueFile scales = store::LoadKv(store::Join(dir, "scales.txt"));
  ModelBundle b{store::LoadCodec(dir), {}, {}, {}, {}, {}};
  b.scales.embedding_rms = scales.GetDouble("embedding_rms");
  b.scales.magnitude_rms = scales.GetDouble("magnitude_rms");
  std::string ids = scales.Get("encoders");
  std::size_t start = 0;
  while (start <= ids.size()) {
    const std::size_t comma = ids.find(',', start);
    const std::string id = ids.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    b.encoders.push_back(store::LoadEncoder(dir, id));
    b.synths.push_back(store::LoadSynth(dir, id));
    b.verifiers.push_back(store::LoadVerifier(dir, id));
    b.profiles.push_back(store::LoadProfiles(dir, id));
    b.scales.impostor_l2[id] = scales.GetDouble("impostor_l2." + id);
    b.scales.impostor_cosine[id] = scales.GetDouble("impostor_cosine." + id);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return b;
}

// ---- protection

enum class DefenseKind { kRaw, kEmbedding, kSignal };

inline std::string DefenseName(DefenseKind k) {
  switch (k) {
    case DefenseKind::kRaw: return "raw";
    case DefenseKind::kEmbedding: return "embedding-level";
    case DefenseKind::kSignal: return "signal-level";
  }
  return "unknown";
}

inline DefenseKind ParseDefense(const std::string &s) {
  if (s == "raw") return DefenseKind::kRaw;
  if (s == "embedding-level" || s == "embedding") return DefenseKind::kEmbedding;
  if (s == "signal-level" || s == "signal") return DefenseKind::kSignal;
  Fail(ErrorKind::kConfig, "unknown defense '" + s + "' (expected raw, embedding-level or signal-level)");
}

/// Defense knobs relative to the corpus scales.
struct DefenseSettings {
  double tau_scale = 0.6;  // tau_identity = tau_scale * mean impostor distance
  double tau_snr_db = 15.0;
  int max_iters = 500;
  double alpha_rel = 2e-3;    // of the embedding RMS
  double epsilon_rel = 0.01;  // of the embedding RMS
  double signal_alpha_rel = 2e-3;    // of the magnitude RMS
  double signal_epsilon_rel = 0.01;  // of the magnitude RMS
  std::optional<double> budget_rho;
  defense::DistanceKind distance = defense::DistanceKind::kL2;
};

inline void ValidateDefenseSettings(const DefenseSettings &s) {
  if (!(s.tau_scale > 0.0)) Fail(ErrorKind::kConfig, "defense.tau_scale must be > 0");
  if (!(s.alpha_rel > 0.0) || !(s.signal_alpha_rel > 0.0)) Fail(ErrorKind::kConfig, "defense step sizes must be > 0");
  if (!(s.epsilon_rel >= 0.0) || !(s.signal_epsilon_rel >= 0.0)) Fail(ErrorKind::kConfig, "defense noise scales must be >= 0");
}

/// PerC-AL settings for one defense over the given encoders. The identity
/// threshold uses the mean impostor distance averaged over those encoders.
inline defense::PercAlConfig DefenseConfigFor(const ModelBundle &b, const std::vector<std::size_t> &encoders,
                                              const DefenseSettings &s, DefenseKind kind) {
  ValidateDefenseSettings(s);
  Require(!encoders.empty(), "defense: no protect encoders");
  const auto &table = s.distance == defense::DistanceKind::kL2 ? b.scales.impostor_l2 : b.scales.impostor_cosine;
  double impostor = 0.0;
  for (std::size_t k : encoders) impostor += table.at(b.encoders[k].id());
  impostor /= static_cast<double>(encoders.size());
  defense::PercAlConfig c = defense::DefaultPercAlConfig({b.scales.embedding_rms, impostor});
  c.tau_identity = s.tau_scale * impostor;
  c.tau_snr_db = s.tau_snr_db;
  c.max_iters = s.max_iters;
  c.alpha = s.alpha_rel * b.scales.embedding_rms;
  c.epsilon_init = s.epsilon_rel * b.scales.embedding_rms;
  c.budget_rho = s.budget_rho;
  c.distance = s.distance;
  if (kind == DefenseKind::kSignal)
    c = defense::SignalLevelConfig(c, b.scales.magnitude_rms, s.signal_alpha_rel, s.signal_epsilon_rel);
  defense::ValidatePercAlConfig(c);
  return c;
}

/// Enrolled speaker farthest from the victim: lowest profile cosine,
/// averaged over the given encoders. Ties keep the first speaker in id order.
inline std::string SelectTargetSpeaker(const ModelBundle &b, const std::vector<std::size_t> &encoders,
                                       const std::string &victim) {
  Require(!encoders.empty(), "target selection: no encoders");
  std::string best;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto &[spk, p] : b.profiles.at(encoders.front())) {
    if (spk == victim) continue;
    double score = 0.0;
    for (std::size_t k : encoders) score += speaker::Similarity(b.Profile(k, spk).embedding, b.Profile(k, victim).embedding);
    if (score < best_score) {
      best_score = score;
      best = spk;
    }
  }
  if (best.empty()) Fail(ErrorKind::kPrecondition, "target selection: no enrolled speaker other than '" + victim + "'");
  return best;
}

/// Speaker whose profile is most similar to `x` under encoder `k`.
inline std::string IdentifySpeaker(const ModelBundle &b, std::size_t k, const signal::Waveform &x) {
  const speaker::SpeakerEmbedding e = b.encoders.at(k).Embed(x);
  std::string best;
  double best_score = -2.0;
  for (const auto &[spk, p] : b.profiles.at(k)) {
    const double s = speaker::Similarity(p.embedding, e.values);
    if (s > best_score) {
      best_score = s;
      best = spk;
    }
  }
  return best;
}

struct ProtectRequest {
  DefenseKind kind = DefenseKind::kEmbedding;
  std::vector<std::size_t> encoders;
  std::string victim_speaker;
  std::string target_speaker;  // empty = farthest enrolled speaker
  DefenseSettings settings;
  std::uint64_t seed = 0;
};

struct ProtectOutcome {
  defense::DefenseResult result;
  defense::PercAlConfig config;
  std::string target_speaker;
};

inline ProtectOutcome Protect(const ModelBundle &b, const signal::Waveform &x, const ProtectRequest &req) {
  if (req.kind == DefenseKind::kRaw) Fail(ErrorKind::kConfig, "protect: 'raw' is not a protection mode");
  ProtectOutcome out;
  out.config = DefenseConfigFor(b, req.encoders, req.settings, req.kind);
  out.target_speaker = req.target_speaker.empty() ? SelectTargetSpeaker(b, req.encoders, req.victim_speaker) : req.target_speaker;
  defense::EncoderList list;
  std::vector<speaker::SpeakerEmbedding> targets;
  for (std::size_t k : req.encoders) {
    list.push_back(&b.encoders.at(k));
    const auto &p = b.Profile(k, out.target_speaker);
    targets.push_back({p.embedding, p.encoder_id});
  }
  out.result = req.kind == DefenseKind::kEmbedding ? defense::PgdProtect(b.codec, list, x, targets, out.config, req.seed)
                                                   : defense::SignalLevelProtect(list, x, targets, out.config, req.seed);
  return out;
}

// ---- attacker

/// Candidate content utterances for the voice-conversion attacker.
struct ContentPool {
  struct Item {
    std::string id;
    std::string speaker;
    const signal::MelFrames *mel;
    const signal::Waveform *audio;
  };
  std::vector<Item> items;
};

/// Attacker-content pool: the train split, in manifest order.
inline ContentPool AttackerPool(const corpus::Manifest &m, const std::map<std::string, signal::MelFrames> &mels,
                                const corpus::AudioMap &audio) {
  ContentPool pool;
  for (const auto *r : m.Select("", corpus::kSplitTrain)) pool.items.push_back({r->id, r->speaker, &mels.at(r->id), &audio.at(r->id)});
  Require(!pool.items.empty(), "attacker pool is empty");
  return pool;
}

struct CloneResult {
  std::string content_id;
  speaker::SpeakerEmbedding stolen;
  signal::Waveform audio;
};

/// Steals the speaker embedding of `sample` with encoder `k`, picks the
/// non-victim content utterance whose converted mel frames embed closest to
/// the stolen embedding (first wins on ties), and synthesizes it.
inline CloneResult CloneVoice(const ModelBundle &b, std::size_t k, const ContentPool &pool, const signal::Waveform &sample,
                              const std::string &victim) {
  CloneResult out;
  out.stolen = b.encoders.at(k).Embed(sample);
  const attack::ToySynthModel &synth = b.synths.at(k);
  double best = -2.0;
  const ContentPool::Item *pick = nullptr;
  for (const auto &it : pool.items) {
    if (it.speaker == victim) continue;
    const double s = speaker::Similarity(b.encoders[k].EmbedMel(synth.ConvertMel(it.mel->values, out.stolen)).values,
                                         out.stolen.values);
    if (s > best) {
      best = s;
      pick = &it;
    }
  }
  if (!pick) Fail(ErrorKind::kPrecondition, "attacker pool has no content from speakers other than '" + victim + "'");
  out.content_id = pick->id;
  out.audio = synth.Synthesize(*pick->audio, out.stolen);
  return out;
}

}  // namespace rovo::eval
