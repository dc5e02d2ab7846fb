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

// On-disk model directory. Parameters go to binary bundles, settings to
// "key = value" sidecars, profiles and verifiers to text records.
//
//   codec.rvdn / codec.meta
//   encoder-<id>.rvdn / encoder-<id>.meta
//   synth-<id>.rvdn / synth-<id>.meta
//   verifier-<id>.txt
//   profiles-<id>.txt
//   scales.txt

#pragma once

#include "rovo/attack/synth.hpp"
#include "rovo/codec/codec.hpp"
#include "rovo/diffnet/serialize.hpp"
#include "rovo/kv.hpp"
#include "rovo/speaker/verify.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rovo::store {

namespace fs = std::filesystem;

inline std::string Join(const std::string &dir, const std::string &name) { return (fs::path(dir) / name).string(); }

inline void PutAnalysisSettings(KeyValueFile &kv, const signal::MelConfig &mel, const signal::FrameSpec &spec,
                                int sample_rate) {
  kv.Set("n_mels", mel.n_mels);
  kv.Set("fmin", mel.fmin);
  kv.Set("fmax", mel.fmax);
  kv.Set("log_floor", mel.log_floor);
  kv.Set("n_fft", spec.n_fft);
  kv.Set("hop", spec.hop);
  kv.Set("window", std::string(spec.window == signal::WindowKind::kHann ? "hann" : "rectangular"));
  kv.Set("sample_rate", sample_rate);
}

struct AnalysisSettings {
  signal::MelConfig mel;
  signal::FrameSpec spec;
  int sample_rate = signal::kDefaultSampleRate;
};

inline AnalysisSettings GetAnalysisSettings(const KeyValueFile &kv) {
  AnalysisSettings a;
  a.mel.n_mels = static_cast<int>(kv.GetInt("n_mels"));
  a.mel.fmin = kv.GetDouble("fmin");
  a.mel.fmax = kv.GetDouble("fmax");
  a.mel.log_floor = kv.GetDouble("log_floor");
  a.spec.n_fft = static_cast<int>(kv.GetInt("n_fft"));
  a.spec.hop = static_cast<int>(kv.GetInt("hop"));
  const std::string w = kv.Get("window");
  if (w != "hann" && w != "rectangular") Fail(ErrorKind::kMalformed, "unknown window '" + w + "'");
  a.spec.window = w == "hann" ? signal::WindowKind::kHann : signal::WindowKind::kRectangular;
  a.sample_rate = static_cast<int>(kv.GetInt("sample_rate"));
  return a;
}

inline KeyValueFile LoadKv(const std::string &path) { return KeyValueFile::Parse(diffnet::ReadTextFile(path), path); }

// ---- codec

inline void SaveCodec(const std::string &dir, const codec::CodecModel &m) {
  diffnet::ParamBundle b;
  b.networks["analysis"] = diffnet::Network({m.analysis()});
  b.networks["synthesis"] = m.synthesis();
  for (std::size_t i = 0; i < m.refinement().size(); ++i) b.networks["refine" + std::to_string(i)] = m.refinement()[i];
  diffnet::SaveBundle(Join(dir, "codec.rvdn"), b);
  KeyValueFile kv;
  kv.Set("kind", std::string("codec"));
  kv.Set("dim", m.dim());
  kv.Set("refinement_stages", static_cast<int>(m.refinement().size()));
  kv.Set("griffin_lim_iters", m.griffin_lim_iters());
  PutAnalysisSettings(kv, m.mel_config(), m.frame_spec(), m.sample_rate());
  diffnet::WriteTextFile(Join(dir, "codec.meta"), kv.Serialize());
}

inline codec::CodecModel LoadCodec(const std::string &dir) {
  const KeyValueFile kv = LoadKv(Join(dir, "codec.meta"));
  const diffnet::ParamBundle b = diffnet::LoadBundle(Join(dir, "codec.rvdn"));
  const AnalysisSettings a = GetAnalysisSettings(kv);
  const auto &analysis = b.network("analysis");
  if (analysis.layers().size() != 1 || !std::holds_alternative<diffnet::Affine>(analysis.layers()[0]))
    Fail(ErrorKind::kMalformed, "codec.rvdn: analysis must be a single affine layer");
  std::vector<diffnet::Network> refinement;
  for (long long i = 0; i < kv.GetInt("refinement_stages"); ++i) refinement.push_back(b.network("refine" + std::to_string(i)));
  return codec::CodecModel(a.mel, a.spec, a.sample_rate, std::get<diffnet::Affine>(analysis.layers()[0]),
                           b.network("synthesis"), std::move(refinement), static_cast<int>(kv.GetInt("griffin_lim_iters")));
}

// ---- speaker encoders

inline void SaveEncoder(const std::string &dir, const speaker::SpeakerEncoderModel &m) {
  diffnet::ParamBundle b;
  b.networks["encoder"] = m.network();
  diffnet::SaveBundle(Join(dir, "encoder-" + m.id() + ".rvdn"), b);
  KeyValueFile kv;
  kv.Set("kind", std::string("speaker-encoder"));
  kv.Set("id", m.id());
  kv.Set("recipe", speaker::RecipeName(m.recipe()));
  kv.Set("n_ceps", m.n_ceps());
  kv.Set("embedding_dim", m.embedding_dim());
  PutAnalysisSettings(kv, m.mel_config(), m.frame_spec(), m.sample_rate());
  diffnet::WriteTextFile(Join(dir, "encoder-" + m.id() + ".meta"), kv.Serialize());
}

inline speaker::SpeakerEncoderModel LoadEncoder(const std::string &dir, const std::string &id) {
  const KeyValueFile kv = LoadKv(Join(dir, "encoder-" + id + ".meta"));
  const diffnet::ParamBundle b = diffnet::LoadBundle(Join(dir, "encoder-" + id + ".rvdn"));
  const AnalysisSettings a = GetAnalysisSettings(kv);
  if (kv.Get("id") != id) Fail(ErrorKind::kIntegrity, "encoder-" + id + ".meta: id field says '" + kv.Get("id") + "'");
  return speaker::SpeakerEncoderModel(id, speaker::ParseRecipe(kv.Get("recipe")), static_cast<int>(kv.GetInt("n_ceps")),
                                      a.mel, a.spec, a.sample_rate, b.network("encoder"));
}

// ---- toy synthesizers

inline void SaveSynth(const std::string &dir, const attack::ToySynthModel &m) {
  diffnet::ParamBundle b;
  b.networks["map"] = diffnet::Network({m.map()});
  b.tensors["neutral_mean"] = m.neutral_mean();
  b.tensors["neutral_std"] = m.neutral_std();
  diffnet::SaveBundle(Join(dir, "synth-" + m.encoder_id() + ".rvdn"), b);
  KeyValueFile kv;
  kv.Set("kind", std::string("toy-synth"));
  kv.Set("encoder_id", m.encoder_id());
  kv.Set("griffin_lim_iters", m.griffin_lim_iters());
  PutAnalysisSettings(kv, m.mel_config(), m.frame_spec(), m.sample_rate());
  diffnet::WriteTextFile(Join(dir, "synth-" + m.encoder_id() + ".meta"), kv.Serialize());
}

inline attack::ToySynthModel LoadSynth(const std::string &dir, const std::string &encoder_id) {
  const KeyValueFile kv = LoadKv(Join(dir, "synth-" + encoder_id + ".meta"));
  const diffnet::ParamBundle b = diffnet::LoadBundle(Join(dir, "synth-" + encoder_id + ".rvdn"));
  const AnalysisSettings a = GetAnalysisSettings(kv);
  const auto &map = b.network("map");
  if (map.layers().size() != 1 || !std::holds_alternative<diffnet::Affine>(map.layers()[0]))
    Fail(ErrorKind::kMalformed, "synth bundle: map must be a single affine layer");
  auto column = [&](const std::string &name) {
    const Matrix &t = b.tensor(name);
    if (t.cols() != 1) Fail(ErrorKind::kMalformed, "synth bundle: tensor '" + name + "' must be a column");
    return Vector(t.col(0));
  };
  return attack::ToySynthModel(kv.Get("encoder_id"), std::get<diffnet::Affine>(map.layers()[0]), column("neutral_mean"),
                               column("neutral_std"), a.mel, a.spec, a.sample_rate,
                               static_cast<int>(kv.GetInt("griffin_lim_iters")));
}

// ---- verifiers and profiles

inline void SaveVerifier(const std::string &dir, const speaker::VerifierConfig &v) {
  KeyValueFile kv;
  kv.Set("encoder_id", v.encoder_id);
  kv.Set("threshold", v.threshold);
  kv.Set("eer", v.eer);
  diffnet::WriteTextFile(Join(dir, "verifier-" + v.encoder_id + ".txt"), kv.Serialize());
}

inline speaker::VerifierConfig LoadVerifier(const std::string &dir, const std::string &encoder_id) {
  const KeyValueFile kv = LoadKv(Join(dir, "verifier-" + encoder_id + ".txt"));
  speaker::VerifierConfig v{kv.Get("encoder_id"), kv.GetDouble("threshold"), kv.GetDouble("eer")};
  if (v.encoder_id != encoder_id) Fail(ErrorKind::kIntegrity, "verifier file for '" + encoder_id + "' names '" + v.encoder_id + "'");
  if (!(v.threshold >= -1.0 && v.threshold <= 1.0)) Fail(ErrorKind::kMalformed, "verifier threshold outside [-1, 1]");
  if (!(v.eer >= 0.0 && v.eer <= 0.5)) Fail(ErrorKind::kMalformed, "verifier eer outside [0, 0.5]");
  return v;
}

inline std::string JoinNumbers(const Vector &v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + FormatDouble(v[i]);
  return s;
}

inline Vector SplitNumbers(const std::string &s, const std::string &what) {
  std::vector<double> vals;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    vals.push_back(ParseDouble(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start), what));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

using ProfileMap = std::map<std::string, speaker::SpeakerProfile>;

inline void SaveProfiles(const std::string &dir, const std::string &encoder_id, const ProfileMap &profiles) {
  std::string out;
  for (const auto &[spk, p] : profiles) {
    Record r;
    r.Set("speaker", p.speaker_id);
    r.Set("encoder", p.encoder_id);
    r.Set("count", std::to_string(p.count));
    r.Set("embedding", JoinNumbers(p.embedding));
    out += r.Serialize() + "\n";
  }
  diffnet::WriteTextFile(Join(dir, "profiles-" + encoder_id + ".txt"), out);
}

inline ProfileMap LoadProfiles(const std::string &dir, const std::string &encoder_id) {
  const std::string path = Join(dir, "profiles-" + encoder_id + ".txt");
  ProfileMap out;
  for (const Record &r : ParseRecords(diffnet::ReadTextFile(path), path)) {
    speaker::SpeakerProfile p;
    p.speaker_id = r.Get("speaker");
    p.encoder_id = r.Get("encoder");
    p.count = static_cast<int>(ParseInt(r.Get("count"), "count"));
    p.embedding = SplitNumbers(r.Get("embedding"), path + ": embedding");
    if (p.encoder_id != encoder_id) Fail(ErrorKind::kIntegrity, path + ": profile for encoder '" + p.encoder_id + "'");
    if (p.count < 1) Fail(ErrorKind::kMalformed, path + ": profile count must be >= 1");
    if (std::abs(p.embedding.norm() - 1.0) > 1e-6) Fail(ErrorKind::kMalformed, path + ": profile is not unit norm");
    if (!out.emplace(p.speaker_id, p).second) Fail(ErrorKind::kMalformed, path + ": duplicate speaker '" + p.speaker_id + "'");
  }
  if (out.empty()) Fail(ErrorKind::kMalformed, path + ": no profiles");
  return out;
}

}  // namespace rovo::store
