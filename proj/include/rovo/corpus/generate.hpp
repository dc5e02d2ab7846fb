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

#include "rovo/corpus/manifest.hpp"
#include "rovo/corpus/speaker_synth.hpp"

#include <cstdio>
#include <filesystem>
#include <map>

namespace rovo::corpus {

struct CorpusOptions {
  std::uint64_t seed = 20240917;
  int n_speakers = 16;
  int utts_per_speaker = 10;
  double duration_s = 3.0;
  int sample_rate = signal::kDefaultSampleRate;
};

inline std::string SpeakerId(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "spk%02d", i);
  return buf;
}

inline std::string UtteranceId(int spk, int utt) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "spk%02d_u%02d", spk, utt);
  return buf;
}

inline std::vector<SpeakerSpec> MakeSpeakers(const CorpusOptions &opt) {
  std::vector<SpeakerSpec> out;
  for (int s = 0; s < opt.n_speakers; ++s) {
    Rng rng(DeriveSeed(opt.seed, "speaker/" + SpeakerId(s)));
    out.push_back(RandomSpeaker(SpeakerId(s), rng));
  }
  return out;
}

inline signal::Waveform GenerateUtterance(const CorpusOptions &opt, const SpeakerSpec &spk, int utt) {
  UtteranceOptions uo;
  uo.duration_s = opt.duration_s;
  uo.sample_rate = opt.sample_rate;
  Rng rng(DeriveSeed(opt.seed, "utt/" + spk.id + "/" + std::to_string(utt)));
  return SynthesizeUtterance(spk, uo, rng);
}

/// Audio held in memory, keyed by utterance id.
using AudioMap = std::map<std::string, signal::Waveform>;

struct GeneratedCorpus {
  Manifest manifest;
  std::vector<SpeakerSpec> speakers;
  AudioMap audio;
};

inline void ValidateCorpusOptions(const CorpusOptions &opt) {
  Require(opt.n_speakers >= 2, "generate_corpus: need at least 2 speakers");
  Require(opt.utts_per_speaker >= 1, "generate_corpus: need at least 1 utterance per speaker");
  Require(opt.duration_s > 0.5, "generate_corpus: duration must exceed 0.5 s");
}

/// Generates the corpus in memory. Nothing touches the filesystem.
inline GeneratedCorpus GenerateCorpusInMemory(const CorpusOptions &opt, std::size_t workers = 1) {
  ValidateCorpusOptions(opt);
  GeneratedCorpus out;
  out.speakers = MakeSpeakers(opt);
  const std::size_t n = static_cast<std::size_t>(opt.n_speakers) * opt.utts_per_speaker;
  std::vector<signal::Waveform> waves(n);
  ParallelFor(n, workers, [&](std::size_t i) {
    const int s = static_cast<int>(i) / opt.utts_per_speaker, u = static_cast<int>(i) % opt.utts_per_speaker;
    waves[i] = GenerateUtterance(opt, out.speakers[s], u);
  });
  for (std::size_t i = 0; i < n; ++i) {
    const int s = static_cast<int>(i) / opt.utts_per_speaker, u = static_cast<int>(i) % opt.utts_per_speaker;
    ManifestRecord r;
    r.id = UtteranceId(s, u);
    r.speaker = SpeakerId(s);
    r.path = "wav/" + r.speaker + "/" + r.id + ".wav";
    r.duration_s = waves[i].duration_seconds();
    out.manifest.records.push_back(r);
    out.audio.emplace(r.id, std::move(waves[i]));
  }
  return out;
}

inline std::string SerializeSpeakers(const std::vector<SpeakerSpec> &speakers) {
  std::string out;
  for (const auto &s : speakers) {
    Record r;
    r.Set("speaker", s.id);
    r.Set("f0", FormatDouble(s.f0_hz));
    for (int k = 0; k < 3; ++k) {
      r.Set("F" + std::to_string(k + 1), FormatDouble(s.formants_hz[k]));
      r.Set("B" + std::to_string(k + 1), FormatDouble(s.bandwidths_hz[k]));
    }
    r.Set("tilt_db_per_octave", FormatDouble(s.tilt_db_per_octave));
    r.Set("jitter", FormatDouble(s.jitter));
    out += r.Serialize() + "\n";
  }
  return out;
}

/// Writes wav/<speaker>/<id>.wav, manifest.txt and speakers.txt under `dir`.
/// Audio in the returned corpus is re-read from disk, so it carries exactly
/// the 16-bit quantization every later stage sees.
inline GeneratedCorpus GenerateCorpus(const CorpusOptions &opt, const std::string &dir, std::size_t workers = 1) {
  GeneratedCorpus c = GenerateCorpusInMemory(opt, workers);
  c.manifest.base_dir = dir;
  for (const auto &spk : c.speakers) fs::create_directories(fs::path(dir) / "wav" / spk.id);
  for (const auto &r : c.manifest.records) {
    const std::string path = c.manifest.Resolve(r);
    signal::WriteWav(path, c.audio.at(r.id));
    c.audio[r.id] = signal::ReadWav(path);
  }
  SaveManifest((fs::path(dir) / "manifest.txt").string(), c.manifest);
  std::ofstream spk((fs::path(dir) / "speakers.txt").string(), std::ios::binary | std::ios::trunc);
  spk << SerializeSpeakers(c.speakers);
  return c;
}

inline AudioMap LoadAudio(const Manifest &m, std::size_t workers = 1) {
  std::vector<signal::Waveform> waves(m.records.size());
  ParallelFor(m.records.size(), workers, [&](std::size_t i) { waves[i] = signal::ReadWav(m.Resolve(m.records[i])); });
  AudioMap out;
  for (std::size_t i = 0; i < m.records.size(); ++i) out.emplace(m.records[i].id, std::move(waves[i]));
  return out;
}

}  // namespace rovo::corpus
