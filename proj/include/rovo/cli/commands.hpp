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

// Subcommand bodies. Each takes the effective configuration and reports to
// `out`; failures are thrown as rovo::Error.

#pragma once

#include "rovo/cli/config.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace rovo::cli {

inline std::string ManifestPath(const RunConfig &c) { return store::Join(c.corpus_dir, "manifest.txt"); }

struct LoadedCorpus {
  corpus::Manifest manifest;
  corpus::AudioMap audio;
};

inline LoadedCorpus LoadCorpus(const RunConfig &c) {
  LoadedCorpus lc;
  lc.manifest = corpus::LoadManifest(ManifestPath(c));
  lc.audio = corpus::LoadAudio(lc.manifest, c.EffectiveWorkers());
  return lc;
}

inline void WriteOutputWav(const std::string &path, const signal::Waveform &w, std::ostream &out) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const signal::WavWriteReport rep = signal::WriteWav(path, w);
  if (rep.clipped_samples > 0) out << "warning: clipped " << rep.clipped_samples << " samples in " << path << "\n";
}

inline void CmdGenCorpus(const RunConfig &c, std::ostream &out) {
  corpus::GeneratedCorpus g = corpus::GenerateCorpus(CorpusOptionsFor(c), c.corpus_dir, c.EffectiveWorkers());
  corpus::Manifest split = corpus::SplitManifest(g.manifest, c.split, SplitSeed(c));
  corpus::SaveManifest(ManifestPath(c), split);
  out << "corpus: " << split.records.size() << " utterances, " << g.speakers.size() << " speakers -> " << c.corpus_dir
      << "\n";
}

inline void ReportVerifiers(const eval::ModelBundle &b, std::ostream &out) {
  for (const auto &v : b.verifiers)
    out << "verifier " << v.encoder_id << ": eer " << FormatFixed(v.eer, 4) << " threshold " << FormatFixed(v.threshold, 6)
        << "\n";
}

inline void CmdTrain(const RunConfig &c, std::ostream &out) {
  const LoadedCorpus lc = LoadCorpus(c);
  const eval::ModelBundle b = eval::TrainModels(lc.manifest, lc.audio, TrainConfigFor(c), c.EffectiveWorkers());
  eval::SaveModels(c.model_dir, b);
  ReportVerifiers(b, out);
  out << "models -> " << c.model_dir << "\n";
}

inline void CmdCalibrate(const RunConfig &c, std::ostream &out) {
  const LoadedCorpus lc = LoadCorpus(c);
  eval::ModelBundle b = eval::LoadModels(c.model_dir);
  eval::Recalibrate(b, lc.manifest, lc.audio, c.EffectiveWorkers());
  eval::SaveVerifiersAndProfiles(c.model_dir, b);
  ReportVerifiers(b, out);
}

struct ProtectArgs {
  std::string input;
  std::string output;
  std::string mode = "embedding";   // embedding | signal
  std::vector<std::string> encoders;  // empty = every trained encoder
  std::string speaker;                // empty = identify from the input
  std::string target;                 // empty = farthest enrolled speaker
};

inline void CmdProtect(const RunConfig &c, const ProtectArgs &a, std::ostream &out) {
  const eval::ModelBundle b = eval::LoadModels(c.model_dir);
  const signal::Waveform x = signal::ReadWav(a.input);
  eval::ProtectRequest req;
  if (a.mode == "embedding")
    req.kind = eval::DefenseKind::kEmbedding;
  else if (a.mode == "signal")
    req.kind = eval::DefenseKind::kSignal;
  else
    Fail(ErrorKind::kConfig, "protect: --mode must be 'embedding' or 'signal'");
  for (const auto &id : a.encoders.empty() ? b.EncoderIds() : a.encoders) req.encoders.push_back(b.EncoderIndex(id));
  req.victim_speaker = a.speaker.empty() ? eval::IdentifySpeaker(b, req.encoders.front(), x) : a.speaker;
  req.target_speaker = a.target;
  req.settings = c.defense;
  req.seed = DeriveSeed(c.seed, "protect/" + std::filesystem::path(a.input).filename().string());
  const eval::ProtectOutcome po = eval::Protect(b, x, req);
  WriteOutputWav(a.output, po.result.protected_audio, out);
  if (!c.trace_dir.empty()) {
    std::filesystem::create_directories(c.trace_dir);
    const std::string trace = store::Join(c.trace_dir, std::filesystem::path(a.output).stem().string() + "-trace.csv");
    defense::WriteTrace(trace, po.result.trace);
    out << "trace -> " << trace << "\n";
  }
  const auto &last = po.result.final_row();
  out << "speaker " << req.victim_speaker << " target " << po.target_speaker << "\n"
      << "termination " << defense::TerminationName(po.result.termination) << " steps " << po.result.steps()
      << " l_identity " << FormatFixed(last.l_identity, 6) << " tau_identity " << FormatFixed(po.config.tau_identity, 6)
      << " snr_db " << FormatFixed(last.snr_db, 3) << "\n";
}

inline void CmdEnhance(const RunConfig &c, const std::string &input, const std::string &output, const std::string &method,
                       std::ostream &out) {
  attack::EnhanceConfig ec = c.enhance;
  ec.frame_spec = c.frame;
  try {
    ec.method = attack::ParseMethod(method);
  } catch (const Error &e) {
    Fail(ErrorKind::kConfig, e.what());
  }
  const signal::Waveform x = signal::ReadWav(input);
  WriteOutputWav(output, attack::Enhance(x, ec), out);
  out << "enhanced (" << attack::MethodName(ec.method) << ") -> " << output << "\n";
}

inline void CmdSynthesize(const RunConfig &c, const std::string &content, const std::string &stolen_from,
                          const std::string &output, const std::string &encoder, std::ostream &out) {
  const eval::ModelBundle b = eval::LoadModels(c.model_dir);
  const std::size_t k = b.EncoderIndex(encoder.empty() ? b.encoders.front().id() : encoder);
  const speaker::SpeakerEmbedding stolen = b.encoders[k].Embed(signal::ReadWav(stolen_from));
  WriteOutputWav(output, b.synths[k].Synthesize(signal::ReadWav(content), stolen), out);
  out << "synthesized with " << b.encoders[k].id() << " -> " << output << "\n";
}

/// Prints "<verdict> score <cosine>" and returns the verdict.
inline speaker::Verdict CmdVerify(const RunConfig &c, const std::string &profile, const std::string &input,
                                  const std::string &encoder, std::ostream &out) {
  const eval::ModelBundle b = eval::LoadModels(c.model_dir);
  const std::size_t k = b.EncoderIndex(encoder.empty() ? b.encoders.front().id() : encoder);
  double score = 0.0;
  const speaker::Verdict v =
      speaker::Verify(b.Profile(k, profile), b.encoders[k].Embed(signal::ReadWav(input)), b.verifiers[k], &score);
  out << speaker::VerdictName(v) << " score " << FormatFixed(score, 6) << " threshold "
      << FormatFixed(b.verifiers[k].threshold, 6) << " verifier " << b.encoders[k].id() << "\n";
  return v;
}

inline eval::EvalReport CmdEvaluate(const RunConfig &c, std::ostream &out) {
  const LoadedCorpus lc = LoadCorpus(c);
  const eval::ModelBundle b = eval::LoadModels(c.model_dir);
  const eval::EvalReport r = eval::RunCampaign(b, lc.manifest, lc.audio, CampaignConfigFor(c), SerializeConfig(c));
  eval::EmitReport(r, c.report_dir);
  for (const auto &cell : r.cells)
    out << cell.defense << " " << cell.protect_encoders << " " << cell.enhancement << " " << cell.verifier << ": dsr "
        << FormatFixed(cell.dsr, 2) << " (" << cell.rejects << "/" << cell.n << ")\n";
  out << "report -> " << c.report_dir << "\n";
  return r;
}

}  // namespace rovo::cli
