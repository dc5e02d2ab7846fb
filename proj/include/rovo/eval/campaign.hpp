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

// protect -> enhance -> clone -> verify campaigns over a grid of defenses,
// protect-encoder sets, enhancement attacks and verifiers, plus the report
// files they produce.
//
// Report directory:
//   trials.csv      one row per trial
//   summary.csv     one row per grid cell, recomputed and checked on load
//   protection.csv  one row per protected utterance
//   config.txt      configuration snapshot

#pragma once

#include "rovo/eval/metrics.hpp"
#include "rovo/eval/pipeline.hpp"

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rovo::eval {

inline constexpr const char *kNoEnhancement = "none";
inline constexpr const char *kNoEncoders = "none";
inline constexpr const char *kNotApplicable = "na";

struct CampaignConfig {
  int victims_per_speaker = 1;  // 0 = every test utterance
  std::vector<DefenseKind> defenses{DefenseKind::kRaw, DefenseKind::kEmbedding, DefenseKind::kSignal};
  std::vector<std::vector<std::string>> protect_sets{{"mel-stats"}, {"mfcc-stats"}, {"mel-stats", "mfcc-stats"}};
  std::vector<std::string> enhancements{kNoEnhancement, "spectral-masking", "wiener", "smoothing"};
  std::vector<std::string> verifiers{"mel-stats", "mfcc-stats"};
  DefenseSettings defense;
  attack::EnhanceConfig enhance;  // method is set per cell
  std::uint64_t seed = 20240917;
  std::size_t workers = 1;
  std::string trace_dir;  // empty = no traces
};

inline std::string JoinEncoderSet(const std::vector<std::string> &ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "+" : "") + ids[i];
  return s;
}

struct TrialOutcome {
  std::string victim;
  std::string speaker;
  std::string defense;
  std::string protect_encoders;
  std::string enhancement;
  std::string verifier;
  std::string content_id;
  double score = 0.0;
  speaker::Verdict verdict = speaker::Verdict::kAccept;
  double snr_db = 0.0;
  double lsd_db = 0.0;
  std::optional<double> removal_efficacy;

  friend bool operator==(const TrialOutcome &, const TrialOutcome &) = default;
};

struct ProtectionRecord {
  std::string victim;
  std::string speaker;
  std::string defense;
  std::string protect_encoders;
  std::string target;
  int steps = 0;
  std::string termination;
  double l_identity = 0.0;
  double snr_db = 0.0;
  double tau_identity = 0.0;
  int identity_reentries = 0;

  bool reached() const { return l_identity < tau_identity; }
  friend bool operator==(const ProtectionRecord &, const ProtectionRecord &) = default;
};

struct CellSummary {
  std::string defense;
  std::string protect_encoders;
  std::string enhancement;
  std::string verifier;
  std::size_t n = 0;
  std::size_t rejects = 0;
  double dsr = 0.0;
  double mean_snr_db = 0.0;
  double mean_lsd_db = 0.0;
  std::optional<double> mean_removal_efficacy;

  friend bool operator==(const CellSummary &, const CellSummary &) = default;
};

struct EvalReport {
  std::string config_text;
  std::vector<TrialOutcome> trials;
  std::vector<ProtectionRecord> protection;
  std::vector<CellSummary> cells;

  const CellSummary *Find(const std::string &defense, const std::string &encoders, const std::string &enhancement,
                          const std::string &verifier) const {
    for (const auto &c : cells)
      if (c.defense == defense && c.protect_encoders == encoders && c.enhancement == enhancement && c.verifier == verifier)
        return &c;
    return nullptr;
  }
  const CellSummary &Cell(const std::string &defense, const std::string &encoders, const std::string &enhancement,
                          const std::string &verifier) const {
    const CellSummary *c = Find(defense, encoders, enhancement, verifier);
    if (!c)
      Fail(ErrorKind::kPrecondition, "report has no cell " + defense + "/" + encoders + "/" + enhancement + "/" + verifier);
    return *c;
  }
};

/// Per-cell aggregates, cells in first-appearance order, sums in row order.
inline std::vector<CellSummary> Summarize(const std::vector<TrialOutcome> &trials) {
  std::vector<CellSummary> cells;
  std::vector<double> snr, lsd, eff;
  std::vector<std::size_t> n_eff;
  for (const auto &t : trials) {
    std::size_t i = 0;
    for (; i < cells.size(); ++i)
      if (cells[i].defense == t.defense && cells[i].protect_encoders == t.protect_encoders &&
          cells[i].enhancement == t.enhancement && cells[i].verifier == t.verifier)
        break;
    if (i == cells.size()) {
      CellSummary c;
      c.defense = t.defense;
      c.protect_encoders = t.protect_encoders;
      c.enhancement = t.enhancement;
      c.verifier = t.verifier;
      cells.push_back(std::move(c));
      snr.push_back(0.0);
      lsd.push_back(0.0);
      eff.push_back(0.0);
      n_eff.push_back(0);
    }
    ++cells[i].n;
    cells[i].rejects += t.verdict == speaker::Verdict::kReject;
    snr[i] += t.snr_db;
    lsd[i] += t.lsd_db;
    if (t.removal_efficacy) {
      eff[i] += *t.removal_efficacy;
      ++n_eff[i];
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double n = static_cast<double>(cells[i].n);
    cells[i].dsr = 100.0 * static_cast<double>(cells[i].rejects) / n;
    cells[i].mean_snr_db = snr[i] / n;
    cells[i].mean_lsd_db = lsd[i] / n;
    if (n_eff[i] == cells[i].n) cells[i].mean_removal_efficacy = eff[i] / n;
  }
  return cells;
}

/// Victim utterances: the first `per_speaker` test utterances of each
/// speaker in manifest order (all when per_speaker is 0).
inline std::vector<const corpus::ManifestRecord *> SelectVictims(const corpus::Manifest &m, int per_speaker) {
  Require(per_speaker >= 0, "campaign: victims_per_speaker must be >= 0");
  std::vector<const corpus::ManifestRecord *> out;
  for (const auto &spk : m.Speakers()) {
    const auto recs = m.Select(spk, corpus::kSplitTest);
    const std::size_t take = per_speaker == 0 ? recs.size() : std::min<std::size_t>(recs.size(), per_speaker);
    out.insert(out.end(), recs.begin(), recs.begin() + static_cast<std::ptrdiff_t>(take));
  }
  Require(!out.empty(), "campaign: manifest has no test-split victims");
  return out;
}

inline void ValidateCampaign(const CampaignConfig &c, const ModelBundle &b) {
  if (c.defenses.empty()) Fail(ErrorKind::kConfig, "campaign.defenses is empty");
  if (c.enhancements.empty()) Fail(ErrorKind::kConfig, "campaign.enhancements is empty");
  if (c.verifiers.empty()) Fail(ErrorKind::kConfig, "campaign.verifiers is empty");
  for (const auto &e : c.enhancements)
    if (e != kNoEnhancement) attack::ParseMethod(e);
  for (const auto &v : c.verifiers) b.EncoderIndex(v);
  bool needs_sets = false;
  for (auto d : c.defenses) needs_sets |= d != DefenseKind::kRaw;
  if (needs_sets && c.protect_sets.empty()) Fail(ErrorKind::kConfig, "campaign.protect_sets is empty");
  for (const auto &s : c.protect_sets) {
    if (s.empty()) Fail(ErrorKind::kConfig, "campaign.protect_sets contains an empty set");
    for (const auto &id : s) b.EncoderIndex(id);
  }
  attack::EnhanceConfig ec = c.enhance;
  attack::ValidateEnhanceConfig(ec);
  ValidateDefenseSettings(c.defense);
  if (c.victims_per_speaker < 0) Fail(ErrorKind::kConfig, "campaign.victims_per_speaker must be >= 0");
}

/// Runs the grid. Victims run in parallel; each writes its own slot, so the
/// rows are identical for any worker count.
inline EvalReport RunCampaign(const ModelBundle &b, const corpus::Manifest &m, const corpus::AudioMap &audio,
                              const CampaignConfig &cfg, const std::string &config_text = {}) {
  ValidateCampaign(cfg, b);
  const auto mels = AnalyzeCorpus(m, audio, b.codec.mel_config(), b.codec.frame_spec(), b.codec.sample_rate(), cfg.workers);
  const ContentPool pool = AttackerPool(m, mels, audio);
  const auto victims = SelectVictims(m, cfg.victims_per_speaker);
  if (!cfg.trace_dir.empty()) std::filesystem::create_directories(cfg.trace_dir);

  std::vector<std::size_t> verifiers;
  for (const auto &v : cfg.verifiers) verifiers.push_back(b.EncoderIndex(v));

  std::vector<std::vector<TrialOutcome>> trial_slots(victims.size());
  std::vector<std::vector<ProtectionRecord>> prot_slots(victims.size());
  ParallelFor(victims.size(), cfg.workers, [&](std::size_t vi) {
    const corpus::ManifestRecord &v = *victims[vi];
    const signal::Waveform &x = audio.at(v.id);

    struct Variant {
      DefenseKind kind;
      std::string encoders;
      signal::Waveform audio;
    };
    std::vector<Variant> variants;
    for (DefenseKind d : cfg.defenses) {
      if (d == DefenseKind::kRaw) {
        variants.push_back({d, kNoEncoders, x});
        continue;
      }
      for (const auto &set : cfg.protect_sets) {
        ProtectRequest req;
        req.kind = d;
        for (const auto &id : set) req.encoders.push_back(b.EncoderIndex(id));
        req.victim_speaker = v.speaker;
        req.settings = cfg.defense;
        const std::string set_name = JoinEncoderSet(set);
        req.seed = DeriveSeed(cfg.seed, "protect/" + v.id + "/" + DefenseName(d) + "/" + set_name);
        ProtectOutcome po = Protect(b, x, req);
        const auto &last = po.result.final_row();
        prot_slots[vi].push_back({v.id, v.speaker, DefenseName(d), set_name, po.target_speaker, po.result.steps(),
                                  defense::TerminationName(po.result.termination), last.l_identity, last.snr_db,
                                  po.config.tau_identity, po.result.identity_reentries});
        if (!cfg.trace_dir.empty())
          defense::WriteTrace(store::Join(cfg.trace_dir, v.id + "-" + DefenseName(d) + "-" + set_name + ".csv"),
                              po.result.trace);
        variants.push_back({d, set_name, std::move(po.result.protected_audio)});
      }
    }

    for (const auto &var : variants) {
      for (const auto &enh : cfg.enhancements) {
        signal::Waveform sample = var.audio;
        std::optional<double> efficacy;
        if (enh != kNoEnhancement) {
          attack::EnhanceConfig ec = cfg.enhance;
          ec.method = attack::ParseMethod(enh);
          sample = attack::Enhance(var.audio, ec);
          if (var.kind != DefenseKind::kRaw) efficacy = attack::RemovalEfficacy(x, var.audio, sample, b.codec.frame_spec());
        }
        const double snr = WaveformSnr(x, sample);
        const double lsd = LogSpectralDistance(x, sample, b.codec.frame_spec());
        for (std::size_t k : verifiers) {
          const CloneResult clone = CloneVoice(b, k, pool, sample, v.speaker);
          double score = 0.0;
          const speaker::Verdict verdict =
              speaker::Verify(b.Profile(k, v.speaker), b.encoders[k].Embed(clone.audio), b.verifiers[k], &score);
          trial_slots[vi].push_back({v.id, v.speaker, DefenseName(var.kind), var.encoders, enh, b.encoders[k].id(),
                                     clone.content_id, score, verdict, snr, lsd, efficacy});
        }
      }
    }
  });

  EvalReport report;
  report.config_text = config_text;
  for (auto &s : trial_slots) report.trials.insert(report.trials.end(), s.begin(), s.end());
  for (auto &s : prot_slots) report.protection.insert(report.protection.end(), s.begin(), s.end());
  report.cells = Summarize(report.trials);
  return report;
}

// ---- report files

inline std::string OptionalField(const std::optional<double> &v) { return v ? FormatDouble(*v) : kNotApplicable; }

inline constexpr const char *kTrialsHeader =
    "victim,speaker,defense,protect_encoders,enhancement,verifier,content_id,score,verdict,snr_db,lsd_db,removal_efficacy";
inline constexpr const char *kSummaryHeader =
    "defense,protect_encoders,enhancement,verifier,n,rejects,dsr,mean_snr_db,mean_lsd_db,mean_removal_efficacy";
inline constexpr const char *kProtectionHeader =
    "victim,speaker,defense,protect_encoders,target,steps,termination,l_identity,snr_db,tau_identity,identity_reentries";

inline std::string TrialsCsv(const std::vector<TrialOutcome> &rows) {
  std::string out = std::string(kTrialsHeader) + "\n";
  for (const auto &t : rows)
    out += t.victim + "," + t.speaker + "," + t.defense + "," + t.protect_encoders + "," + t.enhancement + "," + t.verifier +
           "," + t.content_id + "," + FormatDouble(t.score) + "," + speaker::VerdictName(t.verdict) + "," +
           FormatDouble(t.snr_db) + "," + FormatDouble(t.lsd_db) + "," + OptionalField(t.removal_efficacy) + "\n";
  return out;
}

inline std::string SummaryCsv(const std::vector<CellSummary> &cells) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto &c : cells)
    out += c.defense + "," + c.protect_encoders + "," + c.enhancement + "," + c.verifier + "," + std::to_string(c.n) + "," +
           std::to_string(c.rejects) + "," + FormatDouble(c.dsr) + "," + FormatDouble(c.mean_snr_db) + "," +
           FormatDouble(c.mean_lsd_db) + "," + OptionalField(c.mean_removal_efficacy) + "\n";
  return out;
}

inline std::string ProtectionCsv(const std::vector<ProtectionRecord> &rows) {
  std::string out = std::string(kProtectionHeader) + "\n";
  for (const auto &p : rows)
    out += p.victim + "," + p.speaker + "," + p.defense + "," + p.protect_encoders + "," + p.target + "," +
           std::to_string(p.steps) + "," + p.termination + "," + FormatDouble(p.l_identity) + "," + FormatDouble(p.snr_db) +
           "," + FormatDouble(p.tau_identity) + "," + std::to_string(p.identity_reentries) + "\n";
  return out;
}

inline void EmitReport(const EvalReport &r, const std::string &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, dir + ": cannot create report directory: " + ec.message());
  diffnet::WriteTextFile(store::Join(dir, "trials.csv"), TrialsCsv(r.trials));
  diffnet::WriteTextFile(store::Join(dir, "summary.csv"), SummaryCsv(r.cells));
  diffnet::WriteTextFile(store::Join(dir, "protection.csv"), ProtectionCsv(r.protection));
  diffnet::WriteTextFile(store::Join(dir, "config.txt"), r.config_text);
}

/// Data rows of a CSV table after checking its header and column count.
inline std::vector<std::vector<std::string>> ParseCsv(const std::string &text, const std::string &header,
                                                      const std::string &source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header) Fail(ErrorKind::kMalformed, source + ": unexpected header");
  const std::size_t cols = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  std::vector<std::vector<std::string>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != cols)
      Fail(ErrorKind::kMalformed, source + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) + " fields");
    rows.push_back(std::move(f));
  }
  return rows;
}

inline std::optional<double> ParseOptional(const std::string &s, const std::string &what) {
  if (s == kNotApplicable) return std::nullopt;
  return ParseDouble(s, what);
}

inline speaker::Verdict ParseVerdict(const std::string &s, const std::string &what) {
  if (s == "accept") return speaker::Verdict::kAccept;
  if (s == "reject") return speaker::Verdict::kReject;
  Fail(ErrorKind::kMalformed, what + ": unknown verdict '" + s + "'");
}

/// Loads a report and checks that every stored aggregate equals its
/// recomputation from the trial rows (bit-exact).
inline EvalReport LoadReport(const std::string &dir) {
  EvalReport r;
  const std::string tp = store::Join(dir, "trials.csv"), sp = store::Join(dir, "summary.csv"),
                    pp = store::Join(dir, "protection.csv");
  for (const auto &f : ParseCsv(diffnet::ReadTextFile(tp), kTrialsHeader, tp)) {
    TrialOutcome t;
    t.victim = f[0];
    t.speaker = f[1];
    t.defense = f[2];
    t.protect_encoders = f[3];
    t.enhancement = f[4];
    t.verifier = f[5];
    t.content_id = f[6];
    t.score = ParseDouble(f[7], tp + " score");
    t.verdict = ParseVerdict(f[8], tp);
    t.snr_db = ParseDouble(f[9], tp + " snr_db");
    t.lsd_db = ParseDouble(f[10], tp + " lsd_db");
    t.removal_efficacy = ParseOptional(f[11], tp + " removal_efficacy");
    if (!(t.score >= -1.0 && t.score <= 1.0)) Fail(ErrorKind::kMalformed, tp + ": score outside [-1, 1]");
    r.trials.push_back(std::move(t));
  }
  std::vector<CellSummary> stored;
  for (const auto &f : ParseCsv(diffnet::ReadTextFile(sp), kSummaryHeader, sp)) {
    CellSummary c;
    c.defense = f[0];
    c.protect_encoders = f[1];
    c.enhancement = f[2];
    c.verifier = f[3];
    c.n = static_cast<std::size_t>(ParseInt(f[4], sp + " n"));
    c.rejects = static_cast<std::size_t>(ParseInt(f[5], sp + " rejects"));
    c.dsr = ParseDouble(f[6], sp + " dsr");
    c.mean_snr_db = ParseDouble(f[7], sp + " mean_snr_db");
    c.mean_lsd_db = ParseDouble(f[8], sp + " mean_lsd_db");
    c.mean_removal_efficacy = ParseOptional(f[9], sp + " mean_removal_efficacy");
    stored.push_back(std::move(c));
  }
  for (const auto &f : ParseCsv(diffnet::ReadTextFile(pp), kProtectionHeader, pp)) {
    ProtectionRecord p;
    p.victim = f[0];
    p.speaker = f[1];
    p.defense = f[2];
    p.protect_encoders = f[3];
    p.target = f[4];
    p.steps = static_cast<int>(ParseInt(f[5], pp + " steps"));
    p.termination = f[6];
    p.l_identity = ParseDouble(f[7], pp + " l_identity");
    p.snr_db = ParseDouble(f[8], pp + " snr_db");
    p.tau_identity = ParseDouble(f[9], pp + " tau_identity");
    p.identity_reentries = static_cast<int>(ParseInt(f[10], pp + " identity_reentries"));
    r.protection.push_back(std::move(p));
  }
  r.config_text = diffnet::ReadTextFile(store::Join(dir, "config.txt"));
  r.cells = Summarize(r.trials);
  if (r.cells.size() != stored.size())
    Fail(ErrorKind::kIntegrity, sp + ": " + std::to_string(stored.size()) + " cells stored, " +
                                    std::to_string(r.cells.size()) + " recomputed");
  for (std::size_t i = 0; i < stored.size(); ++i)
    if (!(stored[i] == r.cells[i]))
      Fail(ErrorKind::kIntegrity, sp + ": row " + std::to_string(i + 1) + " (" + stored[i].defense + "/" +
                                      stored[i].protect_encoders + "/" + stored[i].enhancement + "/" + stored[i].verifier +
                                      ") disagrees with the trial rows");
  return r;
}

}  // namespace rovo::eval
