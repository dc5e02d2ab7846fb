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

#include "rovo/kv.hpp"
#include "rovo/signal/wav_io.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace rovo::corpus {

namespace fs = std::filesystem;

// Split tags.
inline constexpr const char *kSplitNone = "none";
inline constexpr const char *kSplitTrain = "train";
inline constexpr const char *kSplitEnroll = "enroll";
inline constexpr const char *kSplitTest = "test";

// Roles.
inline constexpr const char *kRoleEnroll = "enroll";
inline constexpr const char *kRoleVictim = "victim";
inline constexpr const char *kRoleAttackerContent = "attacker-content";
inline constexpr const char *kRoleEval = "eval";

inline bool IsKnownRole(const std::string &r) {
  return r == kRoleEnroll || r == kRoleVictim || r == kRoleAttackerContent || r == kRoleEval;
}

struct ManifestRecord {
  std::string id;
  std::string speaker;
  std::string path;  // relative paths resolve against Manifest::base_dir
  double duration_s = 0.0;
  std::string split = kSplitNone;
  std::string role = kRoleEval;

  friend bool operator==(const ManifestRecord &, const ManifestRecord &) = default;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::string base_dir;

  std::string Resolve(const ManifestRecord &r) const {
    const fs::path p(r.path);
    if (p.is_absolute() || base_dir.empty()) return p.string();
    return (fs::path(base_dir) / p).string();
  }

  /// Speaker ids in first-appearance order.
  std::vector<std::string> Speakers() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto &r : records)
      if (seen.insert(r.speaker).second) out.push_back(r.speaker);
    return out;
  }

  std::vector<const ManifestRecord *> Select(const std::string &speaker, const std::string &split) const {
    std::vector<const ManifestRecord *> out;
    for (const auto &r : records)
      if ((speaker.empty() || r.speaker == speaker) && (split.empty() || r.split == split)) out.push_back(&r);
    return out;
  }

  const ManifestRecord &Find(const std::string &id) const {
    for (const auto &r : records)
      if (r.id == id) return r;
    Fail(ErrorKind::kPrecondition, "manifest has no utterance '" + id + "'");
  }
};

inline std::string SerializeManifest(const Manifest &m) {
  std::string out = "# id speaker path duration split role\n";
  for (const auto &r : m.records) {
    Record rec;
    rec.Set("id", r.id);
    rec.Set("speaker", r.speaker);
    rec.Set("path", r.path);
    rec.Set("duration", FormatFixed(r.duration_s, 6));
    rec.Set("split", r.split);
    rec.Set("role", r.role);
    out += rec.Serialize() + "\n";
  }
  return out;
}

inline Manifest ParseManifest(const std::string &text, const std::string &source, const std::string &base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  for (const Record &rec : ParseRecords(text, source)) {
    ManifestRecord r;
    r.id = rec.Get("id");
    r.speaker = rec.Get("speaker");
    r.path = rec.Get("path");
    r.duration_s = ParseDouble(rec.Get("duration"), source + " duration");
    r.split = rec.Has("split") ? rec.Get("split") : kSplitNone;
    r.role = rec.Has("role") ? rec.Get("role") : kRoleEval;
    m.records.push_back(std::move(r));
  }
  return m;
}

/// Rejects duplicate ids, non-positive durations, unknown roles and
/// (when `check_paths`) records whose audio file is missing.
inline void ValidateManifest(const Manifest &m, bool check_paths = true) {
  std::set<std::string> ids;
  for (const auto &r : m.records) {
    if (!ids.insert(r.id).second) Fail(ErrorKind::kMalformed, "manifest: duplicate utterance id '" + r.id + "'");
    if (!(r.duration_s > 0.0)) Fail(ErrorKind::kMalformed, "manifest: non-positive duration for '" + r.id + "'");
    if (!IsKnownRole(r.role)) Fail(ErrorKind::kMalformed, "manifest: unknown role '" + r.role + "'");
    if (check_paths && !fs::exists(m.Resolve(r)))
      Fail(ErrorKind::kMissingFile, "manifest: dangling path for '" + r.id + "': " + m.Resolve(r));
  }
}

inline void SaveManifest(const std::string &path, const Manifest &m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, path + ": cannot open for writing");
  out << SerializeManifest(m);
}

inline Manifest LoadManifest(const std::string &path) {
  if (!fs::exists(path)) Fail(ErrorKind::kMissingFile, path + ": no such manifest");
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Manifest m = ParseManifest(text, path, fs::path(path).parent_path().string());
  ValidateManifest(m);
  return m;
}

struct SplitRatios {
  double train = 0.5;
  double enroll = 0.2;
  double test = 0.3;
};

/// Per-speaker counts by largest remainder, so they always sum to n.
inline std::array<std::size_t, 3> SplitCounts(std::size_t n, const SplitRatios &r) {
  const double ratios[3] = {r.train, r.enroll, r.test};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best] + 1e-12) best = i;
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return counts;
}

/// Seeded within-speaker split. train -> attacker-content, enroll -> enroll,
/// test -> victim. Every speaker appears in every split.
inline Manifest SplitManifest(Manifest m, const SplitRatios &ratios, std::uint64_t seed) {
  Require(ratios.train > 0.0 && ratios.enroll > 0.0 && ratios.test > 0.0, "split: ratios must be positive");
  Require(std::abs(ratios.train + ratios.enroll + ratios.test - 1.0) <= 1e-9, "split: ratios must sum to 1");
  for (const auto &spk : m.Speakers()) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m.records.size(); ++i)
      if (m.records[i].speaker == spk) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return m.records[a].id < m.records[b].id; });
    const auto counts = SplitCounts(idx.size(), ratios);
    if (counts[0] == 0 || counts[1] == 0 || counts[2] == 0)
      Fail(ErrorKind::kPrecondition, "split: speaker '" + spk + "' has " + std::to_string(idx.size()) +
                                         " utterances, too few for a three-way split");
    Rng rng(DeriveSeed(seed, "split/" + spk));
    rng.Shuffle(idx);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto &r = m.records[idx[k]];
      if (k < counts[0]) {
        r.split = kSplitTrain;
        r.role = kRoleAttackerContent;
      } else if (k < counts[0] + counts[1]) {
        r.split = kSplitEnroll;
        r.role = kRoleEnroll;
      } else {
        r.split = kSplitTest;
        r.role = kRoleVictim;
      }
    }
  }
  return m;
}

enum class SpeakerIdRule { kParentDirectory, kFilenamePrefix };

struct IngestResult {
  Manifest manifest;
  std::vector<std::string> skipped;  // "path: reason"
};

/// Indexes every readable WAV under `dir`. Other files are skipped with a
/// reason; an unreadable directory or zero usable files is an error.
inline IngestResult IngestDirectory(const std::string &dir, SpeakerIdRule rule) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) Fail(ErrorKind::kMissingFile, dir + ": not a readable directory");
  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec))
    if (it->is_regular_file()) files.push_back(it->path());
  if (ec) Fail(ErrorKind::kIo, dir + ": " + ec.message());
  std::sort(files.begin(), files.end());

  IngestResult out;
  out.manifest.base_dir = dir;
  std::set<std::string> ids;
  for (const auto &p : files) {
    const std::string rel = fs::relative(p, dir).generic_string();
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".wav") {
      out.skipped.push_back(rel + ": not a .wav file");
      continue;
    }
    signal::WavInfo info;
    try {
      info = signal::ProbeWav(p.string());
    } catch (const Error &e) {
      out.skipped.push_back(rel + ": " + e.what());
      continue;
    }
    if (info.frames == 0) {
      out.skipped.push_back(rel + ": no samples");
      continue;
    }
    ManifestRecord r;
    r.path = rel;
    r.duration_s = info.duration_seconds();
    const std::string stem = p.stem().string();
    if (rule == SpeakerIdRule::kParentDirectory) {
      r.speaker = p.parent_path().filename().string();
    } else {
      const auto cut = stem.find_first_of("_-");
      r.speaker = stem.substr(0, cut);
    }
    r.id = fs::path(rel).replace_extension().generic_string();
    std::replace(r.id.begin(), r.id.end(), '/', '_');
    if (!ids.insert(r.id).second) {
      out.skipped.push_back(rel + ": duplicate utterance id");
      continue;
    }
    out.manifest.records.push_back(std::move(r));
  }
  if (out.manifest.records.empty()) Fail(ErrorKind::kPrecondition, dir + ": no usable WAV files");
  return out;
}

}  // namespace rovo::corpus
