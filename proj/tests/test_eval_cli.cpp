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

#include "rovo/cli/app.hpp"
#include "rovo/eval/spectrogram.hpp"
#include "test_util.hpp"
#include "world.hpp"

#include <algorithm>
#include <numbers>
#include <random>
#include <sstream>

namespace rovo {
namespace {

using rovo::testing::DefaultWorld;
using rovo::testing::Noise;
using rovo::testing::ReadBytes;
using rovo::testing::Sine;
using rovo::testing::TempDir;
using rovo::testing::WriteBytes;
using signal::Waveform;
using speaker::Verdict;

// ---- metrics

TEST(Dsr, DocumentedCases) {
  EXPECT_EQ(eval::Dsr({Verdict::kReject, Verdict::kReject}), 100.0);
  EXPECT_EQ(eval::Dsr({Verdict::kReject, Verdict::kAccept, Verdict::kReject, Verdict::kReject}), 75.0);
  EXPECT_EQ(eval::Dsr({Verdict::kAccept, Verdict::kAccept, Verdict::kAccept}), 0.0);
  EXPECT_ROVO_ERROR(eval::Dsr({}), ErrorKind::kPrecondition);
}

TEST(Dsr, InvariantToOrdering) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Verdict> cell;
    for (int i = 0; i < 37; ++i) cell.push_back(gen() % 3 == 0 ? Verdict::kReject : Verdict::kAccept);
    const double before = eval::Dsr(cell);
    std::shuffle(cell.begin(), cell.end(), gen);
    EXPECT_EQ(eval::Dsr(cell), before);
  }
}

TEST(WaveformSnr, CapZeroAndOracle) {
  const Waveform ref = Noise(1, 1000);
  EXPECT_EQ(eval::WaveformSnr(ref, ref), eval::kSnrCapDb);
  EXPECT_EQ(eval::kSnrCapDb, 120.0);
  Waveform zero = ref;
  std::fill(zero.samples.begin(), zero.samples.end(), 0.0);
  EXPECT_NEAR(eval::WaveformSnr(ref, zero), 0.0, 1e-12);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Waveform a = Noise(seed, 800), b = Noise(seed + 50, 900, 0.1);
    double s = 0.0, n = 0.0;
    for (std::size_t i = 0; i < 800; ++i) {
      s += a.samples[i] * a.samples[i];
      n += (a.samples[i] - b.samples[i]) * (a.samples[i] - b.samples[i]);
    }
    EXPECT_NEAR(eval::WaveformSnr(a, b), 10.0 * std::log10(s / n), 1e-10);
  }
  EXPECT_ROVO_ERROR(eval::WaveformSnr(zero, ref), ErrorKind::kPrecondition);
}

TEST(LogSpectralDistance, IdentityAndDoubling) {
  const Waveform a = Noise(3, 4000);
  EXPECT_EQ(eval::LogSpectralDistance(a, a), 0.0);
  Waveform b = a;
  for (auto &s : b.samples) s *= 2.0;
  EXPECT_NEAR(eval::LogSpectralDistance(a, b), 20.0 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(eval::LogSpectralDistance(a, b), 6.0206, 1e-4);
  EXPECT_ROVO_ERROR(eval::LogSpectralDistance(Noise(1, 100), Noise(2, 100)), ErrorKind::kPrecondition);
}

TEST(LogSpectralDistance, MatchesBruteForceFrameLoop) {
  const Waveform a = Noise(7, 1500), b = Noise(8, 1400, 0.2);
  const int n_fft = 512, hop = 128;
  const std::size_t n = 1400;
  double sum = 0.0;
  long count = 0;
  for (std::size_t start = 0; start + n_fft <= n; start += hop) {
    for (int k = 0; k <= n_fft / 2; ++k) {
      double ra = 0, ia = 0, rb = 0, ib = 0;
      for (int t = 0; t < n_fft; ++t) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / n_fft);
        const double ang = -2.0 * std::numbers::pi * k * t / n_fft;
        ra += w * a.samples[start + t] * std::cos(ang);
        ia += w * a.samples[start + t] * std::sin(ang);
        rb += w * b.samples[start + t] * std::cos(ang);
        ib += w * b.samples[start + t] * std::sin(ang);
      }
      const double da = 20.0 * std::log10(std::max(std::hypot(ra, ia), 1e-8));
      const double db = 20.0 * std::log10(std::max(std::hypot(rb, ib), 1e-8));
      sum += (da - db) * (da - db);
      ++count;
    }
  }
  EXPECT_NEAR(eval::LogSpectralDistance(a, b), std::sqrt(sum / static_cast<double>(count)), 1e-8);
}

// ---- spectrogram images

TEST(Spectrogram, SilenceIsUniform) {
  const eval::GrayImage img = eval::SpectrogramImage(Waveform{std::vector<double>(2048, 0.0), 16000});
  ASSERT_FALSE(img.pixels.empty());
  EXPECT_TRUE(std::all_of(img.pixels.begin(), img.pixels.end(), [&](unsigned char p) { return p == img.pixels[0]; }));
}

TEST(Spectrogram, DimensionsAndSineBand) {
  const int bin = 40;
  const Waveform x = Sine(bin * 16000.0 / 512, 4096);
  const eval::GrayImage img = eval::SpectrogramImage(x);
  EXPECT_EQ(img.width, static_cast<int>(signal::NumFrames(x.size(), {})));
  EXPECT_EQ(img.height, 257);
  const int row = img.height - 1 - bin;  // low frequencies at the bottom
  for (int xpos = 0; xpos < img.width; ++xpos) {
    int brightest = 0;
    for (int y = 0; y < img.height; ++y)
      if (img.at(xpos, y) > img.at(xpos, brightest)) brightest = y;
    EXPECT_EQ(brightest, row);
    EXPECT_EQ(img.at(xpos, row), 255);
  }
}

TEST(Spectrogram, PgmFile) {
  TempDir dir("pgm");
  const Waveform x = Sine(1000, 2048);
  eval::DumpSpectrogram(x, dir.file("s.pgm"));
  const eval::GrayImage img = eval::SpectrogramImage(x);
  const std::string bytes = ReadBytes(dir.file("s.pgm"));
  const std::string header = "P5\n" + std::to_string(img.width) + " 257\n255\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(bytes.size(), header.size() + img.pixels.size());
  EXPECT_ROVO_ERROR(eval::SpectrogramImage(Noise(1, 100)), ErrorKind::kPrecondition);
}

// ---- reports

eval::EvalReport TwoRowReport() {
  eval::EvalReport r;
  r.config_text = "run.seed = 1\n";
  eval::TrialOutcome t;
  t.victim = "spk00_u07";
  t.speaker = "spk00";
  t.defense = "raw";
  t.protect_encoders = eval::kNoEncoders;
  t.enhancement = eval::kNoEnhancement;
  t.verifier = "mel-stats";
  t.content_id = "spk03_u01";
  t.score = 0.75;
  t.verdict = Verdict::kAccept;
  t.snr_db = 120.0;
  t.lsd_db = 0.0;
  r.trials.push_back(t);
  t.victim = "spk01_u08";
  t.speaker = "spk01";
  t.score = -0.125;
  t.verdict = Verdict::kReject;
  r.trials.push_back(t);
  r.cells = eval::Summarize(r.trials);
  return r;
}

TEST(Report, TwoRowsGiveHeaderAndTwoLines) {
  TempDir dir("report");
  const eval::EvalReport r = TwoRowReport();
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.cells[0].dsr, 50.0);
  eval::EmitReport(r, dir.path().string());
  const std::string trials = ReadBytes(dir.file("trials.csv"));
  EXPECT_EQ(std::count(trials.begin(), trials.end(), '\n'), 3);
  EXPECT_EQ(trials.substr(0, trials.find('\n')), eval::kTrialsHeader);
  EXPECT_EQ(ReadBytes(dir.file("config.txt")), r.config_text);
}

TEST(Report, RoundTripPreservesAggregates) {
  TempDir dir("report");
  const eval::EvalReport r = TwoRowReport();
  eval::EmitReport(r, dir.path().string());
  const eval::EvalReport back = eval::LoadReport(dir.path().string());
  EXPECT_EQ(back.cells, r.cells);
  EXPECT_EQ(back.trials, r.trials);
  EXPECT_EQ(back.config_text, r.config_text);
}

TEST(Report, TamperedAggregateIsAnIntegrityError) {
  TempDir dir("report");
  eval::EmitReport(TwoRowReport(), dir.path().string());
  std::string summary = ReadBytes(dir.file("summary.csv"));
  const auto pos = summary.find(",50,");
  ASSERT_NE(pos, std::string::npos) << summary;
  summary.replace(pos, 4, ",60,");
  WriteBytes(dir.file("summary.csv"), summary);
  EXPECT_ROVO_ERROR(eval::LoadReport(dir.path().string()), ErrorKind::kIntegrity);
}

TEST(Report, MissingFileReported) {
  TempDir dir("report");
  EXPECT_ROVO_ERROR(eval::LoadReport(dir.path().string()), ErrorKind::kMissingFile);
}

// ---- campaign

eval::CampaignConfig SmallCampaign() {
  eval::CampaignConfig c = cli::CampaignConfigFor(DefaultWorld().config);
  c.victims_per_speaker = 1;
  c.defenses = {eval::DefenseKind::kRaw, eval::DefenseKind::kEmbedding};
  c.protect_sets = {{"mel-stats"}};
  c.enhancements = {eval::kNoEnhancement, "smoothing"};
  c.verifiers = {"mfcc-stats"};
  c.defense.max_iters = 4;
  return c;
}

TEST(Campaign, DeterministicAcrossWorkerCounts) {
  const auto &w = DefaultWorld();
  eval::CampaignConfig c = SmallCampaign();
  c.workers = 1;
  const eval::EvalReport a = eval::RunCampaign(w.models, w.manifest, w.audio, c);
  c.workers = 3;
  const eval::EvalReport b = eval::RunCampaign(w.models, w.manifest, w.audio, c);
  EXPECT_EQ(eval::TrialsCsv(a.trials), eval::TrialsCsv(b.trials));
  EXPECT_EQ(eval::SummaryCsv(a.cells), eval::SummaryCsv(b.cells));
  EXPECT_EQ(eval::ProtectionCsv(a.protection), eval::ProtectionCsv(b.protection));
  // Two defenses x two enhancements x one verifier.
  EXPECT_EQ(a.cells.size(), 4u);
  for (const auto &t : a.trials) {
    EXPECT_GE(t.score, -1.0);
    EXPECT_LE(t.score, 1.0);
    EXPECT_NE(t.content_id.substr(0, 5), t.speaker);  // attacker content comes from another speaker
    const double threshold = w.models.verifiers[w.models.EncoderIndex(t.verifier)].threshold;
    EXPECT_EQ(t.verdict, t.score >= threshold ? Verdict::kAccept : Verdict::kReject);
    EXPECT_EQ(t.removal_efficacy.has_value(), t.defense != "raw" && t.enhancement != eval::kNoEnhancement);
  }
}

TEST(Campaign, ThresholdExtremesForceDsr) {
  const auto &w = DefaultWorld();
  eval::ModelBundle b = w.models;
  eval::CampaignConfig c = SmallCampaign();
  c.defenses = {eval::DefenseKind::kRaw};
  c.enhancements = {eval::kNoEnhancement};
  c.verifiers = {"mel-stats", "mfcc-stats"};
  for (auto &v : b.verifiers) v.threshold = -1.0;
  for (const auto &cell : eval::RunCampaign(b, w.manifest, w.audio, c).cells) EXPECT_EQ(cell.dsr, 0.0);
  for (auto &v : b.verifiers) v.threshold = std::nextafter(1.0, 2.0);
  for (const auto &cell : eval::RunCampaign(b, w.manifest, w.audio, c).cells) EXPECT_EQ(cell.dsr, 100.0);
}

TEST(Campaign, InvalidGridRejected) {
  const auto &w = DefaultWorld();
  eval::CampaignConfig c = SmallCampaign();
  c.verifiers = {"no-such-encoder"};
  EXPECT_ANY_THROW(eval::RunCampaign(w.models, w.manifest, w.audio, c));
  c = SmallCampaign();
  c.enhancements = {"deepfilter"};
  EXPECT_ROVO_ERROR(eval::RunCampaign(w.models, w.manifest, w.audio, c), ErrorKind::kConfig);
}

// ---- command line

struct CliResult {
  int code;
  std::string out, err;
};

CliResult RunRovo(std::vector<std::string> args) {
  args.insert(args.begin(), "rovo");
  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> DirBytes(const std::filesystem::path &dir) {
  std::map<std::string, std::string> out;
  for (const auto &e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = ReadBytes(e.path().string());
  return out;
}

TEST(Cli, HelpListsEveryFlagOfEverySubcommand) {
  cli::Invocation inv;
  auto app = cli::BuildApp(inv);
  std::vector<std::string> names;
  for (const auto *sub : app->get_subcommands({})) names.push_back(sub->get_name());
  EXPECT_EQ(names, cli::SubcommandNames());
  for (const auto &name : cli::SubcommandNames()) {
    const CliResult r = RunRovo({name, "--help"});
    EXPECT_EQ(r.code, 0) << name;
    for (const auto *opt : app->get_subcommand(name)->get_options()) {
      EXPECT_FALSE(opt->get_description().empty() && opt->get_name() != "--help") << name << " " << opt->get_name();
      for (const auto &flag : opt->get_lnames()) EXPECT_NE(r.out.find("--" + flag), std::string::npos) << name << " --" << flag;
    }
  }
  const CliResult top = RunRovo({"--help"});
  for (const char *flag : {"--config", "--seed", "--workers", "--trace-dir", "--set"})
    EXPECT_NE(top.out.find(flag), std::string::npos) << flag;
}

TEST(Cli, ConfigErrorsExitTwo) {
  TempDir dir("cli");
  WriteBytes(dir.file("bad.cfg"), "codec.no_such_key = 3\n");
  CliResult r = RunRovo({"--config", dir.file("bad.cfg"), "gen-corpus", "--out", dir.file("c")});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_EQ(r.err.rfind("error: config", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_EQ(RunRovo({"--set", "codec.dim=abc", "gen-corpus"}).code, cli::kExitConfig);
  EXPECT_EQ(RunRovo({"--set", "nokey", "gen-corpus"}).code, cli::kExitConfig);
  EXPECT_EQ(RunRovo({"bogus-command"}).code, cli::kExitConfig);
  EXPECT_EQ(RunRovo({"enhance", "--in", "a.wav", "--out", "b.wav", "--method", "nope"}).code, cli::kExitConfig);
}

TEST(Cli, MissingArtifactsExitThree) {
  TempDir dir("cli");
  const CliResult r = RunRovo({"--set", "paths.model_dir=" + dir.file("none"), "verify", "--profile", "spk00", "--in",
                           dir.file("x.wav")});
  EXPECT_EQ(r.code, cli::kExitMissing);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  // An absent config file is a configuration error, not a missing artifact.
  EXPECT_EQ(RunRovo({"--config", dir.file("missing.cfg"), "gen-corpus"}).code, cli::kExitConfig);
}

// gen-corpus and train run once; the remaining commands use their outputs.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("pipeline");
    base_ = {"--set", "paths.corpus_dir=" + dir_->file("corpus"), "--set", "paths.model_dir=" + dir_->file("models"),
             "--set", "paths.report_dir=" + dir_->file("report")};
    const CliResult g = Cmd({"gen-corpus"});
    ASSERT_EQ(g.code, 0) << g.err;
    const CliResult t = Cmd({"train"});
    ASSERT_EQ(t.code, 0) << t.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static CliResult Cmd(std::vector<std::string> args) {
    args.insert(args.begin(), base_.begin(), base_.end());
    return RunRovo(args);
  }
  static std::string Wav(const std::string &id) {
    for (const auto &r : Manifest().records)
      if (r.id == id) return Manifest().Resolve(r);
    return {};
  }
  static const corpus::Manifest &Manifest() {
    static const corpus::Manifest m = corpus::LoadManifest(dir_->file("corpus") + "/manifest.txt");
    return m;
  }

  static inline TempDir *dir_ = nullptr;
  static inline std::vector<std::string> base_;
};

TEST_F(CliPipeline, EveryCommandPrintsTheSeed) {
  const CliResult r = Cmd({"--seed", "77", "enhance", "--in", Wav(Manifest().records[0].id), "--out", dir_->file("e.wav")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("seed 77\n", 0), 0u) << r.out;
}

TEST_F(CliPipeline, ProtectedUtteranceIsRejectedAndEnrollmentAccepted) {
  const auto *victim = Manifest().Select("", corpus::kSplitTest).front();
  const auto *enrolled = Manifest().Select(victim->speaker, corpus::kSplitEnroll).front();
  const std::string prot = dir_->file("protected.wav");
  const CliResult p = Cmd({"protect", "--in", Wav(victim->id), "--out", prot});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_NE(p.out.find("termination converged"), std::string::npos) << p.out;
  const CliResult rej = Cmd({"verify", "--profile", victim->speaker, "--in", prot});
  ASSERT_EQ(rej.code, 0) << rej.err;
  EXPECT_NE(rej.out.find("\nreject "), std::string::npos) << rej.out;
  const CliResult acc = Cmd({"verify", "--profile", victim->speaker, "--in", Wav(enrolled->id)});
  ASSERT_EQ(acc.code, 0) << acc.err;
  EXPECT_NE(acc.out.find("\naccept "), std::string::npos) << acc.out;
}

TEST_F(CliPipeline, OutputsAreIdempotent) {
  const std::string in = Wav(Manifest().records[5].id), stolen = Wav(Manifest().records[40].id);
  const std::vector<std::vector<std::string>> commands{
      {"protect", "--mode", "signal", "--in", in, "--out", dir_->file("o/p.wav")},
      {"enhance", "--method", "wiener", "--in", in, "--out", dir_->file("o/e.wav")},
      {"synthesize", "--content", in, "--stolen-from", stolen, "--out", dir_->file("o/s.wav")}};
  for (const auto &c : commands) ASSERT_EQ(Cmd(c).code, 0) << c[0];
  const auto first = DirBytes(dir_->file("o"));
  for (const auto &c : commands) ASSERT_EQ(Cmd(c).code, 0) << c[0];
  EXPECT_EQ(DirBytes(dir_->file("o")), first);
  EXPECT_EQ(first.size(), 3u);

  const auto corpus_before = DirBytes(dir_->file("corpus"));
  ASSERT_EQ(Cmd({"gen-corpus"}).code, 0);
  EXPECT_EQ(DirBytes(dir_->file("corpus")), corpus_before);
  const auto models_before = DirBytes(dir_->file("models"));
  ASSERT_EQ(Cmd({"calibrate"}).code, 0);
  EXPECT_EQ(DirBytes(dir_->file("models")), models_before);
}

TEST_F(CliPipeline, EvaluateWritesLoadableReport) {
  const CliResult r = Cmd({"--set", "campaign.defenses=raw", "--set", "campaign.enhancements=none", "evaluate"});
  ASSERT_EQ(r.code, 0) << r.err;
  const eval::EvalReport rep = eval::LoadReport(dir_->file("report"));
  EXPECT_EQ(rep.cells.size(), 2u);
  EXPECT_NE(rep.config_text.find("campaign.defenses = raw"), std::string::npos) << rep.config_text;
}

TEST_F(CliPipeline, UnknownProfileAndEncoderFail) {
  const std::string in = Wav(Manifest().records[0].id);
  EXPECT_NE(Cmd({"verify", "--profile", "nobody", "--in", in}).code, 0);
  EXPECT_NE(Cmd({"verify", "--profile", "spk00", "--in", in, "--encoder", "nope"}).code, 0);
  EXPECT_EQ(Cmd({"verify", "--profile", "spk00", "--in", dir_->file("absent.wav")}).code, cli::kExitMissing);
}

}  // namespace
}  // namespace rovo
