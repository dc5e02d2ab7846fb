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

// Command-line front end: flag parsing, config layering (file, then --set,
// then dedicated flags) and the exit-code contract.
//
// Exit codes: 0 success, 1 other failure, 2 config error, 3 missing
// artifact, 4 numerical error. Failures print one line
// "error: <category>: <detail>" to stderr.

#pragma once

#include "rovo/cli/commands.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rovo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissing = 3;
inline constexpr int kExitNumerical = 4;

inline int ExitCodeFor(ErrorKind k) {
  switch (k) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kMissingFile: return kExitMissing;
    case ErrorKind::kNumerical: return kExitNumerical;
    default: return kExitFailure;
  }
}

/// Values bound to flags by BuildApp.
struct Invocation {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> trace_dir;
  std::vector<std::string> overrides;  // key=value

  std::string out_dir;  // gen-corpus, train, calibrate, evaluate
  ProtectArgs protect;
  std::string input, output, method = "spectral-masking", content, stolen_from, encoder, profile;
};

inline const std::vector<std::string> &SubcommandNames() {
  static const std::vector<std::string> names{"gen-corpus", "train",  "protect",  "enhance",
                                              "synthesize", "verify", "evaluate", "calibrate"};
  return names;
}

inline std::unique_ptr<CLI::App> BuildApp(Invocation &inv) {
  auto app = std::make_unique<CLI::App>("Embedding-level adversarial voice protection toolkit", "rovo");
  app->require_subcommand(1, 1);
  app->option_defaults()->always_capture_default(false);
  app->add_option("--config", inv.config_path, "run configuration file (section.key = value)");
  app->add_option("--seed", inv.seed, "master seed (overrides run.seed)");
  app->add_option("--workers", inv.workers, "worker threads, 0 = hardware concurrency (overrides run.workers)");
  app->add_option("--trace-dir", inv.trace_dir, "write optimization traces here (overrides paths.trace_dir)");
  app->add_option("--set", inv.overrides, "override one config key, KEY=VALUE (repeatable)");

  auto *gen = app->add_subcommand("gen-corpus", "generate and split the synthetic multi-speaker corpus");
  gen->add_option("--out", inv.out_dir, "corpus directory (overrides paths.corpus_dir)");

  auto *train = app->add_subcommand("train", "fit codec, speaker encoders, attackers and verifier thresholds");
  train->add_option("--out", inv.out_dir, "model directory (overrides paths.model_dir)");

  auto *protect = app->add_subcommand("protect", "protect one utterance against voice cloning");
  protect->add_option("--in", inv.protect.input, "input WAV")->required();
  protect->add_option("--out", inv.protect.output, "protected WAV")->required();
  protect->add_option("--mode", inv.protect.mode, "embedding or signal (default embedding)");
  protect->add_option("--encoders", inv.protect.encoders, "speaker encoders to protect against (default all)")
      ->delimiter(',');
  protect->add_option("--speaker", inv.protect.speaker, "victim speaker id (default: best-matching profile)");
  protect->add_option("--target", inv.protect.target, "target speaker id (default: farthest enrolled speaker)");

  auto *enhance = app->add_subcommand("enhance", "apply a speech-enhancement attack");
  enhance->add_option("--in", inv.input, "input WAV")->required();
  enhance->add_option("--out", inv.output, "enhanced WAV")->required();
  enhance->add_option("--method", inv.method, "spectral-masking, wiener or smoothing (default spectral-masking)");

  auto *synth = app->add_subcommand("synthesize", "clone a voice with the toy converter");
  synth->add_option("--content", inv.content, "content WAV spoken by the attacker")->required();
  synth->add_option("--stolen-from", inv.stolen_from, "WAV whose speaker identity is cloned")->required();
  synth->add_option("--out", inv.output, "synthesized WAV")->required();
  synth->add_option("--encoder", inv.encoder, "speaker encoder used to steal the identity (default first)");

  auto *verify = app->add_subcommand("verify", "verify a WAV against an enrolled speaker profile");
  verify->add_option("--profile", inv.profile, "enrolled speaker id")->required();
  verify->add_option("--in", inv.input, "probe WAV")->required();
  verify->add_option("--encoder", inv.encoder, "verifier encoder (default first)");

  auto *evaluate = app->add_subcommand("evaluate", "run the protect/enhance/clone/verify campaign and write a report");
  evaluate->add_option("--out", inv.out_dir, "report directory (overrides paths.report_dir)");

  auto *calibrate = app->add_subcommand("calibrate", "re-enroll profiles and recalibrate verifier thresholds");
  calibrate->add_option("--out", inv.out_dir, "model directory (overrides paths.model_dir)");
  return app;
}

/// File, then --set overrides, then dedicated flags.
inline RunConfig ResolveConfig(const Invocation &inv, const std::string &command) {
  RunConfig c = inv.config_path.empty() ? RunConfig{} : LoadRunConfig(inv.config_path);
  for (const auto &o : inv.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) Fail(ErrorKind::kConfig, "--set expects KEY=VALUE, got '" + o + "'");
    SetConfigValue(c, Trim(o.substr(0, eq)), Trim(o.substr(eq + 1)));
  }
  if (inv.seed) c.seed = *inv.seed;
  if (inv.workers) c.workers = *inv.workers;
  if (inv.trace_dir) c.trace_dir = *inv.trace_dir;
  if (!inv.out_dir.empty()) {
    if (command == "gen-corpus") c.corpus_dir = inv.out_dir;
    if (command == "train" || command == "calibrate") c.model_dir = inv.out_dir;
    if (command == "evaluate") c.report_dir = inv.out_dir;
  }
  ValidateRunConfig(c);
  return c;
}

inline void Dispatch(const std::string &cmd, const Invocation &inv, const RunConfig &c, std::ostream &out) {
  if (cmd == "gen-corpus") return CmdGenCorpus(c, out);
  if (cmd == "train") return CmdTrain(c, out);
  if (cmd == "calibrate") return CmdCalibrate(c, out);
  if (cmd == "protect") return CmdProtect(c, inv.protect, out);
  if (cmd == "enhance") return CmdEnhance(c, inv.input, inv.output, inv.method, out);
  if (cmd == "synthesize") return CmdSynthesize(c, inv.content, inv.stolen_from, inv.output, inv.encoder, out);
  if (cmd == "verify") {
    CmdVerify(c, inv.profile, inv.input, inv.encoder, out);
    return;
  }
  if (cmd == "evaluate") {
    CmdEvaluate(c, out);
    return;
  }
  Fail(ErrorKind::kConfig, "unknown subcommand '" + cmd + "'");
}

/// Full command-line entry point; returns the process exit code.
inline int RunCli(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  Invocation inv;
  auto app = BuildApp(inv);
  try {
    app->parse(argc, argv);
  } catch (const CLI::CallForHelp &) {
    out << app->help();  // delegates to the selected subcommand
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app->help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "error: config: " << e.what() << "\n";
    return kExitConfig;
  }
  const std::string cmd = app->get_subcommands().front()->get_name();
  try {
    const RunConfig c = ResolveConfig(inv, cmd);
    out << "seed " << c.seed << "\n";
    Dispatch(cmd, inv, c, out);
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const std::exception &e) {
    err << "error: internal: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace rovo::cli
