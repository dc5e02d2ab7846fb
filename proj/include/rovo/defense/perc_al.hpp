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

// Alternating identity/quality loss controller and the shared optimization
// record types.

#pragma once

#include "rovo/defense/losses.hpp"
#include "rovo/kv.hpp"

#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rovo::defense {

enum class Phase { kIdentity, kQuality, kDone };

inline const char *PhaseName(Phase p) {
  switch (p) {
    case Phase::kIdentity: return "identity";
    case Phase::kQuality: return "quality";
    case Phase::kDone: return "done";
  }
  return "unknown";
}

struct PercAlConfig {
  double tau_identity = 1.0;
  double tau_snr_db = 15.0;
  double alpha = 1e-2;
  double epsilon_init = 5e-2;
  double epsilon_stab = 1e-8;
  int max_iters = 500;
  std::optional<double> budget_rho;  // L-infinity radius around e_orig
  DistanceKind distance = DistanceKind::kL2;
};

inline void ValidatePercAlConfig(const PercAlConfig &c) {
  if (!(c.alpha > 0.0)) Fail(ErrorKind::kConfig, "defense: alpha must be > 0");
  if (c.max_iters < 1) Fail(ErrorKind::kConfig, "defense: max_iters must be >= 1");
  if (!(c.tau_identity > 0.0)) Fail(ErrorKind::kConfig, "defense: tau_identity must be > 0");
  if (!(c.epsilon_stab > 0.0)) Fail(ErrorKind::kConfig, "defense: epsilon_stab must be > 0");
  if (!(c.epsilon_init >= 0.0)) Fail(ErrorKind::kConfig, "defense: epsilon_init must be >= 0");
  if (std::isnan(c.tau_snr_db)) Fail(ErrorKind::kConfig, "defense: tau_snr_db must be a number");
  if (c.budget_rho && !(*c.budget_rho > 0.0)) Fail(ErrorKind::kConfig, "defense: budget_rho must be > 0 when enabled");
}

/// Identity while the target is not reached; then quality until the SNR is
/// back at or above its threshold; then done.
inline Phase PercAlSelect(double l_identity, double snr_db, const PercAlConfig &c) {
  if (l_identity > c.tau_identity) return Phase::kIdentity;
  if (snr_db < c.tau_snr_db) return Phase::kQuality;
  return Phase::kDone;
}

struct PercAlState {
  Phase phase = Phase::kIdentity;
  int iteration = 0;
  double l_identity = std::numeric_limits<double>::infinity();
  double snr_db = 0.0;
};

/// One evaluated state. Row k describes the variable after k update steps;
/// `phase` is the loss selected there and `grad_norm` the norm of its gradient.
struct TraceRow {
  int iteration = 0;
  Phase phase = Phase::kIdentity;
  double l_identity = 0.0;
  double snr_db = 0.0;
  double grad_norm = 0.0;
};

enum class Termination { kConverged, kBudgetExhausted };

inline const char *TerminationName(Termination t) {
  return t == Termination::kConverged ? "converged" : "iteration-budget-exhausted";
}

struct DefenseResult {
  signal::Waveform protected_audio;
  Matrix e_adv;  // final optimization variable (codec embeddings or STFT magnitudes)
  std::vector<TraceRow> trace;
  Termination termination = Termination::kBudgetExhausted;
  int identity_reentries = 0;  // quality -> identity switches

  const TraceRow &final_row() const { return trace.back(); }
  int steps() const { return static_cast<int>(trace.size()) - 1; }
};

/// Tracks phase switches; counts re-entries into the identity phase.
inline int CountReentries(const std::vector<TraceRow> &trace) {
  int n = 0;
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i - 1].phase == Phase::kQuality && trace[i].phase == Phase::kIdentity) ++n;
  return n;
}

inline std::string TraceCsv(const std::vector<TraceRow> &trace) {
  std::string out = "iteration,phase,l_identity,snr_db,grad_norm\n";
  for (const auto &r : trace) {
    out += std::to_string(r.iteration) + "," + PhaseName(r.phase) + "," + FormatDouble(r.l_identity) + "," +
           FormatDouble(r.snr_db) + "," + FormatDouble(r.grad_norm) + "\n";
  }
  return out;
}

inline void WriteTrace(const std::string &path, const std::vector<TraceRow> &trace) {
  std::ofstream f(path, std::ios::binary);
  if (!f) Fail(ErrorKind::kIo, "cannot write trace '" + path + "'");
  f << TraceCsv(trace);
  if (!f) Fail(ErrorKind::kIo, "short write to trace '" + path + "'");
}

/// Shared signed-gradient loop. `evaluate(x, g_id, g_snr)` returns
/// {L_identity, SNR_dB} and stores dL_identity/dx and dSNR/dx. Identity steps
/// descend, quality steps ascend; `project(x)` runs after every step.
template <class Evaluate, class Project>
std::vector<TraceRow> RunPercAl(Matrix &x, const PercAlConfig &c, Evaluate &&evaluate, Project &&project,
                                Termination *termination) {
  std::vector<TraceRow> trace;
  for (int k = 0;; ++k) {
    Matrix g_id = Matrix::Zero(x.rows(), x.cols()), g_snr;
    const auto [l_id, snr] = evaluate(x, &g_id, &g_snr);
    if (!std::isfinite(l_id) || !std::isfinite(snr))
      Fail(ErrorKind::kNumerical, "defense: non-finite loss at iteration " + std::to_string(k));
    TraceRow row{k, PercAlSelect(l_id, snr, c), l_id, snr, 0.0};
    if (row.phase == Phase::kDone) {
      trace.push_back(row);
      *termination = Termination::kConverged;
      return trace;
    }
    const Matrix &g = row.phase == Phase::kIdentity ? g_id : g_snr;
    row.grad_norm = g.norm();
    trace.push_back(row);
    if (k == c.max_iters) break;
    if (row.phase == Phase::kIdentity) {
      x -= c.alpha * g.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
    } else {
      x += c.alpha * g.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
    }
    project(x);
  }
  *termination = Termination::kBudgetExhausted;
  return trace;
}

}  // namespace rovo::defense
