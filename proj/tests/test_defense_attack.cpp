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

#include "test_util.hpp"
#include "world.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rovo {
namespace {

using defense::Phase;
using defense::PercAlConfig;
using rovo::testing::DefaultWorld;
using rovo::testing::Noise;
using rovo::testing::Sine;
using signal::Waveform;

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix RandomMatrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.Normal();
  return m;
}

double MagnitudeCosine(const Waveform &a, const Waveform &b) {
  const std::size_t n = std::min(a.size(), b.size());
  const Waveform ta{{a.samples.begin(), a.samples.begin() + static_cast<std::ptrdiff_t>(n)}, a.sample_rate};
  const Waveform tb{{b.samples.begin(), b.samples.begin() + static_cast<std::ptrdiff_t>(n)}, b.sample_rate};
  const Matrix ma = signal::Stft(ta, {}).magnitude(), mb = signal::Stft(tb, {}).magnitude();
  return ma.cwiseProduct(mb).sum() / (ma.norm() * mb.norm());
}

double SampleSnr(const Waveform &clean, const Waveform &test) {
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    s += clean.samples[i] * clean.samples[i];
    n += (test.samples[i] - clean.samples[i]) * (test.samples[i] - clean.samples[i]);
  }
  return 10.0 * std::log10(s / n);
}

const Waveform &FirstTestUtterance() {
  const auto &w = DefaultWorld();
  return w.Audio(w.Split(corpus::kSplitTest).front()->id);
}

defense::EncoderList AllEncoders() {
  defense::EncoderList out;
  for (const auto &e : DefaultWorld().models.encoders) out.push_back(&e);
  return out;
}

std::vector<speaker::SpeakerEmbedding> ProfileTargets(const std::string &speaker) {
  const auto &b = DefaultWorld().models;
  std::vector<speaker::SpeakerEmbedding> out;
  for (std::size_t k = 0; k < b.encoders.size(); ++k) {
    const auto &p = b.Profile(k, speaker);
    out.push_back({p.embedding, p.encoder_id});
  }
  return out;
}

// ---- losses

TEST(SnrLoss, UnitNormIdenticalGivesEightyDecibels) {
  Matrix e(1, 4);
  e << 0.5, -0.5, 0.5, 0.5;
  EXPECT_NEAR(defense::SnrLoss(e, e, 1e-8), 80.0, 1e-9);
}

TEST(SnrLoss, EqualEnergyPerturbationIsNearZero) {
  Matrix orig(1, 2), pert(1, 2);
  orig << 1.0, 0.0;
  pert << 1.0, 1.0;
  // 10 log10(1 / (1 + 1e-8)) = -4.3429e-8 dB.
  EXPECT_NEAR(defense::SnrLoss(orig, pert, 1e-8), -10.0 * std::log10(1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(defense::SnrLoss(orig, pert, 1e-8), -4.3429e-8, 1e-12);
}

TEST(SnrLoss, MatchesDirectNormComputation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix a = RandomMatrix(seed, 7, 5), b = RandomMatrix(seed + 100, 7, 5);
    double num = 0.0, den = 1e-8;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        num += a(i, j) * a(i, j);
        den += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
      }
    EXPECT_NEAR(defense::SnrLoss(a, b, 1e-8), 10.0 * std::log10(num / den), 1e-10);
  }
}

TEST(SnrLoss, IdenticalInputsDependOnlyOnEnergy) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix e = RandomMatrix(seed, 3, 4, 0.1 + static_cast<double>(seed));
    for (double eps : {1e-8, 1e-3, 1.0})
      EXPECT_DOUBLE_EQ(defense::SnrLoss(e, e, eps), 10.0 * std::log10(e.squaredNorm() / eps));
  }
}

TEST(SnrLoss, GradientMatchesFiniteDifferences) {
  const Matrix a = RandomMatrix(1, 4, 3), b = RandomMatrix(2, 4, 3);
  Matrix g;
  defense::SnrLoss(a, b, 1e-8, &g);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    Matrix p = b, m = b;
    p.data()[i] += h;
    m.data()[i] -= h;
    const double fd = (defense::SnrLoss(a, p, 1e-8) - defense::SnrLoss(a, m, 1e-8)) / (2 * h);
    EXPECT_NEAR(g.data()[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(SnrLoss, Preconditions) {
  EXPECT_ROVO_ERROR(defense::SnrLoss(Matrix::Zero(2, 2), Matrix::Ones(2, 2), 1e-8), ErrorKind::kPrecondition);
  EXPECT_ROVO_ERROR(defense::SnrLoss(Matrix::Ones(2, 2), Matrix::Ones(2, 3), 1e-8), ErrorKind::kPrecondition);
}

TEST(EmbeddingDistance, UnitSphereGeometry) {
  const Vector a = Vector::Unit(4, 0), b = Vector::Unit(4, 2);
  EXPECT_NEAR(defense::EmbeddingDistance(a, b, defense::DistanceKind::kL2), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(defense::EmbeddingDistance(a, b, defense::DistanceKind::kCosine), 1.0, 1e-15);
  EXPECT_EQ(defense::EmbeddingDistance(a, a, defense::DistanceKind::kL2), 0.0);
  EXPECT_NEAR(defense::EmbeddingDistance(a, a, defense::DistanceKind::kCosine), 0.0, 1e-15);
  EXPECT_ROVO_ERROR(defense::EmbeddingDistance(a, Vector::Zero(3), defense::DistanceKind::kL2), ErrorKind::kPrecondition);
}

TEST(IdentityLoss, ZeroForIdenticalEmbeddings) {
  const auto &b = DefaultWorld().models;
  const codec::EmbeddingSeq e = b.codec.Encode(FirstTestUtterance());
  for (const auto &enc : b.encoders)
    EXPECT_EQ(defense::IdentityLoss(b.codec, enc, e.values, e, defense::DistanceKind::kL2), 0.0);
}

TEST(IdentityLoss, MatchesForwardRecomputation) {
  const auto &w = DefaultWorld();
  const auto &b = w.models;
  const auto tests = w.Split(corpus::kSplitTest);
  for (std::size_t i = 0; i + 1 < 6; ++i) {
    const Matrix ep = b.codec.Encode(w.Audio(tests[i]->id)).values;
    const Matrix et = b.codec.Encode(w.Audio(tests[i + 1]->id)).values;
    for (const auto &enc : b.encoders) {
      const Vector gp = enc.EmbedMel(b.codec.DecodeFeatures(ep).values).values;
      const Vector gt = enc.EmbedMel(b.codec.DecodeFeatures(et).values).values;
      codec::EmbeddingSeq target;
      target.values = et;
      EXPECT_NEAR(defense::IdentityLoss(b.codec, enc, ep, target, defense::DistanceKind::kL2),
                  (gp - gt).norm(), 1e-12);
      EXPECT_NEAR(defense::IdentityLoss(b.codec, enc, ep, target, defense::DistanceKind::kCosine),
                  1.0 - gp.dot(gt) / (gp.norm() * gt.norm()), 1e-12);
    }
  }
}

TEST(IdentityLoss, RejectsForeignTargetAndWrongDim) {
  const auto &b = DefaultWorld().models;
  const Matrix e = b.codec.Encode(FirstTestUtterance()).values;
  const speaker::SpeakerEmbedding foreign = b.encoders[1].Embed(FirstTestUtterance());
  EXPECT_ROVO_ERROR(defense::IdentityLoss(b.codec, b.encoders[0], e, foreign, defense::DistanceKind::kL2),
                    ErrorKind::kPrecondition);
  const speaker::SpeakerEmbedding own = b.encoders[0].Embed(FirstTestUtterance());
  EXPECT_ROVO_ERROR(defense::IdentityLoss(b.codec, b.encoders[0], Matrix::Zero(3, b.codec.dim() + 1), own,
                                          defense::DistanceKind::kL2),
                    ErrorKind::kPrecondition);
}

TEST(EnsembleLoss, SingleEncoderEqualsIdentityLoss) {
  const auto &b = DefaultWorld().models;
  const Matrix e = b.codec.Encode(FirstTestUtterance()).values;
  const auto targets = ProfileTargets(DefaultWorld().manifest.records.back().speaker);
  const double single = defense::IdentityLoss(b.codec, b.encoders[0], e, targets[0], defense::DistanceKind::kL2);
  EXPECT_EQ(defense::EnsembleIdentityLoss(b.codec, {&b.encoders[0]}, e, {targets[0]}, defense::DistanceKind::kL2), single);
}

TEST(EnsembleLoss, MeanOfTwoAndFourIsThree) {
  const auto &b = DefaultWorld().models;
  const Matrix e = b.codec.Encode(FirstTestUtterance()).values;
  // Targets offset from G(e) by vectors of norm 2 and 4.
  std::vector<speaker::SpeakerEmbedding> targets;
  for (std::size_t k = 0; k < 2; ++k) {
    speaker::SpeakerEmbedding g = defense::EmbedCodecFeatures(b.codec, b.encoders[k], e);
    g.values[0] += 2.0 * static_cast<double>(k + 1);
    targets.push_back(g);
  }
  EXPECT_NEAR(defense::EnsembleIdentityLoss(b.codec, AllEncoders(), e, targets, defense::DistanceKind::kL2), 3.0, 1e-12);
}

TEST(EnsembleLoss, ThreeEncodersMatchSumOverThree) {
  const auto &w = DefaultWorld();
  const auto &b = w.models;
  const Matrix e = b.codec.Encode(FirstTestUtterance()).values;
  const defense::EncoderList encs{&b.encoders[0], &b.encoders[1], &b.encoders[0]};
  const auto tests = w.Split(corpus::kSplitTest);
  const std::vector<speaker::SpeakerEmbedding> targets{b.encoders[0].Embed(w.Audio(tests[3]->id)),
                                                       b.encoders[1].Embed(w.Audio(tests[5]->id)),
                                                       b.encoders[0].Embed(w.Audio(tests[8]->id))};
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    sum += (defense::EmbedCodecFeatures(b.codec, *encs[i], e).values - targets[i].values).norm();
  EXPECT_NEAR(defense::EnsembleIdentityLoss(b.codec, encs, e, targets, defense::DistanceKind::kL2), sum / 3.0, 1e-12);
}

TEST(EnsembleLoss, GradientMatchesFiniteDifferences) {
  const auto &b = DefaultWorld().models;
  const Matrix e = b.codec.Encode(FirstTestUtterance()).values.topRows(20);
  const auto targets = ProfileTargets(DefaultWorld().manifest.records.back().speaker);
  for (auto kind : {defense::DistanceKind::kL2, defense::DistanceKind::kCosine}) {
    Matrix g = Matrix::Zero(e.rows(), e.cols());
    defense::EnsembleIdentityLoss(b.codec, AllEncoders(), e, targets, kind, &g);
    Rng rng(5);
    const double h = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index i = static_cast<Eigen::Index>(rng.Index(static_cast<std::size_t>(e.size())));
      Matrix p = e, m = e;
      p.data()[i] += h;
      m.data()[i] -= h;
      const double fd = (defense::EnsembleIdentityLoss(b.codec, AllEncoders(), p, targets, kind) -
                         defense::EnsembleIdentityLoss(b.codec, AllEncoders(), m, targets, kind)) /
                        (2 * h);
      EXPECT_NEAR(g.data()[i], fd, 1e-4 * std::max(1e-3, std::abs(fd)) + 1e-9);
    }
  }
}

TEST(EnsembleLoss, EmptyEncoderListRejected) {
  const auto &b = DefaultWorld().models;
  EXPECT_ROVO_ERROR(defense::EnsembleIdentityLoss(b.codec, {}, Matrix::Zero(3, b.codec.dim()), {},
                                                  defense::DistanceKind::kL2),
                    ErrorKind::kPrecondition);
}

// ---- PerC-AL controller

TEST(PercAlSelect, DocumentedExamples) {
  PercAlConfig c;
  c.tau_identity = 1.0;
  c.tau_snr_db = 20.0;
  EXPECT_EQ(defense::PercAlSelect(5.0, 30.0, c), Phase::kIdentity);
  EXPECT_EQ(defense::PercAlSelect(0.5, 10.0, c), Phase::kQuality);
  EXPECT_EQ(defense::PercAlSelect(0.5, 25.0, c), Phase::kDone);
}

TEST(PercAlSelect, ExhaustiveThresholdGrid) {
  PercAlConfig c;
  c.tau_identity = 1.0;
  c.tau_snr_db = 15.0;
  const double l[3] = {0.5, 1.0, 1.5};     // below, at, above tau_identity
  const double s[3] = {10.0, 15.0, 20.0};  // below, at, above tau_snr_db
  const Phase expected[3][3] = {{Phase::kQuality, Phase::kDone, Phase::kDone},
                                {Phase::kQuality, Phase::kDone, Phase::kDone},
                                {Phase::kIdentity, Phase::kIdentity, Phase::kIdentity}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(defense::PercAlSelect(l[i], s[j], c), expected[i][j]) << i << "," << j;
}

TEST(PercAlConfig, ValidationRejectsBadValues) {
  auto bad = [](auto mutate) {
    PercAlConfig c;
    mutate(c);
    EXPECT_ROVO_ERROR(defense::ValidatePercAlConfig(c), ErrorKind::kConfig);
  };
  bad([](PercAlConfig &c) { c.alpha = 0.0; });
  bad([](PercAlConfig &c) { c.max_iters = 0; });
  bad([](PercAlConfig &c) { c.tau_identity = 0.0; });
  bad([](PercAlConfig &c) { c.epsilon_stab = 0.0; });
  bad([](PercAlConfig &c) { c.budget_rho = 0.0; });
  PercAlConfig ok;
  ok.tau_identity = kInf;
  EXPECT_NO_THROW(defense::ValidatePercAlConfig(ok));
}

// Scripted losses with unit gradients, independent of x.
struct Script {
  std::vector<double> l, snr;
  std::vector<Matrix> seen;
  std::pair<double, double> operator()(const Matrix &x, Matrix *g_id, Matrix *g_snr) {
    const std::size_t k = std::min(seen.size(), l.size() - 1);
    seen.push_back(x);
    *g_id = Matrix::Ones(x.rows(), x.cols());
    *g_snr = Matrix::Ones(x.rows(), x.cols());
    return {l[k], snr[k]};
  }
};

TEST(RunPercAl, PhaseSequenceStepDirectionsAndReentry) {
  PercAlConfig c;
  c.tau_identity = 1.0;
  c.tau_snr_db = 15.0;
  c.alpha = 0.25;
  Script s{{2, 0.5, 0.5, 2, 0.5, 0.5}, {10, 10, 10, 10, 10, 20}, {}};
  Matrix x = Matrix::Zero(2, 2);
  int projections = 0;
  defense::Termination term{};
  const auto trace = defense::RunPercAl(x, c, s, [&](Matrix &) { ++projections; }, &term);
  ASSERT_EQ(trace.size(), 6u);
  const Phase want[6] = {Phase::kIdentity, Phase::kQuality, Phase::kQuality,
                         Phase::kIdentity, Phase::kQuality, Phase::kDone};
  for (int k = 0; k < 6; ++k) {
    EXPECT_EQ(trace[k].phase, want[k]) << k;
    EXPECT_EQ(trace[k].iteration, k);
  }
  EXPECT_EQ(term, defense::Termination::kConverged);
  EXPECT_EQ(defense::CountReentries(trace), 1);
  EXPECT_EQ(projections, 5);
  // Identity descends, quality ascends: -a, +a, +a, -a, +a.
  const double path[6] = {0.0, -0.25, 0.0, 0.25, 0.0, 0.25};
  for (int k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(s.seen[k](0, 0), path[k]) << k;
  EXPECT_DOUBLE_EQ(x(1, 1), 0.25);
}

TEST(RunPercAl, BudgetExhaustionAndTraceLength) {
  PercAlConfig c;
  c.max_iters = 3;
  Script s{{2.0}, {10.0}, {}};
  Matrix x = Matrix::Zero(1, 1);
  defense::Termination term = defense::Termination::kConverged;
  const auto trace = defense::RunPercAl(x, c, s, [](Matrix &) {}, &term);
  EXPECT_EQ(term, defense::Termination::kBudgetExhausted);
  EXPECT_EQ(trace.size(), 4u);  // states after 0..3 steps
  EXPECT_DOUBLE_EQ(x(0, 0), -3.0 * c.alpha);
}

TEST(RunPercAl, NonFiniteLossReportsIteration) {
  PercAlConfig c;
  Script s{{2.0, 2.0, std::nan("")}, {10.0, 10.0, 10.0}, {}};
  Matrix x = Matrix::Zero(1, 1);
  defense::Termination term{};
  try {
    defense::RunPercAl(x, c, s, [](Matrix &) {}, &term);
    ADD_FAILURE() << "expected a numerical error";
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
    EXPECT_NE(std::string(e.what()).find("iteration 2"), std::string::npos) << e.what();
  }
}

TEST(RunPercAl, StepBoundHoldsWithoutProjection) {
  // A smooth objective: identity distance to a fixed point, so gradients vary.
  PercAlConfig c;
  c.tau_identity = 1e-9;
  c.alpha = 0.01;
  c.max_iters = 60;
  const Matrix target = RandomMatrix(7, 3, 4);
  const Matrix x0 = RandomMatrix(8, 3, 4);
  std::vector<Matrix> seen;
  auto eval = [&](const Matrix &x, Matrix *g_id, Matrix *g_snr) {
    seen.push_back(x);
    const double d = (x - target).norm();
    *g_id = (x - target) / std::max(d, 1e-300);
    const double snr = defense::SnrLoss(x0, x, c.epsilon_stab, g_snr);
    return std::pair<double, double>{d, snr};
  };
  Matrix x = x0;
  defense::Termination term{};
  defense::RunPercAl(x, c, eval, [](Matrix &) {}, &term);
  for (std::size_t k = 0; k < seen.size(); ++k)
    EXPECT_LE((seen[k] - x0).cwiseAbs().maxCoeff(), static_cast<double>(k) * c.alpha * (1 + 1e-12)) << k;
}

// ---- embedding-level PGD

TEST(PgdProtect, InfiniteIdentityThresholdSkipsIdentityPhase) {
  const auto &b = DefaultWorld().models;
  const Waveform &x = FirstTestUtterance();
  PercAlConfig c = defense::DefaultPercAlConfig({b.scales.embedding_rms, 1.0});
  c.tau_identity = kInf;
  const auto targets = ProfileTargets(DefaultWorld().manifest.records.back().speaker);
  const auto r = defense::PgdProtect(b.codec, AllEncoders(), x, targets, c, 11);
  for (const auto &row : r.trace) EXPECT_NE(row.phase, Phase::kIdentity);
  EXPECT_EQ(r.termination, defense::Termination::kConverged);
  EXPECT_EQ(r.steps(), 0);
  // Zero steps: the output decodes e_orig plus the initial noise alone.
  const Matrix e_orig = b.codec.Encode(x).values;
  const double noise_rms = (r.e_adv - e_orig).norm() / std::sqrt(static_cast<double>(e_orig.size()));
  EXPECT_NEAR(noise_rms, c.epsilon_init, 0.05 * c.epsilon_init);
  Waveform decoded = b.codec.Decode(r.e_adv);
  decoded.samples.resize(x.size(), 0.0);
  EXPECT_EQ(r.protected_audio.samples, decoded.samples);

  // Heavy initial noise: only quality steps run until the SNR recovers.
  c.epsilon_init = 0.5 * b.scales.embedding_rms;
  c.alpha = 0.01 * b.scales.embedding_rms;
  const auto q = defense::PgdProtect(b.codec, AllEncoders(), x, targets, c, 11);
  EXPECT_GT(q.steps(), 0);
  for (const auto &row : q.trace) EXPECT_NE(row.phase, Phase::kIdentity);
  EXPECT_EQ(q.termination, defense::Termination::kConverged);
  EXPECT_GE(q.final_row().snr_db, c.tau_snr_db);
}

TEST(PgdProtect, DeterministicInSeed) {
  const auto &b = DefaultWorld().models;
  const Waveform &x = FirstTestUtterance();
  PercAlConfig c = defense::DefaultPercAlConfig({b.scales.embedding_rms, 1.0});
  c.max_iters = 15;
  const auto targets = ProfileTargets(DefaultWorld().manifest.records.back().speaker);
  const auto r1 = defense::PgdProtect(b.codec, AllEncoders(), x, targets, c, 3);
  const auto r2 = defense::PgdProtect(b.codec, AllEncoders(), x, targets, c, 3);
  const auto r3 = defense::PgdProtect(b.codec, AllEncoders(), x, targets, c, 4);
  EXPECT_EQ(r1.e_adv, r2.e_adv);
  EXPECT_EQ(r1.protected_audio.samples, r2.protected_audio.samples);
  EXPECT_EQ(defense::TraceCsv(r1.trace), defense::TraceCsv(r2.trace));
  EXPECT_NE(r1.e_adv, r3.e_adv);
  EXPECT_EQ(r1.protected_audio.size(), x.size());
}

TEST(PgdProtect, BudgetProjectionBoundsPerturbation) {
  const auto &b = DefaultWorld().models;
  const Waveform &x = FirstTestUtterance();
  PercAlConfig c = defense::DefaultPercAlConfig({b.scales.embedding_rms, 1.0});
  c.tau_identity = 1e-6;
  c.max_iters = 20;
  c.budget_rho = 0.05 * b.scales.embedding_rms;
  const auto targets = ProfileTargets(DefaultWorld().manifest.records.back().speaker);
  const auto r = defense::PgdProtect(b.codec, AllEncoders(), x, targets, c, 9);
  const Matrix e_orig = b.codec.Encode(x).values;
  EXPECT_LE((r.e_adv - e_orig).cwiseAbs().maxCoeff(), *c.budget_rho * (1 + 1e-12));
  EXPECT_EQ(r.termination, defense::Termination::kBudgetExhausted);
  EXPECT_EQ(r.steps(), 20);
}

TEST(PgdProtect, DefaultRunsConvergeConsistently) {
  const auto &w = DefaultWorld();
  const auto &b = w.models;
  const auto tests = w.Split(corpus::kSplitTest);
  int reached = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    eval::ProtectRequest req;
    req.encoders = {0, 1};
    req.victim_speaker = tests[i * 3]->speaker;
    req.seed = 100 + i;
    const auto po = eval::Protect(b, w.Audio(tests[i * 3]->id), req);
    const auto &r = po.result;
    EXPECT_EQ(r.steps() + 1, static_cast<int>(r.trace.size()));
    EXPECT_LE(r.steps(), po.config.max_iters);
    EXPECT_EQ(r.identity_reentries, defense::CountReentries(r.trace));
    if (r.termination == defense::Termination::kConverged) {
      ++reached;
      EXPECT_LT(r.final_row().l_identity, po.config.tau_identity);
      EXPECT_GE(r.final_row().snr_db, po.config.tau_snr_db);
    }
  }
  EXPECT_GE(reached, 1);
}

TEST(PgdProtect, Preconditions) {
  const auto &b = DefaultWorld().models;
  PercAlConfig c;
  EXPECT_ROVO_ERROR(defense::PgdProtect(b.codec, {}, FirstTestUtterance(), {}, c, 1), ErrorKind::kPrecondition);
  EXPECT_ROVO_ERROR(defense::PgdProtect(b.codec, AllEncoders(), Sine(300, 100), ProfileTargets("spk00"), c, 1),
                    ErrorKind::kPrecondition);
  c.alpha = -1.0;
  EXPECT_ROVO_ERROR(defense::PgdProtect(b.codec, AllEncoders(), FirstTestUtterance(), ProfileTargets("spk00"), c, 1),
                    ErrorKind::kConfig);
}

// ---- signal-level baseline

TEST(SignalLevel, ZeroIterationsReproducesInput) {
  const Waveform &x = FirstTestUtterance();
  PercAlConfig c;
  c.tau_identity = kInf;
  c.epsilon_init = 0.0;
  const auto r = defense::SignalLevelProtect(AllEncoders(), x, ProfileTargets("spk00"), c, 1);
  EXPECT_EQ(r.steps(), 0);
  ASSERT_EQ(r.protected_audio.size(), x.size());
  EXPECT_LE((r.protected_audio.view() - x.view()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SignalLevel, DeterministicNonnegativeAndLengthPreserving) {
  const auto &b = DefaultWorld().models;
  const Waveform &x = FirstTestUtterance();
  const PercAlConfig c = [&] {
    PercAlConfig base = eval::DefenseConfigFor(b, {0, 1}, eval::DefenseSettings{}, eval::DefenseKind::kSignal);
    base.max_iters = 10;
    return base;
  }();
  const auto r1 = defense::SignalLevelProtect(AllEncoders(), x, ProfileTargets("spk03"), c, 5);
  const auto r2 = defense::SignalLevelProtect(AllEncoders(), x, ProfileTargets("spk03"), c, 5);
  EXPECT_EQ(r1.e_adv, r2.e_adv);
  EXPECT_EQ(r1.protected_audio.samples, r2.protected_audio.samples);
  EXPECT_GE(r1.e_adv.minCoeff(), 0.0);
  EXPECT_EQ(r1.protected_audio.size(), x.size());
  EXPECT_ROVO_ERROR(defense::SignalLevelProtect({}, x, {}, c, 5), ErrorKind::kPrecondition);
}

TEST(SignalLevel, MagnitudeGradientMatchesFiniteDifferences) {
  const auto &b = DefaultWorld().models;
  const Matrix mag = signal::Stft(FirstTestUtterance(), b.codec.frame_spec()).magnitude().topRows(12);
  const auto targets = ProfileTargets("spk05");
  for (std::size_t k = 0; k < b.encoders.size(); ++k) {
    Matrix g = Matrix::Zero(mag.rows(), mag.cols());
    defense::MagnitudeIdentityLoss(b.encoders[k], mag, targets[k], defense::DistanceKind::kL2, &g, 1.0);
    Rng rng(k);
    for (int trial = 0; trial < 15; ++trial) {
      const Eigen::Index i = static_cast<Eigen::Index>(rng.Index(static_cast<std::size_t>(mag.size())));
      const double h = 1e-6 * std::max(1.0, mag.data()[i]);
      Matrix p = mag, m = mag;
      p.data()[i] += h;
      m.data()[i] -= h;
      const double fd = (defense::MagnitudeIdentityLoss(b.encoders[k], p, targets[k], defense::DistanceKind::kL2, nullptr, 1.0) -
                         defense::MagnitudeIdentityLoss(b.encoders[k], m, targets[k], defense::DistanceKind::kL2, nullptr, 1.0)) /
                        (2 * h);
      EXPECT_NEAR(g.data()[i], fd, 1e-4 * std::max(1e-2, std::abs(fd))) << k << " " << i;
    }
  }
}

// ---- enhancement

attack::EnhanceConfig Method(attack::EnhanceMethod m) {
  attack::EnhanceConfig c;
  c.method = m;
  return c;
}

TEST(Enhance, CleanSineIsNearlyUntouched) {
  const Waveform x = Sine(440.0, 16000);
  EXPECT_GE(MagnitudeCosine(attack::Enhance(x, Method(attack::EnhanceMethod::kSpectralMasking)), x), 0.95);
}

TEST(Enhance, MaskingImprovesNoisySineSnr) {
  // The tone is gated like speech so the quietest frames hold noise only.
  Waveform clean = Sine(440.0, 16000, 0.5);
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (i < 3200 || i >= 12800) clean.samples[i] = 0.0;
  const double clean_rms = signal::Rms(clean);
  Waveform noisy = Noise(21, 16000, clean_rms);
  noisy.samples.resize(clean.size());
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy.samples[i] += clean.samples[i];
  const double before = SampleSnr(clean, noisy);
  EXPECT_NEAR(before, 0.0, 0.5);
  const Waveform y = attack::Enhance(noisy, Method(attack::EnhanceMethod::kSpectralMasking));
  EXPECT_GE(SampleSnr(clean, y) - before, 5.0);
}

TEST(Enhance, UnitKernelSmoothingIsIdentity) {
  attack::EnhanceConfig c = Method(attack::EnhanceMethod::kSmoothing);
  c.kernel_width = 1;
  const Waveform x = Noise(4, 5000);
  const Waveform y = attack::Enhance(x, c);
  ASSERT_EQ(y.size(), x.size());
  EXPECT_LE((y.view() - x.view()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Enhance, MaskingAndWienerRespectSpectralFloor) {
  const Matrix mag = RandomMatrix(12, 40, 33).cwiseAbs();
  std::vector<Eigen::Index> frames(40);
  for (Eigen::Index t = 0; t < 40; ++t) frames[t] = t;
  for (auto m : {attack::EnhanceMethod::kSpectralMasking, attack::EnhanceMethod::kWiener}) {
    const attack::EnhanceConfig c = Method(m);
    const Matrix out = attack::EnhanceMagnitude(mag, frames, c);
    EXPECT_TRUE((out.array() >= c.spectral_floor * mag.array() - 1e-15).all()) << attack::MethodName(m);
    EXPECT_TRUE((out.array() <= mag.array() + 1e-15).all()) << attack::MethodName(m);
  }
}

TEST(Enhance, MaskingMatchesSubtractionOracle) {
  const Matrix mag = RandomMatrix(13, 30, 9).cwiseAbs();
  std::vector<Eigen::Index> frames(30);
  for (Eigen::Index t = 0; t < 30; ++t) frames[t] = t;
  const attack::EnhanceConfig c = Method(attack::EnhanceMethod::kSpectralMasking);
  // Noise estimate: mean of the 3 lowest-energy frames (10% of 30).
  std::vector<std::pair<double, Eigen::Index>> e;
  for (Eigen::Index t = 0; t < 30; ++t) e.emplace_back(mag.row(t).squaredNorm(), t);
  std::sort(e.begin(), e.end());
  const Vector noise = (mag.row(e[0].second) + mag.row(e[1].second) + mag.row(e[2].second)).transpose() / 3.0;
  const Matrix out = attack::EnhanceMagnitude(mag, frames, c);
  for (Eigen::Index t = 0; t < 30; ++t)
    for (Eigen::Index k = 0; k < 9; ++k)
      EXPECT_DOUBLE_EQ(out(t, k), std::max(mag(t, k) - 2.0 * noise[k], 0.05 * mag(t, k)));
}

TEST(Enhance, MedianMatchesSortOracle) {
  const Matrix mag = RandomMatrix(14, 17, 4);
  for (int width : {3, 5}) {
    const Matrix out = attack::MedianOverTime(mag, width);
    for (Eigen::Index t = 0; t < mag.rows(); ++t)
      for (Eigen::Index k = 0; k < mag.cols(); ++k) {
        std::vector<double> v;
        for (Eigen::Index u = std::max<Eigen::Index>(0, t - width / 2); u <= std::min<Eigen::Index>(16, t + width / 2); ++u)
          v.push_back(mag(u, k));
        std::sort(v.begin(), v.end());
        const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
        EXPECT_DOUBLE_EQ(out(t, k), med);
      }
  }
}

TEST(Enhance, DeterministicAndLengthPreserving) {
  const Waveform x = Noise(9, 4321);
  for (auto m : {attack::EnhanceMethod::kSpectralMasking, attack::EnhanceMethod::kWiener, attack::EnhanceMethod::kSmoothing}) {
    const Waveform a = attack::Enhance(x, Method(m)), b = attack::Enhance(x, Method(m));
    EXPECT_EQ(a.size(), x.size());
    EXPECT_EQ(a.samples, b.samples);
  }
}

TEST(Enhance, Preconditions) {
  EXPECT_ROVO_ERROR(attack::Enhance(Noise(1, 100), Method(attack::EnhanceMethod::kWiener)), ErrorKind::kPrecondition);
  attack::EnhanceConfig c;
  c.kernel_width = 4;
  EXPECT_ROVO_ERROR(attack::Enhance(Noise(1, 4000), c), ErrorKind::kConfig);
  c = {};
  c.spectral_floor = 1.0;
  EXPECT_ROVO_ERROR(attack::Enhance(Noise(1, 4000), c), ErrorKind::kConfig);
  c = {};
  c.over_subtraction = 0.0;
  EXPECT_ROVO_ERROR(attack::Enhance(Noise(1, 4000), c), ErrorKind::kConfig);
  EXPECT_ROVO_ERROR(attack::ParseMethod("deepfilter"), ErrorKind::kConfig);
}

TEST(RemovalEfficacy, BoundaryCasesAndOracle) {
  const Waveform o = Noise(1, 3000), p = Noise(2, 3000), e = Noise(3, 2900);
  EXPECT_EQ(attack::RemovalEfficacy(o, p, o), 0.0);
  EXPECT_DOUBLE_EQ(attack::RemovalEfficacy(o, p, p), 1.0);
  auto mag = [](const Waveform &w) {
    return signal::Stft(Waveform{{w.samples.begin(), w.samples.begin() + 2900}, w.sample_rate}, {}).magnitude();
  };
  const double want = (mag(e) - mag(o)).norm() / (mag(p) - mag(o)).norm();
  EXPECT_NEAR(attack::RemovalEfficacy(o, p, e), want, 1e-12);
  EXPECT_ROVO_ERROR(attack::RemovalEfficacy(o, o, p), ErrorKind::kPrecondition);
  EXPECT_ROVO_ERROR(attack::RemovalEfficacy(o, p, Noise(4, 100)), ErrorKind::kPrecondition);
}

// ---- toy synthesizer

std::vector<attack::SpeakerUtterance> TrainUtterances() {
  const auto &w = DefaultWorld();
  std::vector<attack::SpeakerUtterance> out;
  for (const auto *r : w.Split(corpus::kSplitTrain)) out.push_back({r->speaker, &w.mels.at(r->id)});
  return out;
}

TEST(ToySynth, PredictsSpeakerMeanProfile) {
  const auto &w = DefaultWorld();
  const auto stats = attack::BandStatistics(TrainUtterances());
  for (std::size_t k = 0; k < w.models.synths.size(); ++k) {
    for (const auto *r : w.Split(corpus::kSplitTrain)) {
      const Vector pred = w.models.synths[k].PredictMeanProfile(w.models.encoders[k].Embed(w.mels.at(r->id)).values);
      const Vector &mean = stats.at(r->speaker).mean;
      EXPECT_LE((pred - mean).norm() / mean.norm(), 0.1) << r->id << " " << w.models.encoders[k].id();
    }
  }
}

TEST(ToySynth, TrainingIsDeterministic) {
  const auto &w = DefaultWorld();
  const attack::SynthTrainOptions o = cli::TrainConfigFor(w.config).synth;
  const auto a = attack::TrainToySynth(TrainUtterances(), w.models.encoders[0], o);
  const auto b = attack::TrainToySynth(TrainUtterances(), w.models.encoders[0], o);
  EXPECT_EQ(a.map().weight, b.map().weight);
  EXPECT_EQ(a.map().bias, b.map().bias);
  EXPECT_EQ(a.neutral_mean(), b.neutral_mean());
}

TEST(ToySynth, SingleSpeakerRejected) {
  const auto &w = DefaultWorld();
  std::vector<attack::SpeakerUtterance> one;
  for (const auto &u : TrainUtterances())
    if (u.speaker == TrainUtterances().front().speaker) one.push_back(u);
  EXPECT_ROVO_ERROR(attack::TrainToySynth(one, w.models.encoders[0], {}), ErrorKind::kPrecondition);
}

TEST(ToySynth, ZeroEmbeddingAppliesBiasOnly) {
  const auto &w = DefaultWorld();
  const auto &s = w.models.synths[0];
  const Vector zero = Vector::Zero(s.embedding_dim());
  EXPECT_EQ(s.PredictTransform(zero), s.map().bias);
  const Matrix &content = w.mels.at(w.manifest.records[0].id).values;
  const Matrix out = s.ConvertMel(content, {zero, s.encoder_id()});
  const int nb = s.mel_config().n_mels;
  for (Eigen::Index j = 0; j < nb; ++j) {
    const double mu = content.col(j).mean();
    const double sd = std::sqrt((content.col(j).array() - mu).square().mean() + 1e-8);
    for (Eigen::Index t = 0; t < content.rows(); t += 7) {
      const double neutral = (content(t, j) - mu) / sd * s.neutral_std()[j] + s.neutral_mean()[j];
      EXPECT_NEAR(out(t, j), s.map().bias[j] * neutral + s.map().bias[nb + j], 1e-9);
    }
  }
}

TEST(ToySynth, SynthesisDeterministicAndChecked) {
  const auto &w = DefaultWorld();
  const auto &s = w.models.synths[1];
  const Waveform &content = w.Audio(w.manifest.records[0].id);
  const auto stolen = w.models.encoders[1].Embed(FirstTestUtterance());
  EXPECT_EQ(s.Synthesize(content, stolen).samples, s.Synthesize(content, stolen).samples);
  EXPECT_ROVO_ERROR(s.Synthesize(Sine(200, 100), stolen), ErrorKind::kPrecondition);
  EXPECT_ROVO_ERROR(s.Synthesize(content, w.models.encoders[0].Embed(content)), ErrorKind::kPrecondition);
}

TEST(ToySynth, RawAttackIsAcceptedAsVictim) {
  const auto &w = DefaultWorld();
  const auto &b = w.models;
  const auto pool = eval::AttackerPool(w.manifest, w.mels, w.audio);
  const auto victims = eval::SelectVictims(w.manifest, 1);
  for (std::size_t k = 0; k < b.encoders.size(); ++k) {
    int accepted = 0;
    for (const auto *v : victims) {
      const auto clone = eval::CloneVoice(b, k, pool, w.Audio(v->id), v->speaker);
      accepted += speaker::Verify(b.Profile(k, v->speaker), b.encoders[k].Embed(clone.audio), b.verifiers[k]) ==
                  speaker::Verdict::kAccept;
    }
    EXPECT_GE(accepted, 0.7 * static_cast<double>(victims.size())) << b.encoders[k].id();
  }
}

}  // namespace
}  // namespace rovo
