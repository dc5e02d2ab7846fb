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

// Helpers shared by the test binaries.

#pragma once

#include "rovo/common.hpp"
#include "rovo/signal/waveform.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

namespace rovo::testing {

/// Runs `stmt` and expects a rovo::Error of the given kind.
#define EXPECT_ROVO_ERROR(stmt, expected_kind)                                       \
  do {                                                                               \
    bool thrown_ = false;                                                            \
    try {                                                                            \
      stmt;                                                                          \
    } catch (const ::rovo::Error &e_) {                                              \
      thrown_ = true;                                                                \
      EXPECT_EQ(e_.kind(), expected_kind) << e_.what();                              \
    }                                                                                \
    EXPECT_TRUE(thrown_) << "expected rovo::Error from " #stmt;                      \
  } while (0)

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "rovo-" + tag;
    if (info) name += std::string("-") + info->test_suite_name() + "-" + info->name();
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  std::string file(const std::string &name) const { return (path_ / name).string(); }
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Seeded white noise and a pure sine, the shared synthetic inputs.
inline signal::Waveform Noise(std::uint64_t seed, std::size_t n, double scale = 0.3) {
  Rng rng(seed);
  signal::Waveform w;
  w.samples.resize(n);
  for (auto &s : w.samples) s = scale * rng.Normal();
  return w;
}

inline signal::Waveform Sine(double hz, std::size_t n, double amp = 0.5, int sr = 16000) {
  signal::Waveform w;
  w.sample_rate = sr;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / sr);
  return w;
}

inline void Le(std::string &out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

/// Hand-assembled RIFF/WAVE bytes, independent of the library writer.
inline std::string RawWav(int format_tag, int channels, int sample_rate, int bits, const std::string &payload) {
  std::string out = "RIFF";
  Le(out, 36 + payload.size(), 4);
  out += "WAVEfmt ";
  Le(out, 16, 4);
  Le(out, format_tag, 2);
  Le(out, channels, 2);
  Le(out, sample_rate, 4);
  Le(out, static_cast<std::uint64_t>(sample_rate) * channels * bits / 8, 4);
  Le(out, channels * bits / 8, 2);
  Le(out, bits, 2);
  out += "data";
  Le(out, payload.size(), 4);
  return out + payload;
}

inline void WriteBytes(const std::string &path, const std::string &bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string ReadBytes(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace rovo::testing
