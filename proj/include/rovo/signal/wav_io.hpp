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

// RIFF/WAVE reading and writing. Reads 16-bit PCM and 32-bit IEEE float with
// any channel count (downmixed to mono); always writes 16-bit mono.

#pragma once

#include "rovo/signal/waveform.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace rovo::signal {

enum class SampleFormat { kPcm16, kFloat32 };

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  SampleFormat format = SampleFormat::kPcm16;
  std::size_t frames = 0;  // samples per channel

  double duration_seconds() const { return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0.0; }
};

namespace detail {

inline std::uint32_t ReadLe32(const unsigned char *p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t ReadLe16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void PutLe32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void PutLe16(std::string &out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

struct ParsedWav {
  WavInfo info;
  const unsigned char *data = nullptr;
  std::size_t data_bytes = 0;
};

inline ParsedWav ParseWav(const std::vector<unsigned char> &bytes, const std::string &path) {
  auto malformed = [&](const std::string &why) { Fail(ErrorKind::kMalformed, path + ": " + why); };
  if (bytes.size() < 12) malformed("truncated RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    malformed("not a RIFF/WAVE file");

  ParsedWav out;
  bool have_fmt = false;
  int bits = 0;
  std::uint16_t tag = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    const std::uint32_t size = ReadLe32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) malformed("truncated fmt chunk");
      const unsigned char *f = bytes.data() + body;
      tag = ReadLe16(f);
      out.info.channels = ReadLe16(f + 2);
      out.info.sample_rate = static_cast<int>(ReadLe32(f + 4));
      bits = ReadLe16(f + 14);
      if (tag == 0xFFFE) {  // WAVE_FORMAT_EXTENSIBLE: sub-format GUID starts with the real tag
        if (size < 40) malformed("truncated extensible fmt chunk");
        tag = ReadLe16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) malformed("data chunk before fmt chunk");
      out.data = bytes.data() + body;
      // Tolerate writers that leave the size field oversized (streamed output).
      out.data_bytes = std::min<std::size_t>(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) malformed("missing fmt chunk");
  if (out.data == nullptr) malformed("missing data chunk");
  if (out.info.channels < 1) malformed("channel count is zero");
  if (out.info.sample_rate <= 0) malformed("sample rate is zero");

  if (tag == 1 && bits == 16) {
    out.info.format = SampleFormat::kPcm16;
  } else if (tag == 3 && bits == 32) {
    out.info.format = SampleFormat::kFloat32;
  } else {
    Fail(ErrorKind::kUnsupported, path + ": encoding tag " + std::to_string(tag) + " with " +
                                      std::to_string(bits) + " bits is not supported");
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(out.info.channels) * (bits / 8);
  out.info.frames = out.data_bytes / frame_bytes;
  return out;
}

inline std::vector<unsigned char> Slurp(const std::string &path, std::size_t limit = 0) {
  if (!std::filesystem::exists(path)) Fail(ErrorKind::kMissingFile, path + ": no such file");
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, path + ": cannot open for reading");
  std::vector<unsigned char> bytes;
  if (limit == 0) {
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    bytes.resize(limit);
    in.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(limit));
    bytes.resize(static_cast<std::size_t>(in.gcount()));
  }
  return bytes;
}

}  // namespace detail

/// Header-only probe (format, rate, length) without decoding samples.
inline WavInfo ProbeWav(const std::string &path) {
  const auto bytes = detail::Slurp(path);
  return detail::ParseWav(bytes, path).info;
}

/// Reads a WAV file, averaging all channels to mono and scaling to [-1, 1].
inline Waveform ReadWav(const std::string &path) {
  const auto bytes = detail::Slurp(path);
  const detail::ParsedWav parsed = detail::ParseWav(bytes, path);
  const int ch = parsed.info.channels;
  Waveform w;
  w.sample_rate = parsed.info.sample_rate;
  w.samples.assign(parsed.info.frames, 0.0);
  const unsigned char *p = parsed.data;
  for (std::size_t i = 0; i < parsed.info.frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < ch; ++c) {
      if (parsed.info.format == SampleFormat::kPcm16) {
        acc += static_cast<std::int16_t>(detail::ReadLe16(p)) / 32768.0;
        p += 2;
      } else {
        const std::uint32_t bits = detail::ReadLe32(p);
        float f;
        std::memcpy(&f, &bits, sizeof f);
        acc += static_cast<double>(f);
        p += 4;
      }
    }
    w.samples[i] = acc / ch;
  }
  return w;
}

struct WavWriteReport {
  std::size_t clipped_samples = 0;  // samples outside [-1, 1] that were clamped
};

inline std::int16_t QuantizePcm16(double x) {
  const double scaled = std::nearbyint(std::clamp(x, -1.0, 1.0) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

/// Serializes `w` as 16-bit mono PCM. Bytes depend only on the samples and rate.
inline std::string EncodeWav16(const Waveform &w, WavWriteReport *report = nullptr) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::PutLe32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::PutLe32(out, 16);
  detail::PutLe16(out, 1);
  detail::PutLe16(out, 1);
  detail::PutLe32(out, static_cast<std::uint32_t>(w.sample_rate));
  detail::PutLe32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  detail::PutLe16(out, 2);
  detail::PutLe16(out, 16);
  out += "data";
  detail::PutLe32(out, data_bytes);
  std::size_t clipped = 0;
  for (double s : w.samples) {
    if (s > 1.0 || s < -1.0) ++clipped;
    detail::PutLe16(out, static_cast<std::uint16_t>(QuantizePcm16(s)));
  }
  if (report) report->clipped_samples = clipped;
  return out;
}

inline WavWriteReport WriteWav(const std::string &path, const Waveform &w) {
  ValidateWaveform(w, "write_wav");
  WavWriteReport report;
  const std::string bytes = EncodeWav16(w, &report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, path + ": write failed");
  return report;
}

/// Writes 32-bit float mono; used by tests to exercise the float reader.
inline void WriteWavFloat32(const std::string &path, const Waveform &w, int channels = 1) {
  const std::size_t n = w.samples.size();
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(n * 4 * channels);
  std::string out = "RIFF";
  detail::PutLe32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::PutLe32(out, 16);
  detail::PutLe16(out, 3);
  detail::PutLe16(out, static_cast<std::uint16_t>(channels));
  detail::PutLe32(out, static_cast<std::uint32_t>(w.sample_rate));
  detail::PutLe32(out, static_cast<std::uint32_t>(w.sample_rate * 4 * channels));
  detail::PutLe16(out, static_cast<std::uint16_t>(4 * channels));
  detail::PutLe16(out, 32);
  out += "data";
  detail::PutLe32(out, data_bytes);
  for (double s : w.samples) {
    const float f = static_cast<float>(s);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    for (int c = 0; c < channels; ++c) detail::PutLe32(out, bits);
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) Fail(ErrorKind::kIo, path + ": cannot open for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace rovo::signal
