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

// Log-magnitude spectrogram as a binary graymap (P5): width = frames,
// height = bins, low frequencies at the bottom.

#pragma once

#include "rovo/diffnet/serialize.hpp"
#include "rovo/signal/stft.hpp"

#include <string>

namespace rovo::eval {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;  // row-major, top row first

  unsigned char at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

inline GrayImage SpectrogramImage(const signal::Waveform &w, const signal::FrameSpec &spec = {}) {
  Require(w.size() >= static_cast<std::size_t>(spec.n_fft), "dump_spectrogram: input shorter than one frame");
  const Matrix db = (20.0 * signal::Stft(w, spec).magnitude().array().max(1e-10).log10()).matrix();
  const double lo = db.minCoeff(), hi = db.maxCoeff();
  GrayImage img;
  img.width = static_cast<int>(db.rows());
  img.height = static_cast<int>(db.cols());
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
  for (int y = 0; y < img.height; ++y) {
    const Eigen::Index bin = img.height - 1 - y;
    for (int x = 0; x < img.width; ++x) {
      const double v = hi > lo ? (db(x, bin) - lo) / (hi - lo) : 0.0;
      img.pixels[static_cast<std::size_t>(y) * img.width + x] = static_cast<unsigned char>(std::lround(255.0 * v));
    }
  }
  return img;
}

inline std::string EncodePgm(const GrayImage &img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

inline void DumpSpectrogram(const signal::Waveform &w, const std::string &path, const signal::FrameSpec &spec = {}) {
  diffnet::WriteTextFile(path, EncodePgm(SpectrogramImage(w, spec)));
}

}  // namespace rovo::eval
