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

// Parameter files.
//
//   magic "RVDN", u32 version, u32 entry count, then per entry:
//     u8 kind (0 network, 1 tensor), u32 name length, name bytes
//     network: u32 layer count, per layer u8 type id; affine layers add
//              u32 out, u32 in, f32[out*in] row-major weights, f32[out] bias
//     tensor:  u32 rows, u32 cols, f32[rows*cols] row-major
//
// All integers and floats little-endian. A sidecar "<file>.shapes" text file
// lists every entry and layer shape, one per line.

#pragma once

#include "rovo/diffnet/network.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

namespace rovo::diffnet {

constexpr std::uint32_t kParamFileVersion = 1;

struct ParamBundle {
  std::map<std::string, Network> networks;
  std::map<std::string, Matrix> tensors;

  const Network &network(const std::string &name) const {
    auto it = networks.find(name);
    if (it == networks.end()) Fail(ErrorKind::kMalformed, "parameter bundle has no network '" + name + "'");
    return it->second;
  }
  const Matrix &tensor(const std::string &name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) Fail(ErrorKind::kMalformed, "parameter bundle has no tensor '" + name + "'");
    return it->second;
  }
};

namespace detail {

inline void PutU32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void PutF32(std::string &out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  PutU32(out, bits);
}
inline void PutMatrix(std::string &out, const Matrix &m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) PutF32(out, m(r, c));
}

class Reader {
 public:
  Reader(const std::string &bytes, const std::string &path) : bytes_(bytes), path_(path) {}
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t U8() {
    Need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  double F32() {
    const std::uint32_t bits = U32();
    float f;
    std::memcpy(&f, &bits, 4);
    return static_cast<double>(f);
  }
  std::string Str(std::size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Matrix Mat(std::uint32_t rows, std::uint32_t cols) {
    Matrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = F32();
    return m;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) Fail(ErrorKind::kMalformed, path_ + ": truncated parameter file");
  }
  const std::string &bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string EncodeBundle(const ParamBundle &bundle) {
  std::string out = "RVDN";
  detail::PutU32(out, kParamFileVersion);
  detail::PutU32(out, static_cast<std::uint32_t>(bundle.networks.size() + bundle.tensors.size()));
  for (const auto &[name, net] : bundle.networks) {
    out.push_back(0);
    detail::PutU32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::PutU32(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const auto &layer : net.layers()) {
      out.push_back(static_cast<char>(layer.index()));
      if (auto *a = std::get_if<Affine>(&layer)) {
        detail::PutU32(out, static_cast<std::uint32_t>(a->out()));
        detail::PutU32(out, static_cast<std::uint32_t>(a->in()));
        detail::PutMatrix(out, a->weight);
        detail::PutMatrix(out, Matrix(a->bias));
      }
    }
  }
  for (const auto &[name, m] : bundle.tensors) {
    out.push_back(1);
    detail::PutU32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::PutU32(out, static_cast<std::uint32_t>(m.rows()));
    detail::PutU32(out, static_cast<std::uint32_t>(m.cols()));
    detail::PutMatrix(out, m);
  }
  return out;
}

inline std::string DescribeShapes(const ParamBundle &bundle) {
  std::ostringstream os;
  os << "format=RVDN version=" << kParamFileVersion << "\n";
  for (const auto &[name, net] : bundle.networks) {
    os << "network " << name << " layers=" << net.layers().size() << "\n";
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
      os << "  layer " << i << " " << LayerName(net.layers()[i]);
      if (auto *a = std::get_if<Affine>(&net.layers()[i])) os << " " << a->out() << "x" << a->in();
      os << "\n";
    }
  }
  for (const auto &[name, m] : bundle.tensors) os << "tensor " << name << " " << m.rows() << "x" << m.cols() << "\n";
  return os.str();
}

inline ParamBundle DecodeBundle(const std::string &bytes, const std::string &path = "<memory>") {
  detail::Reader in(bytes, path);
  if (in.Str(4) != "RVDN") Fail(ErrorKind::kMalformed, path + ": bad magic, not a parameter file");
  const std::uint32_t version = in.U32();
  if (version != kParamFileVersion)
    Fail(ErrorKind::kUnsupported, path + ": parameter file version " + std::to_string(version));
  ParamBundle bundle;
  const std::uint32_t count = in.U32();
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint8_t kind = in.U8();
    const std::string name = in.Str(in.U32());
    if (kind == 0) {
      std::vector<Layer> layers;
      const std::uint32_t n = in.U32();
      for (std::uint32_t i = 0; i < n; ++i) {
        switch (in.U8()) {
          case 0: {
            Affine a;
            const std::uint32_t out = in.U32(), inn = in.U32();
            a.weight = in.Mat(out, inn);
            a.bias = in.Mat(out, 1).col(0);
            layers.emplace_back(std::move(a));
            break;
          }
          case 1: layers.emplace_back(Tanh{}); break;
          case 2: layers.emplace_back(Relu{}); break;
          case 3: layers.emplace_back(MeanPool{}); break;
          case 4: layers.emplace_back(L2Normalize{}); break;
          case 5: layers.emplace_back(LogSoftmax{}); break;
          default: Fail(ErrorKind::kMalformed, path + ": unknown layer type");
        }
      }
      bundle.networks.emplace(name, Network(std::move(layers)));
    } else if (kind == 1) {
      const std::uint32_t rows = in.U32(), cols = in.U32();
      bundle.tensors.emplace(name, in.Mat(rows, cols));
    } else {
      Fail(ErrorKind::kMalformed, path + ": unknown entry kind");
    }
  }
  if (!in.done()) Fail(ErrorKind::kMalformed, path + ": trailing bytes after last entry");
  return bundle;
}

inline void WriteTextFile(const std::string &path, const std::string &contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, path + ": cannot open for writing");
  out << contents;
  if (!out) Fail(ErrorKind::kIo, path + ": write failed");
}

inline std::string ReadTextFile(const std::string &path) {
  if (!std::filesystem::exists(path)) Fail(ErrorKind::kMissingFile, path + ": no such file");
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, path + ": cannot open for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void SaveBundle(const std::string &path, const ParamBundle &bundle) {
  WriteTextFile(path, EncodeBundle(bundle));
  WriteTextFile(path + ".shapes", DescribeShapes(bundle));
}

inline ParamBundle LoadBundle(const std::string &path) { return DecodeBundle(ReadTextFile(path), path); }

}  // namespace rovo::diffnet
