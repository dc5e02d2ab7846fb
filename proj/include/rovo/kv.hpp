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

// Two small text encodings used across the project:
//
//  * KeyValueFile: one "key = value" per line, '#' comments. Used for model
//    metadata and the run configuration (keys carry dotted section prefixes).
//  * Record lines: whitespace-separated "field=value" pairs, one record per
//    line. Used for manifests, trial lists and enrollment lists. Values are
//    percent-escaped so they never contain whitespace.

#pragma once

#include "rovo/common.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace rovo {

inline std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Fixed-precision text, used for report columns.
inline std::string FormatFixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline double ParseDouble(const std::string &s, const std::string &what) {
  double v = 0.0;
  const char *b = s.data(), *e = s.data() + s.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    Fail(ErrorKind::kMalformed, what + ": '" + s + "' is not a number");
  }
  return v;
}

inline long long ParseInt(const std::string &s, const std::string &what) {
  long long v = 0;
  const char *b = s.data(), *e = s.data() + s.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) Fail(ErrorKind::kMalformed, what + ": '" + s + "' is not an integer");
  return v;
}

class KeyValueFile {
 public:
  static KeyValueFile Parse(const std::string &text, const std::string &source) {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = Trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        Fail(ErrorKind::kMalformed, source + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key = Trim(t.substr(0, eq));
      if (key.empty()) Fail(ErrorKind::kMalformed, source + ":" + std::to_string(lineno) + ": empty key");
      if (kv.values_.count(key)) Fail(ErrorKind::kMalformed, source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      kv.values_[key] = Trim(t.substr(eq + 1));
      kv.order_.push_back(key);
    }
    return kv;
  }

  void Set(const std::string &key, const std::string &value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
  }
  void Set(const std::string &key, double value) { Set(key, FormatDouble(value)); }
  void Set(const std::string &key, long long value) { Set(key, std::to_string(value)); }
  void Set(const std::string &key, int value) { Set(key, std::to_string(value)); }

  bool Has(const std::string &key) const { return values_.count(key) > 0; }
  const std::string &Get(const std::string &key) const {
    auto it = values_.find(key);
    if (it == values_.end()) Fail(ErrorKind::kMalformed, "missing key '" + key + "'");
    return it->second;
  }
  double GetDouble(const std::string &key) const { return ParseDouble(Get(key), key); }
  long long GetInt(const std::string &key) const { return ParseInt(Get(key), key); }

  const std::vector<std::string> &keys() const { return order_; }

  std::string Serialize() const {
    std::string out;
    for (const auto &k : order_) out += k + " = " + values_.at(k) + "\n";
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

inline std::string EscapeField(const std::string &s) {
  std::string out;
  for (unsigned char c : s) {
    if (c == '%' || c == '=' || c <= ' ') {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

inline std::string UnescapeField(const std::string &s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

/// One "a=1 b=two" record; field order is preserved for writing.
class Record {
 public:
  static Record Parse(const std::string &line, const std::string &where) {
    Record r;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) Fail(ErrorKind::kMalformed, where + ": bad field '" + tok + "'");
      r.Set(tok.substr(0, eq), UnescapeField(tok.substr(eq + 1)));
    }
    return r;
  }

  void Set(const std::string &key, const std::string &value) {
    for (auto &kv : fields_)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    fields_.emplace_back(key, value);
  }
  bool Has(const std::string &key) const {
    for (const auto &kv : fields_)
      if (kv.first == key) return true;
    return false;
  }
  const std::string &Get(const std::string &key) const {
    for (const auto &kv : fields_)
      if (kv.first == key) return kv.second;
    Fail(ErrorKind::kMalformed, "record lacks field '" + key + "'");
  }

  std::string Serialize() const {
    std::string out;
    for (const auto &[k, v] : fields_) {
      if (!out.empty()) out.push_back(' ');
      out += k + "=" + EscapeField(v);
    }
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> fields_;
};

inline std::vector<Record> ParseRecords(const std::string &text, const std::string &source) {
  std::vector<Record> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.push_back(Record::Parse(t, source + ":" + std::to_string(lineno)));
  }
  return out;
}

}  // namespace rovo
