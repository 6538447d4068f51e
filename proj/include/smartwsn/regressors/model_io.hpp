#pragma once

// Token-oriented text encoding shared by all model serializers. Reals are
// written in shortest round-trip form so a reloaded model predicts
// bit-identically.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "smartwsn/error.hpp"

namespace smartwsn {

inline std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error(ErrorCode::IoError, "cannot format real");
  return std::string(buf, end);
}

class ModelWriter {
 public:
  explicit ModelWriter(std::ostream& out) : out_(out) {}

  ModelWriter& key(std::string_view k) {
    if (!line_empty_) out_ << '\n';
    out_ << k;
    line_empty_ = false;
    return *this;
  }
  ModelWriter& real(double v) {
    out_ << ' ' << format_real(v);
    return *this;
  }
  ModelWriter& integer(std::int64_t v) {
    out_ << ' ' << v;
    return *this;
  }
  ModelWriter& word(std::string_view w) {
    out_ << ' ' << w;
    return *this;
  }
  ModelWriter& reals(const std::vector<double>& vs) {
    integer(static_cast<std::int64_t>(vs.size()));
    for (double v : vs) real(v);
    return *this;
  }
  void finish() {
    if (!line_empty_) out_ << '\n';
    line_empty_ = true;
  }

 private:
  std::ostream& out_;
  bool line_empty_ = true;
};

/// Reads whitespace-separated tokens, tracking line numbers for errors.
class ModelReader {
 public:
  explicit ModelReader(std::istream& in) : in_(in) {}

  void expect(std::string_view keyword) {
    std::string tok = token();
    if (tok != keyword) {
      fail("expected '" + std::string(keyword) + "', found '" + tok + "'");
    }
  }

  std::string token() {
    while (cursor_ >= tokens_.size()) {
      std::string line;
      if (!std::getline(in_, line)) fail("unexpected end of model file");
      ++line_no_;
      tokens_.clear();
      cursor_ = 0;
      std::istringstream ss(line);
      std::string t;
      while (ss >> t) tokens_.push_back(t);
    }
    return tokens_[cursor_++];
  }

  double real() {
    std::string tok = token();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) fail("bad real '" + tok + "'");
    return v;
  }

  std::int64_t integer() {
    std::string tok = token();
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) fail("bad integer '" + tok + "'");
    return v;
  }

  std::size_t count(std::size_t limit = 100'000'000) {
    auto v = integer();
    if (v < 0 || static_cast<std::size_t>(v) > limit) fail("count out of range");
    return static_cast<std::size_t>(v);
  }

  std::vector<double> reals() {
    std::vector<double> out(count());
    for (double& v : out) v = real();
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, "model line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::vector<std::string> tokens_;
  std::size_t cursor_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace smartwsn
