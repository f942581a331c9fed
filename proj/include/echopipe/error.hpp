#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace echopipe {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised while decoding a binary container; carries the byte offset where
/// decoding stopped.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Raised for malformed text inputs (manifests, configs); carries the 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace echopipe
