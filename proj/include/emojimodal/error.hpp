#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emojimodal {

// Bad input data: malformed files, inconsistent shapes, unknown emoji.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A line-oriented input could not be parsed.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Model-side failures: checkpoint mismatch, training divergence.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emojimodal
