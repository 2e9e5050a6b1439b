#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace silicon_entropy {

// Bad argument values: zero dimensions, negative delays, mismatched lengths.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Device power-state violations (startup read while powered, write while off).
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bitstream shorter than a statistical test's minimum.
class LengthError : public std::length_error {
 public:
  LengthError(const std::string& test, std::size_t minimum, std::size_t actual)
      : std::length_error(test + ": needs at least " + std::to_string(minimum) +
                          " bits, got " + std::to_string(actual)),
        minimum_(minimum),
        actual_(actual) {}

  std::size_t minimum() const noexcept { return minimum_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t minimum_;
  std::size_t actual_;
};

class EnrollmentDeficit : public std::runtime_error {
 public:
  EnrollmentDeficit(std::size_t required, std::size_t available)
      : std::runtime_error("enrollment deficit: " + std::to_string(required) +
                           " stable cells required, " + std::to_string(available) +
                           " available"),
        required_(required),
        available_(available) {}

  std::size_t required() const noexcept { return required_; }
  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t required_;
  std::size_t available_;
};

// A debiasing pipeline that produced nothing for too many source blocks.
class StarvationError : public std::runtime_error {
 public:
  StarvationError(const std::string& stage, std::size_t blocks)
      : std::runtime_error("pipeline starved at stage '" + stage + "' after " +
                           std::to_string(blocks) + " source blocks without output"),
        stage_(stage),
        blocks_(blocks) {}

  const std::string& stage() const noexcept { return stage_; }
  std::size_t blocks() const noexcept { return blocks_; }

 private:
  std::string stage_;
  std::size_t blocks_;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace silicon_entropy
