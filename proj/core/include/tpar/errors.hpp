#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace tpar {

// Root of every error the library raises on bad input or bad state.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset line. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class VocabError : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable input file.
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value. field() names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// A query named an entity or relation the vocabulary does not know.
class QueryError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Exhaustive oracles refuse graphs above their size guard.
class OracleGuardError : public Error {
 public:
  using Error::Error;
};

}  // namespace tpar
