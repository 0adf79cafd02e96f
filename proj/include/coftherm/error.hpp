#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coftherm {

/// Base error for every failure the library reports. `kind()` is a short
/// machine-readable tag ("parse", "invalid_input", ...) used by the CLI
/// when it emits error JSON.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

class ParseError : public Error {
public:
  ParseError(const std::string& source, std::size_t line, std::size_t column,
             const std::string& msg)
      : Error("parse", source + ":" + std::to_string(line) + ":" +
                           std::to_string(column) + ": " + msg),
        line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

class InvalidInput : public Error {
public:
  explicit InvalidInput(const std::string& what) : Error("invalid_input", what) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error("numerical", what) {}
};

} // namespace coftherm
