#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace humorgen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violated one of its type invariants at construction.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized input. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(std::string field, std::string message, std::size_t line = 0)
      : Error(format(field, message, line)),
        field_(std::move(field)),
        detail_(std::move(message)),
        line_(line) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& detail() const noexcept { return detail_; }
  std::size_t line() const noexcept { return line_; }

  ParseError at_line(std::size_t line) const { return ParseError(field_, detail_, line); }

 private:
  static std::string format(const std::string& field, const std::string& message,
                            std::size_t line) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += "field '" + field + "': ";
    out += message;
    return out;
  }

  std::string field_;
  std::string detail_;
  std::size_t line_;
};

class GatewayError : public Error {
 public:
  enum class Kind {
    kAuth,            // credential rejected, never retried
    kRetriesExhausted,
    kProtocol,        // backend reply did not match the expected schema
    kFixtureMissing,  // scripted backend has no answer for the request
    kRequest,         // non-retryable HTTP failure other than auth
  };

  GatewayError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Transient backend failure (rate limit, 5xx, dropped connection). Retried by the gateway.
class TransientError : public Error {
 public:
  using Error::Error;
};

class EmptyListError : public Error {
 public:
  EmptyListError() : Error("no numbered list items found") {}
};

}  // namespace humorgen
