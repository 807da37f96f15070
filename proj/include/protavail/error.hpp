#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace protavail {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed scenario document. Line and column are 1-based.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Unknown field, missing field or wrong JSON type.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Dangling mode identifier.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

// Numeric field outside its admissible range.
class RangeError : public Error {
 public:
  using Error::Error;
};

class OutOfHorizon : public Error {
 public:
  OutOfHorizon(double t, double horizon)
      : Error("time " + std::to_string(t) + " outside [0, " +
              std::to_string(horizon) + "]") {}
};

class NotAStoppingTime : public Error {
 public:
  NotAStoppingTime() : Error("arrival time is not a stopping time of the filtration") {}
};

// No replication produced a demand arrival. Carries the events the
// estimating model could not represent at all.
class NoDemands : public Error {
 public:
  explicit NoDemands(std::vector<std::string> excluded_events = {})
      : Error(make_message(excluded_events)), excluded_(std::move(excluded_events)) {}

  const std::vector<std::string>& excluded_events() const noexcept { return excluded_; }

 private:
  static std::string make_message(const std::vector<std::string>& excluded) {
    std::string msg = "NoDemands: no replication produced a demand arrival";
    if (!excluded.empty()) {
      msg += "; excluded_events = [";
      for (std::size_t i = 0; i < excluded.size(); ++i) {
        if (i) msg += ", ";
        msg += excluded[i];
      }
      msg += "]";
    }
    return msg;
  }

  std::vector<std::string> excluded_;
};

class NoLatentModes : public Error {
 public:
  NoLatentModes() : Error("NoLatentModes: scenario has no latent consequential mode") {}
};

}  // namespace protavail
