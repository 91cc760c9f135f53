#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ghz {

// Every failure raised by the library derives from Error so callers can catch
// one type; the CLI maps the concrete kinds onto stable exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

// Raised when a result that must be real (or finite) is not, within tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  InsufficientDataError(std::string setting, const std::string& what)
      : Error(what), setting_(std::move(setting)) {}
  const std::string& setting() const noexcept { return setting_; }

 private:
  std::string setting_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(std::vector<std::string> diagnostics)
      : Error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  static std::string join(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
      if (!out.empty()) out += '\n';
      out += l;
    }
    return out;
  }
  std::vector<std::string> diagnostics_;
};

}  // namespace ghz
