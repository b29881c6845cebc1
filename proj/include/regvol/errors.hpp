#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace regvol {

// Every exception carries the module it came from so the CLI can map a
// failure to a stage and an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error("[" + module + "] " + message),
        module_(std::move(module)) {}

  const std::string& module_name() const noexcept { return module_; }

 private:
  std::string module_;
};

class NotSymmetric : public Error {
 public:
  explicit NotSymmetric(const std::string& m) : Error("symfun", m) {}
};

class NotPositiveSemidefinite : public Error {
 public:
  explicit NotPositiveSemidefinite(const std::string& m) : Error("symfun", m) {}
};

class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(const std::string& m, std::string module = "symfun")
      : Error(std::move(module), m) {}
};

class DegenerateSpectrum : public Error {
 public:
  explicit DegenerateSpectrum(const std::string& m) : Error("symfun", m) {}
};

class Infeasible : public Error {
 public:
  explicit Infeasible(const std::string& m) : Error("relaxation", m) {}
};

class DegenerateFractional : public Error {
 public:
  explicit DegenerateFractional(const std::string& m) : Error("sampler", m) {}
};

class InvalidAnchors : public Error {
 public:
  explicit InvalidAnchors(const std::string& m) : Error("sampler", m) {}
};

class ZeroProbabilityCondition : public Error {
 public:
  explicit ZeroProbabilityCondition(const std::string& m) : Error("sampler", m) {}
};

class DegenerateMeasure : public Error {
 public:
  explicit DegenerateMeasure(const std::string& m) : Error("sampler", m) {}
};

class NumericalInstability : public Error {
 public:
  explicit NumericalInstability(const std::string& m, std::string module = "sampler")
      : Error(std::move(module), m) {}
};

class ZeroSupport : public Error {
 public:
  explicit ZeroSupport(const std::string& m) : Error("oracle", m) {}
};

class TooLarge : public Error {
 public:
  explicit TooLarge(const std::string& m) : Error("oracle", m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error("cli", m) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& m) : Error("cli", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("cli", m) {}
};

}  // namespace regvol
