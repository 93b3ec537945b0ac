#pragma once

#include <stdexcept>
#include <string>

namespace piezo {

// Base for every failure raised by the library. `stage` names the pipeline
// stage or subsystem so that CLI diagnostics can point at it.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what) : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& what) : Error("parameter", what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};
struct SimulationFault : Error {
  explicit SimulationFault(const std::string& what) : Error("simulation", what) {}
};
struct ControllerFault : Error {
  explicit ControllerFault(const std::string& what) : Error("controller", what) {}
};
struct FitError : Error {
  explicit FitError(const std::string& what) : Error("fit", what) {}
};
struct OptimizationError : Error {
  explicit OptimizationError(const std::string& what) : Error("optimization", what) {}
};
struct IdentificationError : Error {
  explicit IdentificationError(const std::string& what) : Error("identification", what) {}
};
struct DesignError : Error {
  explicit DesignError(const std::string& what) : Error("design", what) {}
};
struct ProjectionError : Error {
  explicit ProjectionError(const std::string& what) : Error("projection", what) {}
};
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& what) : Error("ilc", what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace piezo
