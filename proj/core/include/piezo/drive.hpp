#pragma once

#include "piezo/controller.hpp"
#include "piezo/plant.hpp"
#include "piezo/profile.hpp"
#include "piezo/waveform.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace piezo::control {

struct DriveSample {
  std::size_t k = 0;  // 1-based sample index
  double t = 0.0;
  double alpha = 0.0;  // angle the command was computed from
  double drive_frequency = 0.0;
  PerElement<double> reference_rates{};
  ControlOutput control;
  const sim::StepResult* plant = nullptr;
  const sim::PlantState* state = nullptr;
};

using DriveObserver = std::function<void(const DriveSample&)>;

struct ProfilePair {
  std::optional<CompensationProfile> plus;
  std::optional<CompensationProfile> minus;
};

// Feedforward controller driving the simulated plant along the commutation waveforms.
class ClosedLoop {
 public:
  ClosedLoop(sim::PlantConfig plant, ControllerConfig controller, waveform::StrokePlan plan, ProfilePair profiles = {});

  // Runs one sample per schedule entry (drive frequency in Hz).
  void run(std::span<const double> schedule, const DriveObserver& observer = {});

  const sim::Plant& plant() const { return plant_; }
  const ControllerState& controller_state() const { return state_; }
  double alpha() const { return alpha_; }

 private:
  sim::Plant plant_;
  ControllerConfig cfg_;
  ControllerState state_;
  waveform::StrokePlan plan_;
  ProfilePair profiles_;
  double alpha_ = 0.0;
  std::size_t k_ = 0;
};

std::vector<double> constant_schedule(double drive_frequency, std::size_t samples);

// Samples for n steps at f: round(n F_s / |f|).
std::size_t step_samples(double drive_frequency, double sample_rate, double steps);

}  // namespace piezo::control
