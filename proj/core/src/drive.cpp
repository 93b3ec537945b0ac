#include "piezo/drive.hpp"

#include "piezo/errors.hpp"

#include <cmath>

namespace piezo::control {

ClosedLoop::ClosedLoop(sim::PlantConfig plant, ControllerConfig controller, waveform::StrokePlan plan,
                       ProfilePair profiles)
    : plant_(std::move(plant)), cfg_(std::move(controller)), plan_(std::move(plan)), profiles_(std::move(profiles)) {
  cfg_.validate();
  plan_.validate();
  if (std::abs(cfg_.sample_time - plant_.config().sample_time()) > 1e-15)
    throw ConfigError("controller and plant sample times differ");
}

void ClosedLoop::run(std::span<const double> schedule, const DriveObserver& observer) {
  const double ts = cfg_.sample_time;
  const CompensationProfile* plus = profiles_.plus ? &*profiles_.plus : nullptr;
  const CompensationProfile* minus = profiles_.minus ? &*profiles_.minus : nullptr;
  for (double f : schedule) {
    ++k_;
    const PerElement<double> rates = waveform::modified_shear_reference(alpha_, f, plan_, plus, minus);
    const ControlOutput control = control_step(state_, cfg_, rates);
    const sim::StepResult r = plant_.step(control.command, alpha_, f);
    if (observer) {
      DriveSample s;
      s.k = k_;
      s.t = static_cast<double>(k_) * ts;
      s.alpha = alpha_;
      s.drive_frequency = f;
      s.reference_rates = rates;
      s.control = control;
      s.plant = &r;
      s.state = &plant_.state();
      observer(s);
    }
    alpha_ = waveform::advance_alpha(alpha_, f, ts);
  }
}

std::vector<double> constant_schedule(double drive_frequency, std::size_t samples) {
  return std::vector<double>(samples, drive_frequency);
}

std::size_t step_samples(double drive_frequency, double sample_rate, double steps) {
  if (drive_frequency == 0.0) throw ParameterError("drive frequency must be nonzero");
  return static_cast<std::size_t>(std::llround(steps * sample_rate / std::abs(drive_frequency)));
}

}  // namespace piezo::control
