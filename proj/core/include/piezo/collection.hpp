#pragma once

#include "piezo/controller.hpp"
#include "piezo/hysteresis.hpp"
#include "piezo/plant.hpp"
#include "piezo/waveform.hpp"

namespace piezo::hyst {

struct CollectionSettings {
  double steps_per_frequency = 3.0;
  // Recorded samples per step; dwell samples are strided down to about this many. 0 keeps all.
  std::size_t samples_per_step = 300;
};

struct CollectionResult {
  Datasets data;
  std::size_t simulated_samples = 0;
};

// Drives the plant with the (constant-model) controller through every signed
// frequency of the grid and records (udot, u_a, i) per element.
CollectionResult collect_dataset(const sim::PlantConfig& plant, const control::ControllerConfig& controller,
                                 const waveform::StrokePlan& plan, const FrequencyGrid& grid,
                                 const CollectionSettings& settings);

}  // namespace piezo::hyst
