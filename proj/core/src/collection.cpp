#include "piezo/collection.hpp"

#include "piezo/drive.hpp"

#include <algorithm>
#include <cmath>

namespace piezo::hyst {

CollectionResult collect_dataset(const sim::PlantConfig& plant, const control::ControllerConfig& controller,
                                 const waveform::StrokePlan& plan, const FrequencyGrid& grid,
                                 const CollectionSettings& settings) {
  CollectionResult out;
  for (Element e : kAllElements) out.data[index(e)].element = e;
  control::ClosedLoop loop(plant, controller, plan);
  for (double f : grid.signed_schedule()) {
    const std::size_t n = control::step_samples(f, plant.sample_rate, settings.steps_per_frequency);
    std::size_t stride = 1;
    if (settings.samples_per_step > 0) {
      const double per_step = plant.sample_rate / std::abs(f);
      stride = std::max<std::size_t>(1, static_cast<std::size_t>(per_step / static_cast<double>(settings.samples_per_step)));
    }
    std::size_t local = 0;
    loop.run(control::constant_schedule(f, n), [&](const control::DriveSample& s) {
      if (local++ % stride != 0) return;
      for (Element e : kAllElements) {
        const std::size_t i = index(e);
        HysteresisSample hs;
        hs.t = s.t;
        hs.rate = s.plant->rates[i];
        hs.absement = s.plant->absements[i];
        hs.current = s.plant->currents[i];
        hs.direction = direction_of(s.reference_rates[i]);
        out.data[i].samples.push_back(hs);
      }
    });
    out.simulated_samples += n;
  }
  for (HysteresisDataset& d : out.data) d.apply_exclusion();
  return out;
}

}  // namespace piezo::hyst
