#pragma once

#include "piezo/lti.hpp"
#include "piezo/profile.hpp"
#include "piezo/types.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace piezo::waveform {

struct StrokeBounds {
  double r_min = 0.0;  // m
  double r_max = 0.0;  // m
  double span() const { return r_max - r_min; }
};

// Per-element stroke bounds tabulated over positive drive frequencies, linear
// interpolation between entries and clamping outside the table.
struct StrokeLUT {
  std::vector<double> frequencies;                 // strictly increasing, Hz
  PerElement<std::vector<StrokeBounds>> entries;  // one per frequency

  StrokeBounds lookup(Element e, double drive_frequency) const;
  void validate() const;
  StrokeLUT scaled(const PerElement<double>& factors) const;
  void write_csv(const std::filesystem::path& path) const;
  static StrokeLUT read_csv(const std::filesystem::path& path);
};

struct StrokePlan {
  PerElement<StrokeBounds> fixed{};
  std::optional<StrokeLUT> table;

  StrokeBounds bounds(Element e, double drive_frequency) const;
  void validate() const;
};

double advance_alpha(double alpha, double drive_frequency, double sample_time);

struct CommutationState {
  double alpha = 0.0;
  void advance(double drive_frequency, double sample_time) { alpha = advance_alpha(alpha, drive_frequency, sample_time); }
};

// Nominal rate of one element for the given stroke span.
double element_rate(Element e, double alpha, double drive_frequency, double span);

// Piecewise-constant reference rates (m/s) for S1, S2, C1, C2.
PerElement<double> nominal_waveform(double alpha, double drive_frequency, const StrokePlan& plan);

// Nominal rate of whichever shear is engaged with the mover at alpha.
double nominal_mover_rate(double alpha, double drive_frequency, const StrokePlan& plan);

// Nominal rates with the direction-matched profile added to both shears.
PerElement<double> modified_shear_reference(double alpha, double drive_frequency, const StrokePlan& plan,
                                            const CompensationProfile* plus, const CompensationProfile* minus);

// Commutation angles used for the commands of samples 1..N (alpha before each advance).
std::vector<double> alpha_sequence(std::span<const double> schedule, double sample_time, double alpha0 = 0.0);

// Mover reference r_k for samples 1..N. Rates are filtered through `sensor_model`
// when given; with `sensor_referenced` and no model a ConfigError is raised,
// otherwise they are integrated.
std::vector<double> integrate_reference(std::span<const double> schedule, const StrokePlan& plan, double sample_time,
                                        const lti::TransferFunction* sensor_model, bool sensor_referenced);

}  // namespace piezo::waveform
