#pragma once

#include "piezo/lti.hpp"
#include "piezo/plant.hpp"
#include "piezo/types.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace piezo::sensor {

using Complex = std::complex<double>;

struct FrequencyResponse {
  std::vector<double> omega;  // rad/sample, strictly increasing in (0, pi]
  std::vector<Complex> value;
  std::vector<double> variance;  // of the averaged estimate; NaN with one realization
  std::size_t realizations = 1;

  std::size_t size() const { return omega.size(); }
  void validate() const;
  void write_csv(const std::filesystem::path& path) const;
  static FrequencyResponse read_csv(const std::filesystem::path& path);
};

// Roughly logarithmic DFT bin indices between f_lo and f_hi for a record of
// `period` samples; duplicates after rounding are dropped.
std::vector<std::size_t> log_bins(double f_lo, double f_hi, std::size_t count, double sample_rate, std::size_t period);

// One period of sum_k amplitude * cos(2 pi bin_k n / period + phi_k), phi_k ~ U[0, 2 pi).
std::vector<double> multisine(std::span<const std::size_t> bins, std::size_t period, double amplitude,
                              std::uint64_t seed);

// Per realization: the period-averaged spectra after `transient_periods` are
// dropped give Y/U at each bin; realizations are then averaged.
FrequencyResponse bla(std::span<const std::vector<double>> inputs, std::span<const std::vector<double>> outputs,
                      std::size_t period, std::span<const std::size_t> bins, std::size_t transient_periods = 1);

// Delayed-integrator times the average of the two shear responses, normalised
// by their mean at the lowest bin.
FrequencyResponse average_sensor_frf(const FrequencyResponse& g_s1, const FrequencyResponse& g_s2, double sample_time);

struct SensorModel {
  lti::TransferFunction shape;     // B/A; must be stable
  lti::TransferFunction transfer;  // delayed integrator * q^{-1} * shape
  std::size_t relative_degree = 1;
  double sample_rate = 0.0;
  std::size_t order = 0;
  std::vector<double> bin_error;  // relative, on the identification grid

  lti::Complex response(double omega) const { return transfer.response(omega); }
  void validate() const;
};

struct FitSettings {
  std::size_t iterations = 8;     // Sanathanan-Koerner reweightings
  double tolerance = 0.02;        // max relative bin error accepted when picking the order
  double band_fraction = 1.0;     // bins with omega <= band_fraction * max omega count toward the error
  double reject_error = 0.5;      // a fit worse than this after pole reflection is an error
};

// Model T_s q^{-1}/(1 - q^{-1}) * q^{-1} * B(q^{-1})/A(q^{-1}) with deg A = deg B
// <= max_order. The lowest order meeting the tolerance is returned, else the best.
SensorModel fit_parametric(const FrequencyResponse& frf, std::size_t max_order, double sample_time,
                           const FitSettings& settings = {});

struct ExperimentSettings {
  std::size_t bins = 40;
  double f_lo = 1.0;
  double f_hi_fraction = 0.4;  // of Nyquist
  std::size_t realizations = 4;
  std::size_t periods = 3;
  std::size_t transient_periods = 1;
  double excitation_rms = 0.4;   // V
  double clamp_hold = 135.0;     // V, engaged clamp at +hold, released clamp at -hold
  double settle_seconds = 0.2;
  std::size_t model_order = 3;
  FitSettings fit{};
  std::uint64_t seed = 7;
};

struct SensorIdentification {
  FrequencyResponse g_s1, g_s2, g_hat;
  SensorModel model;
  PerElement<double> current_gain{};  // clamps take the mean of the two shears
};

// Excites each shear with a multisine while its clamp holds it against the mover,
// forms the BLAs, the averaged sensor response, its parametric fit, and estimates
// the current gains from the position-to-charge response at the lowest bin.
SensorIdentification identify_sensor(const sim::PlantConfig& plant, const ExperimentSettings& settings = {});

// Model coefficients and current gains as (field, index, value) rows.
void write_model_csv(const SensorModel& model, const PerElement<double>& current_gain, const std::filesystem::path& path);
std::pair<SensorModel, PerElement<double>> read_model_csv(const std::filesystem::path& path);

}  // namespace piezo::sensor
