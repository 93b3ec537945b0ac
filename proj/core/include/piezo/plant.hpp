#pragma once

#include "piezo/absement.hpp"
#include "piezo/lti.hpp"
#include "piezo/types.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace piezo::sim {

// Gain form c0 + c1 exp(-u_a/lambda) + c2 tanh(|udot|/rate_scale), in m/V.
struct HysteresisParams {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

struct ElementTruth {
  PerDirection<HysteresisParams> params;
  double absement_scale = 1.0;  // V
  double rate_scale = 1.0;      // V/s
};

struct Harmonic {
  int order = 1;
  double amplitude = 0.0;  // m per step
  double phase = 0.0;      // rad
};

struct Resonance {
  double frequency_hz = 0.0;
  double damping = 0.0;
};

struct PlantConfig {
  double sample_rate = 10000.0;
  PerElement<ElementTruth> truth{};
  std::array<double, 2> clamp_thresholds{};  // m, for C1 and C2
  PerElement<double> current_gain{};         // m s^-1 A^-1
  PerDirection<std::vector<Harmonic>> disturbance;
  double sensor_cutoff_hz = 100.0;
  std::size_t sensor_delay = 1;
  double noise_std = 0.5e-9;  // m
  std::uint64_t seed = 1;
  double amplifier_min = -150.0;
  double amplifier_max = 150.0;
  std::optional<Resonance> resonance;

  double sample_time() const { return 1.0 / sample_rate; }
  // Throws ParameterError on any violated invariant, including a non-positive
  // gain anywhere on a dense grid over the amplifier range.
  void validate() const;
};

// Synthetic default plant. Clamp thresholds are placed from the periodic orbit
// the clamps follow between the given voltage bounds.
PlantConfig default_plant(double sample_rate = 10000.0, double u_min = -135.0, double u_max = 135.0);

// Contact thresholds at `fraction` of each clamp's displacement orbit above its low end.
std::array<double, 2> engagement_thresholds(const PlantConfig& cfg, double u_min, double u_max, double fraction);

double true_hysteresis(const PlantConfig& cfg, Element e, double rate, double absement, Direction dir);

double kappa(std::array<double, 2> shear_rates, std::array<double, 2> clamp_positions,
             std::array<double, 2> thresholds);

double disturbance(const PlantConfig& cfg, double alpha, double drive_frequency);

// Mover rate to measured position, excluding noise.
lti::TransferFunction sensor_transfer(const PlantConfig& cfg);

class SensorChain {
 public:
  explicit SensorChain(const PlantConfig& cfg);
  double apply(double mover_rate);
  double integrated() const { return integrated_; }

 private:
  double sample_time_;
  double integrated_ = 0.0;
  std::deque<double> delay_line_;
  lti::Filter lowpass_;
  double noise_std_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
};

struct ElementState {
  double voltage = 0.0;
  double previous_voltage = 0.0;
  double displacement = 0.0;
  AbsementTracker absement;
};

struct PlantState {
  PerElement<ElementState> elements{};
  double true_position = 0.0;
  double measured_position = 0.0;
  std::uint64_t sample = 0;
};

struct StepResult {
  double measured = 0.0;
  double true_position = 0.0;
  double mover_rate = 0.0;
  PerElement<double> currents{};
  PerElement<double> rates{};       // V/s of this step
  PerElement<double> absements{};   // value used for the gain, i.e. before the update
  PerElement<double> increments{};  // element displacement increments
};

class Plant {
 public:
  explicit Plant(PlantConfig cfg);

  // One sample with commanded voltages; alpha and drive frequency select the
  // disturbance. Throws SimulationFault when a command leaves the amplifier range.
  StepResult step(const PerElement<double>& u_cmd, double alpha, double drive_frequency);

  const PlantState& state() const { return state_; }
  const PlantConfig& config() const { return cfg_; }

 private:
  PlantConfig cfg_;
  PlantState state_;
  SensorChain sensor_;
  std::optional<lti::Filter> resonance_;
};

struct Trace {
  double sample_rate = 0.0;
  std::vector<double> t, alpha;
  PerElement<std::vector<double>> voltage, current, rate, absement;
  std::vector<double> true_position, measured, reference;

  std::size_t size() const { return t.size(); }
  void reserve(std::size_t n);
  // Records the post-step state; absement columns hold the value after the update.
  void append(double time, double alpha_value, const PlantState& state, const StepResult& r, double ref);
  void write_csv(const std::filesystem::path& path) const;
  static Trace read_csv(const std::filesystem::path& path);
};

}  // namespace piezo::sim
