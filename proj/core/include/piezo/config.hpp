#pragma once

#include "piezo/controller.hpp"
#include "piezo/ilc.hpp"
#include "piezo/plant.hpp"
#include "piezo/sensor.hpp"
#include "piezo/stroke.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace piezo::config {

struct PlantSection {
  double noise_std = 0.5e-9;  // m
  double sensor_cutoff_hz = 100.0;
};

struct ControlSection {
  double amplifier_min = -150.0;
  double amplifier_max = 150.0;
  double inset = 0.05;            // anti-windup bounds, fraction of the amplifier span
  double guard_fraction = 1e-3;
  double collection_gain = 1e-8;  // m/V, constant model used while collecting
  double collection_margin = 0.01;
};

struct CollectSection {
  double f_min = 0.3;
  double f_max = 100.0;
  std::size_t count = 52;
  double steps_per_frequency = 3.0;
  std::size_t samples_per_step = 300;
};

struct FitSection {
  std::size_t kernel_grid = 12;
  std::size_t lut_nodes = 64;
  double ridge_factor = 1e-8;
  std::size_t max_samples = 16000;
};

struct StrokeSection {
  double fd_step = 1e-9;
  double gradient_tol = 1e-6;
  std::size_t max_iterations = 200;
  double saturation_margin = 0.01;
  bool warm_start = true;
};

struct SensorSection {
  std::size_t bins = 40;
  double f_lo = 1.0;
  double f_hi_fraction = 0.4;
  std::size_t realizations = 4;
  std::size_t periods = 3;
  std::size_t transient_periods = 1;
  double excitation_rms = 0.4;
  double clamp_hold = 135.0;
  double settle_seconds = 0.2;
  std::size_t model_order = 3;
  double fit_tolerance = 0.02;
};

struct IlcSection {
  double drive_frequency = 2.0;  // Hz, learned at +f and -f
  std::size_t trials = 20;
  std::size_t nodes = 180;
  double beta = 0.2;
  double q_cutoff_hz = 500.0;
  int q_order = 2;
  double steps_per_trial = 6.0;
  std::size_t excluded_steps = 1;
  std::string seed_policy = "fixed";  // or "per-trial"
};

struct SweepSection {
  double f_min = 0.4;
  double f_max = 100.0;
  std::size_t count = 10;
  double steps = 3.0;
  double lead_in_steps = 1.0;
  std::size_t alpha_bins = 360;
};

struct CertifySection {
  std::size_t horizon = 2000;
  std::size_t cap = 4000;
  std::size_t grid_points = 4096;
};

struct PipelineConfig {
  double sample_rate = 10000.0;
  std::uint64_t seed = 1;
  PlantSection plant;
  ControlSection control;
  CollectSection collect;
  FitSection fit;
  StrokeSection strokes;
  SensorSection sensor;
  IlcSection ilc;
  SweepSection sweep;
  CertifySection certify;

  void validate() const;

  sim::PlantConfig plant_config() const;
  double u_min() const;  // anti-windup bounds
  double u_max() const;
  control::ControllerConfig controller(PerElement<control::GainModel> models) const;
  stroke::OptimizerSettings optimizer() const;
  sensor::ExperimentSettings sensor_settings() const;
  ilc::IlcSettings ilc_settings(double drive_frequency) const;
};

// Unknown keys and mistyped values raise ConfigError; missing keys keep defaults.
PipelineConfig parse(std::string_view json_text);
PipelineConfig load(const std::filesystem::path& path);
std::string to_json(const PipelineConfig& cfg);  // every key, stable order
void save(const PipelineConfig& cfg, const std::filesystem::path& path);

// Canonical JSON of the named top-level entries, the input of a stage key.
std::string subset_json(const PipelineConfig& cfg, std::span<const std::string_view> keys);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);
std::string hex(std::uint64_t h);
std::string file_hash(const std::filesystem::path& path);  // hex FNV-1a of the contents

}  // namespace piezo::config
