#pragma once

#include "piezo/controller.hpp"
#include "piezo/plant.hpp"
#include "piezo/stroke.hpp"
#include "piezo/waveform.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace piezo::support {

// Default plant without noise or angle disturbance.
inline sim::PlantConfig quiet_plant(double sample_rate = 10000.0) {
  sim::PlantConfig p = sim::default_plant(sample_rate);
  p.noise_std = 0.0;
  p.disturbance = {};
  return p;
}

inline control::ControllerConfig constant_controller(double gain, double sample_rate = 10000.0, double inset = 0.05) {
  PerElement<control::GainModel> models;
  models.fill(control::GainModel::constant(gain));
  return control::ControllerConfig::with_inset(models, -150.0, 150.0, inset, 1.0 / sample_rate);
}

// Strokes a constant-gain law just clips with.
inline waveform::StrokePlan clipping_plan(double gain, double u_min = -135.0, double u_max = 135.0,
                                            double margin = 0.01) {
  waveform::StrokePlan plan;
  const double span = stroke::constant_gain_span(gain, u_min, u_max) * (1.0 + margin);
  plan.fixed.fill({-0.5 * span, 0.5 * span});
  return plan;
}

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("piezo-test-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace piezo::support
