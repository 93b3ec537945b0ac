#include "piezo/config.hpp"

#include "piezo/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace piezo::config {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PlantSection, noise_std, sensor_cutoff_hz)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ControlSection, amplifier_min, amplifier_max, inset, guard_fraction,
                                                collection_gain, collection_margin)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CollectSection, f_min, f_max, count, steps_per_frequency,
                                                samples_per_step)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FitSection, kernel_grid, lut_nodes, ridge_factor, max_samples)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(StrokeSection, fd_step, gradient_tol, max_iterations,
                                                saturation_margin, warm_start)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SensorSection, bins, f_lo, f_hi_fraction, realizations, periods,
                                                transient_periods, excitation_rms, clamp_hold, settle_seconds,
                                                model_order, fit_tolerance)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(IlcSection, drive_frequency, trials, nodes, beta, q_cutoff_hz, q_order,
                                                steps_per_trial, excluded_steps, seed_policy)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepSection, f_min, f_max, count, steps, lead_in_steps, alpha_bins)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CertifySection, horizon, cap, grid_points)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PipelineConfig, sample_rate, seed, plant, control, collect, fit,
                                                strokes, sensor, ilc, sweep, certify)

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool compatible(const json& reference, const json& value) {
  if (reference.is_number_unsigned()) return value.is_number_unsigned() || (value.is_number_integer() && value.get<long long>() >= 0);
  if (reference.is_number()) return value.is_number();
  return reference.type() == value.type();
}

void check_keys(const json& reference, const json& given, const std::string& where) {
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown key '" + path + "'");
    const json& ref = reference.at(key);
    if (ref.is_object()) {
      if (!value.is_object()) throw ConfigError("'" + path + "' must be an object");
      check_keys(ref, value, path);
    } else if (!compatible(ref, value)) {
      throw ConfigError("'" + path + "' has the wrong type (expected " + std::string(ref.type_name()) + ")");
    }
  }
}

}  // namespace

void PipelineConfig::validate() const {
  require(sample_rate > 0.0 && std::isfinite(sample_rate), "sample_rate must be positive");
  require(plant.noise_std >= 0.0, "plant.noise_std must be non-negative");
  require(plant.sensor_cutoff_hz > 0.0 && plant.sensor_cutoff_hz < 0.5 * sample_rate,
          "plant.sensor_cutoff_hz must lie in (0, F_s/2)");
  require(control.amplifier_min < control.amplifier_max, "control.amplifier_min must be below amplifier_max");
  require(control.inset >= 0.0 && control.inset < 0.5, "control.inset must lie in [0, 0.5)");
  require(control.collection_gain > 0.0, "control.collection_gain must be positive");
  require(collect.f_min > 0.0 && collect.f_min < collect.f_max, "collect.f_min must lie in (0, f_max)");
  require(collect.f_max < 0.5 * sample_rate, "collect.f_max must be below F_s/2");
  require(collect.count >= 2, "collect.count must be at least 2");
  require(fit.kernel_grid >= 2 && fit.lut_nodes >= 2, "fit grids need at least two nodes");
  require(strokes.fd_step > 0.0, "strokes.fd_step must be positive");
  require(sensor.realizations >= 1 && sensor.periods > sensor.transient_periods,
          "sensor needs a realization and more periods than transient periods");
  require(ilc.drive_frequency > 0.0, "ilc.drive_frequency must be positive (both signs are learned)");
  require(ilc.trials >= 1 && ilc.nodes >= 2, "ilc needs a trial and two nodes");
  require(ilc.beta > 0.0 && ilc.beta <= 1.0, "ilc.beta must lie in (0, 1]");
  require(ilc.q_cutoff_hz > 0.0 && ilc.q_cutoff_hz < 0.5 * sample_rate, "ilc.q_cutoff_hz must lie in (0, F_s/2)");
  require(ilc.seed_policy == "fixed" || ilc.seed_policy == "per-trial", "ilc.seed_policy must be 'fixed' or 'per-trial'");
  require(sweep.f_min > 0.0 && sweep.f_min <= sweep.f_max && sweep.count >= 1, "sweep grid is empty");
  require(sweep.steps >= 1.0 && sweep.lead_in_steps >= 0.0, "sweep needs at least one measured step");
  require(certify.horizon >= 2 && certify.horizon <= certify.cap, "certify.horizon must lie in [2, cap]");
}

sim::PlantConfig PipelineConfig::plant_config() const {
  sim::PlantConfig p = sim::default_plant(sample_rate, u_min(), u_max());
  p.noise_std = plant.noise_std;
  p.sensor_cutoff_hz = plant.sensor_cutoff_hz;
  p.seed = seed;
  p.amplifier_min = control.amplifier_min;
  p.amplifier_max = control.amplifier_max;
  p.validate();
  return p;
}

double PipelineConfig::u_min() const {
  return control.amplifier_min + control.inset * (control.amplifier_max - control.amplifier_min);
}

double PipelineConfig::u_max() const {
  return control.amplifier_max - control.inset * (control.amplifier_max - control.amplifier_min);
}

control::ControllerConfig PipelineConfig::controller(PerElement<control::GainModel> models) const {
  control::ControllerConfig c = control::ControllerConfig::with_inset(std::move(models), control.amplifier_min,
                                                                      control.amplifier_max, control.inset,
                                                                      1.0 / sample_rate);
  c.guard_fraction = control.guard_fraction;
  return c;
}

stroke::OptimizerSettings PipelineConfig::optimizer() const {
  stroke::OptimizerSettings s;
  s.fd_step = strokes.fd_step;
  s.gradient_tol = strokes.gradient_tol;
  s.max_iterations = strokes.max_iterations;
  s.saturation_margin = strokes.saturation_margin;
  s.warm_start = strokes.warm_start;
  return s;
}

sensor::ExperimentSettings PipelineConfig::sensor_settings() const {
  sensor::ExperimentSettings s;
  s.bins = sensor.bins;
  s.f_lo = sensor.f_lo;
  s.f_hi_fraction = sensor.f_hi_fraction;
  s.realizations = sensor.realizations;
  s.periods = sensor.periods;
  s.transient_periods = sensor.transient_periods;
  s.excitation_rms = sensor.excitation_rms;
  s.clamp_hold = sensor.clamp_hold;
  s.settle_seconds = sensor.settle_seconds;
  s.model_order = sensor.model_order;
  s.fit.tolerance = sensor.fit_tolerance;
  s.seed = seed + 6;
  return s;
}

ilc::IlcSettings PipelineConfig::ilc_settings(double drive_frequency) const {
  ilc::IlcSettings s;
  s.drive_frequency = drive_frequency;
  s.trials = ilc.trials;
  s.nodes = ilc.nodes;
  s.steps_per_trial = ilc.steps_per_trial;
  s.excluded_steps = ilc.excluded_steps;
  s.seed_policy = ilc.seed_policy == "per-trial" ? ilc::SeedPolicy::PerTrial : ilc::SeedPolicy::Fixed;
  return s;
}

PipelineConfig parse(std::string_view json_text) {
  json given;
  try {
    given = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  if (!given.is_object()) throw ConfigError("top level must be an object");
  check_keys(json(PipelineConfig{}), given, "");
  PipelineConfig cfg;
  try {
    cfg = given.get<PipelineConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string to_json(const PipelineConfig& cfg) { return json(cfg).dump(2) + "\n"; }

void save(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(cfg);
}

std::string subset_json(const PipelineConfig& cfg, std::span<const std::string_view> keys) {
  const json all(cfg);
  json sub = json::object();
  for (std::string_view k : keys) sub[std::string(k)] = all.at(std::string(k));
  return sub.dump();
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::uint64_t h = fnv1a({});
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return hex(h);
}

}  // namespace piezo::config
