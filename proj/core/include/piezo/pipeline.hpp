#pragma once

#include "piezo/config.hpp"
#include "piezo/experiment.hpp"
#include "piezo/hysteresis.hpp"
#include "piezo/ilc.hpp"
#include "piezo/sensor.hpp"
#include "piezo/stroke.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace piezo::pipeline {

// In execution order; each stage reads only stages listed before it.
enum class Stage { Collect, Fit, Strokes, Sensor, Ilc, Sweep, Certify };
inline constexpr std::array<Stage, 7> kAllStages{Stage::Collect, Stage::Fit,   Stage::Strokes, Stage::Sensor,
                                                 Stage::Ilc,     Stage::Sweep, Stage::Certify};

std::string_view name(Stage s);  // the CLI subcommand
Stage parse_stage(std::string_view s);
std::vector<Stage> upstream(Stage s);  // direct inputs
std::vector<Stage> closure(Stage target);  // target and everything it needs, in execution order

struct StageRecord {
  Stage stage = Stage::Collect;
  std::string key;  // hex FNV-1a of the config subset and upstream keys
  std::vector<std::pair<std::string, std::string>> artifacts;  // file name, content hash
  bool reused = false;
  double seconds = 0.0;
};

struct FitSummary {
  Element element = Element::S1;
  double kernel_rms = 0.0;
  double ramberg_osgood_rms = 0.0;
  PerDirection<std::size_t> samples{};
};

struct Certification {
  ilc::Certificates certificates;
  double drive_frequency = 0.0;  // one full cycle over the horizon
  double frequency_sup = 0.0;    // sup |Q (1 - L G)| against the true sensor path
};

struct Artifacts {
  std::optional<hyst::Datasets> data;
  std::optional<hyst::LutSet> luts;
  std::vector<FitSummary> fit_summary;
  std::optional<waveform::StrokeLUT> strokes;  // on the observed-gain scale; multiply by xi_hat
  std::optional<sensor::SensorModel> sensor_model;
  std::optional<PerElement<double>> current_gains;
  std::optional<PerDirection<CompensationProfile>> profiles;
  PerDirection<std::vector<double>> ilc_rmsd;
  std::optional<std::vector<experiment::ExperimentReport>> reports;
  std::optional<Certification> certification;

  experiment::StrategyArtifacts strategy_inputs() const;
};

struct Options {
  bool use_cache = true;
  std::function<void(const std::string&)> log;  // progress lines; empty is silent
};

struct RunResult {
  Artifacts artifacts;
  std::vector<StageRecord> stages;
  std::string config_hash;

  const StageRecord& record(Stage s) const;
};

// Keys of every stage for this config, in kAllStages order.
std::array<std::string, kAllStages.size()> stage_keys(const config::PipelineConfig& cfg);

// Runs `target` and the stages it depends on, writing config.json, stage
// artifacts and manifest.json into `out`. A stage whose key and artifact hashes
// match the manifest already in `out` is loaded instead of recomputed. Failures
// are rethrown as piezo::Error named after the stage; artifacts of finished
// stages stay on disk.
RunResult run(const config::PipelineConfig& cfg, const std::filesystem::path& out, Stage target,
              const Options& options = {});

// All stages.
RunResult unified_pipeline(const config::PipelineConfig& cfg, const std::filesystem::path& out,
                           const Options& options = {});

}  // namespace piezo::pipeline
