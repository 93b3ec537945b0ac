#pragma once

#include "piezo/controller.hpp"
#include "piezo/drive.hpp"
#include "piezo/hysteresis.hpp"
#include "piezo/lti.hpp"
#include "piezo/metrics.hpp"
#include "piezo/plant.hpp"
#include "piezo/profile.hpp"
#include "piezo/waveform.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace piezo::experiment {

// S1 constant gains, S2 gain and stroke tables, S3 tables plus learned profiles.
enum class Strategy { S1, S2, S3 };
inline constexpr std::array<Strategy, 3> kAllStrategies{Strategy::S1, Strategy::S2, Strategy::S3};

std::string_view name(Strategy s);
Strategy parse_strategy(std::string_view s);

struct ReportRow {
  double frequency = 0.0;  // Hz, magnitude
  std::vector<double> step_rmsd;  // m
  double mean = 0.0;
  double band = 0.0;  // two standard deviations of step_rmsd

  double lower() const { return mean - band; }
  double upper() const { return mean + band; }
};

struct ExperimentReport {
  Strategy strategy = Strategy::S1;
  Direction direction = Direction::Plus;
  std::vector<ReportRow> rows;
  std::map<std::string, std::string> provenance;  // config hash, seed, upstream stage keys

  double mean_rmsd() const;
};

// What each strategy needs; missing pieces are reported by stage name.
struct StrategyArtifacts {
  std::optional<PerElement<double>> constant_gains;  // m/V, S1
  std::optional<hyst::LutSet> luts;                  // observed-gain tables, S2/S3
  std::optional<waveform::StrokeLUT> strokes;        // unscaled, S2/S3
  std::optional<PerElement<double>> current_gains;   // xi_hat
  std::optional<lti::TransferFunction> sensor_model; // G_hat, used for the reference
  std::optional<PerDirection<CompensationProfile>> profiles;  // S3
};

// Controller, waveforms and profiles a strategy drives the plant with.
struct StrategySetup {
  control::ControllerConfig controller;
  waveform::StrokePlan plan;
  control::ProfilePair profiles;
};

StrategySetup strategy_setup(Strategy s, const StrategyArtifacts& a, double amplifier_min, double amplifier_max,
                             double inset, double sample_time, double stroke_margin = 0.01);

// Constant gain per element: midpoint of the table range times xi_hat.
PerElement<double> midrange_gains(const hyst::LutSet& luts, const PerElement<double>& current_gains);

struct SweepSettings {
  std::vector<double> frequencies;  // Hz, positive
  std::vector<Direction> directions{Direction::Plus, Direction::Minus};
  std::vector<Strategy> strategies{Strategy::S1, Strategy::S2, Strategy::S3};
  double steps = 3.0;
  double lead_in_steps = 1.0;
  double amplifier_min = -150.0;
  double amplifier_max = 150.0;
  double inset = 0.05;
  double stroke_margin = 0.01;
  std::size_t threads = 0;  // 0: hardware concurrency
};

// Error of one constant-frequency run, with its step split.
struct CellRun {
  std::vector<double> alpha;
  std::vector<double> error;  // r - y, m
  std::vector<metrics::StepSegment> steps;  // measured steps only
  sim::Trace trace;
};

CellRun run_cell(const sim::PlantConfig& plant, const StrategySetup& setup, const lti::TransferFunction& sensor_model,
                 double drive_frequency, double steps, double lead_in_steps, bool keep_trace = false);

ReportRow summarize(double frequency, std::span<const double> step_rmsd);

// One report per (strategy, direction), rows in the order of `frequencies`.
// Cells run concurrently, each on its own plant instance.
std::vector<ExperimentReport> strategy_sweep(const sim::PlantConfig& plant, const StrategyArtifacts& artifacts,
                                             const SweepSettings& settings);

const ExperimentReport& find_report(std::span<const ExperimentReport> reports, Strategy s, Direction d);

void write_reports_csv(std::span<const ExperimentReport> reports, const std::filesystem::path& path);
std::vector<ExperimentReport> read_reports_csv(const std::filesystem::path& path);

std::vector<double> log_grid(double f_min, double f_max, std::size_t count);

}  // namespace piezo::experiment
