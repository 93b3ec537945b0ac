#pragma once

#include "piezo/controller.hpp"
#include "piezo/waveform.hpp"

#include <span>
#include <vector>

namespace piezo::stroke {

using waveform::StrokeBounds;
using waveform::StrokeLUT;

// The anti-windup control law of one element, detached from the plant.
struct ElementLaw {
  const control::GainModel* model = nullptr;
  double u_min = -135.0;
  double u_max = 135.0;
  double sample_time = 1e-4;
  double guard_fraction = 1e-3;
};

struct VoltageTrajectory {
  std::vector<double> command;    // clamped output
  std::vector<double> candidate;  // unclamped law output per sample
  // Clamped output plus the overshoot accumulated while saturated; equals the
  // command whenever the bounds are inactive.
  std::vector<double> virtual_voltage;
  std::vector<double> alpha;
  std::size_t period = 0;  // floor(F_s/|f|)
};

// Runs the law from u = alpha = 0 for `periods` * floor(F_s/|f|) samples.
VoltageTrajectory simulate_voltage_trajectory(double drive_frequency, StrokeBounds strokes, Element e,
                                              const ElementLaw& law, std::size_t periods = 2);

// Same law along an explicit angle sequence.
VoltageTrajectory simulate_along(std::span<const double> alphas, double drive_frequency, StrokeBounds strokes,
                                 Element e, const ElementLaw& law);

struct ExtremaSets {
  std::vector<std::size_t> top;
  std::vector<std::size_t> bottom;
};

// Indices in the second period [P, 2P) attaining its max/min within 1e-12 V.
ExtremaSets extrema_sets(std::span<const double> u, std::size_t period_samples, double tie_tolerance = 1e-12);

double objective(StrokeBounds strokes, double drive_frequency, Element e, const ElementLaw& law);

struct OptimizerSettings {
  double fd_step = 1e-9;         // m
  double gradient_tol = 1e-6;    // on the gradient normalized by J(init) and the initial span
  double step_tol = 1e-12;       // m
  std::size_t max_iterations = 200;
  double saturation_margin = 0.01;  // relative span increase applied after saturation is ensured
  bool warm_start = true;
  bool parallel = false;  // cold-start frequencies concurrently (ignored with warm_start)
};

struct OptimizeResult {
  StrokeBounds optimum;  // minimizer of the objective
  StrokeBounds applied;  // widened until both bounds clip every cycle, plus margin
  double j_init = 0.0;
  double j_opt = 0.0;
  std::size_t iterations = 0;
  bool used_simplex = false;
};

OptimizeResult optimize_bounds(double drive_frequency, Element e, const ElementLaw& law, StrokeBounds init,
                               const OptimizerSettings& settings = {});

// True when both bounds are exceeded by the law in every full commutation cycle
// (cycles delimited by angle wraparound) over `cycles` cycles.
bool saturates_every_cycle(double drive_frequency, StrokeBounds strokes, Element e, const ElementLaw& law,
                           std::size_t cycles, std::size_t skip_cycles = 1);

// Stroke span of the constant-gain law that exactly reaches both bounds.
double constant_gain_span(double gain, double u_min, double u_max);

struct DriftReport {
  std::size_t cycles = 0;
  std::size_t samples_per_cycle = 0;
  bool saturated_every_cycle = true;
  double max_drift = 0.0;  // V, cycle mean against the reference cycle
  std::vector<double> cycle_means;
};

// Angle-synchronous run (round(F_s/|f|) samples per cycle) so cycle means are comparable;
// drift is measured from `reference_cycle` (0-based) onwards.
DriftReport drift_check(double drive_frequency, StrokeBounds strokes, Element e, const ElementLaw& law,
                        std::size_t cycles = 100, std::size_t reference_cycle = 2);

struct StrokeTableResult {
  StrokeLUT table;                          // applied strokes
  PerElement<std::vector<StrokeBounds>> optima;  // raw minimizers
};

// Optimizes every element at every positive frequency. `init` seeds the first
// (or every, for cold start) optimization.
StrokeTableResult build_stroke_lut(const std::vector<double>& frequencies, const PerElement<ElementLaw>& laws,
                                   const PerElement<StrokeBounds>& init, const OptimizerSettings& settings = {});

}  // namespace piezo::stroke
