#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace piezo::metrics {

// Population standard deviation about the sequence mean, in the units of e.
double rmsd(std::span<const double> e);

struct StepSegment {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

// Splits a record into commutation steps at angle wraparounds. Segments shorter
// than `min_length` samples (a partial step at either end) are dropped.
std::vector<StepSegment> step_segments(std::span<const double> alphas, double drive_frequency, std::size_t min_length);

// RMSD of each step with its own mean removed.
std::vector<double> per_step_rmsd(std::span<const double> e, std::span<const StepSegment> steps);

struct SpectrumPoint {
  double frequency = 0.0;  // Hz
  double amplitude = 0.0;  // RMS of all content at or above `frequency`
};

// Reverse cumulative amplitude spectrum of the mean-removed sequence; the first
// point (0 Hz) equals rmsd(e).
std::vector<SpectrumPoint> reverse_cumulative_spectrum(std::span<const double> e, double sample_rate);

// Mean-removed per-step error averaged over steps in `bins` uniform angle bins.
std::vector<double> alpha_binned(std::span<const double> e, std::span<const double> alphas,
                                 std::span<const StepSegment> steps, std::size_t bins);

}  // namespace piezo::metrics
