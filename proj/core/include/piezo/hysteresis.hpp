#pragma once

#include "piezo/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace piezo::hyst {

struct FrequencyGrid {
  double f_min = 0.0;
  double f_max = 0.0;
  std::size_t count = 0;
  std::vector<double> positive;  // ascending

  // Drive order used for data collection: +f1, -f1, +f2, -f2, ...
  std::vector<double> signed_schedule() const;
};

FrequencyGrid frequency_grid(double f_min, double f_max, std::size_t count);

// m = |i/udot|, or nothing when |udot| is below the exclusion threshold.
std::optional<double> observed_gain(double current, double rate, double threshold);

struct HysteresisSample {
  double t = 0.0;         // s
  double rate = 0.0;      // V/s, signed
  double absement = 0.0;  // V, value before the step
  double current = 0.0;   // A
  Direction direction = Direction::Plus;
  bool included = false;
  double gain = 0.0;  // observation when included
};

struct HysteresisDataset {
  Element element = Element::S1;
  double threshold = 0.0;  // V/s
  std::vector<HysteresisSample> samples;

  // Sets threshold to 1% of the median |udot| and recomputes inclusion.
  void apply_exclusion(double fraction = 0.01);
  std::size_t included_count(Direction d) const;
};

using Datasets = PerElement<HysteresisDataset>;

void write_datasets_csv(const Datasets& data, const std::filesystem::path& path);
Datasets read_datasets_csv(const std::filesystem::path& path);

struct Point {
  double rate = 0.0;      // |udot|
  double absement = 0.0;  // u_a
};

double kernel(Point x, Point y, double sigma_f2, double ell_rate, double ell_absement);

struct KernelSetup {
  std::vector<Point> centers;
  double sigma_f2 = 1.0;
  double ell_rate = 1.0;
  double ell_absement = 1.0;
  std::optional<double> ridge;  // nullopt selects the trace-scaled default
  double ridge_factor = 1e-8;
  std::size_t max_samples = 16000;  // per direction; larger sets are evenly strided
};

// Regular grid x grid centres over the bounding box of the included samples,
// length scales of half the centre spacing and signal variance of the observations.
KernelSetup default_kernel_setup(const HysteresisDataset& data, std::size_t grid = 12);

struct KernelModel {
  Element element = Element::S1;
  std::vector<Point> centers;
  double sigma_f2 = 1.0;
  double ell_rate = 1.0;
  double ell_absement = 1.0;
  PerDirection<Eigen::VectorXd> weights;
  PerDirection<double> offset{};  // unpenalised constant term
  PerDirection<double> ridge{};
  PerDirection<std::size_t> samples_used{};

  double eval(Point x, Direction d) const;
};

KernelModel fit_model(const HysteresisDataset& data, const KernelSetup& setup);

// Gain h1 + h2 * u_a^h3, fitted per direction.
struct RambergOsgood {
  double h1 = 0.0, h2 = 0.0, h3 = 1.0;
  double eval(double absement) const;
};

struct RambergOsgoodFit {
  PerDirection<RambergOsgood> params{};
};

RambergOsgood fit_ramberg_osgood(const std::vector<double>& absement, const std::vector<double>& gain,
                                 double h3_min = 0.05, double h3_max = 2.0);
RambergOsgoodFit fit_ramberg_osgood(const HysteresisDataset& data);

// Root-mean-square residual over included samples of both directions.
double residual_rms(const HysteresisDataset& data, const KernelModel& model);
double residual_rms(const HysteresisDataset& data, const RambergOsgoodFit& model);

class LookupTable2D {
 public:
  LookupTable2D() = default;
  // values are indexed [rate_index * absement_axis.size() + absement_index]
  LookupTable2D(std::vector<double> rate_axis, std::vector<double> absement_axis, std::vector<double> values);

  double eval(double rate, double absement) const;
  double node(std::size_t i, std::size_t j) const { return values_[i * absement_axis_.size() + j]; }
  const std::vector<double>& rate_axis() const { return rate_axis_; }
  const std::vector<double>& absement_axis() const { return absement_axis_; }
  const std::vector<double>& values() const { return values_; }
  double min_value() const;
  double max_value() const;
  LookupTable2D scaled(double factor) const;

 private:
  std::vector<double> rate_axis_;
  std::vector<double> absement_axis_;
  std::vector<double> values_;
};

std::vector<double> linear_axis(double lo, double hi, std::size_t n);

// Evaluates the model on every node; a non-positive node raises FitError.
PerDirection<LookupTable2D> build_lut(const KernelModel& model, const std::vector<double>& rate_axis,
                                      const std::vector<double>& absement_axis);

// Axes spanning [0, max visited] in both coordinates.
std::pair<std::vector<double>, std::vector<double>> default_lut_axes(const HysteresisDataset& data,
                                                                     std::size_t nodes = 64);

double lut_eval(const LookupTable2D& table, double rate, double absement);

using LutSet = PerElement<PerDirection<LookupTable2D>>;

void write_luts_csv(const LutSet& luts, const std::filesystem::path& path);
LutSet read_luts_csv(const std::filesystem::path& path);

}  // namespace piezo::hyst
