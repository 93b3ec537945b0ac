#include "piezo/metrics.hpp"

#include "piezo/errors.hpp"
#include "piezo/types.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace piezo::metrics {

double rmsd(std::span<const double> e) {
  if (e.empty()) throw ParameterError("rmsd of an empty sequence");
  const double n = static_cast<double>(e.size());
  const double mean = std::accumulate(e.begin(), e.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : e) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

std::vector<StepSegment> step_segments(std::span<const double> alphas, double drive_frequency, std::size_t min_length) {
  std::vector<std::size_t> cuts{0};
  for (std::size_t k = 1; k < alphas.size(); ++k) {
    const bool wrapped = drive_frequency > 0.0 ? alphas[k] < alphas[k - 1] : alphas[k] > alphas[k - 1];
    if (wrapped) cuts.push_back(k);
  }
  cuts.push_back(alphas.size());
  std::vector<StepSegment> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] - cuts[i] >= std::max<std::size_t>(min_length, 1)) out.push_back({cuts[i], cuts[i + 1]});
  return out;
}

std::vector<double> per_step_rmsd(std::span<const double> e, std::span<const StepSegment> steps) {
  std::vector<double> out;
  for (const StepSegment& s : steps) {
    if (s.end > e.size() || s.begin >= s.end) throw ParameterError("step segment outside the record");
    out.push_back(rmsd(e.subspan(s.begin, s.end - s.begin)));
  }
  return out;
}

std::vector<SpectrumPoint> reverse_cumulative_spectrum(std::span<const double> e, double sample_rate) {
  if (e.size() < 2) throw ParameterError("spectrum needs at least two samples");
  const std::size_t n = e.size();
  const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(n);
  std::vector<double> x(e.begin(), e.end());
  for (double& v : x) v -= mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum_bins;
  fft.fwd(spectrum_bins, x);
  const std::size_t half = n / 2;
  // One-sided variance contribution of each bin (Parseval).
  std::vector<double> power(half + 1, 0.0);
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  for (std::size_t k = 1; k <= half; ++k) {
    const bool nyquist = n % 2 == 0 && k == half;
    power[k] = (nyquist ? 1.0 : 2.0) * std::norm(spectrum_bins[k]) / nn;
  }
  std::vector<SpectrumPoint> out(half + 1);
  double acc = 0.0;
  for (std::size_t k = half + 1; k-- > 0;) {
    acc += power[k];
    out[k] = {static_cast<double>(k) * sample_rate / static_cast<double>(n), std::sqrt(acc)};
  }
  return out;
}

std::vector<double> alpha_binned(std::span<const double> e, std::span<const double> alphas,
                                 std::span<const StepSegment> steps, std::size_t bins) {
  if (bins == 0) throw ParameterError("need at least one angle bin");
  std::vector<double> sum(bins, 0.0), count(bins, 0.0);
  for (const StepSegment& s : steps) {
    const auto seg = e.subspan(s.begin, s.end - s.begin);
    const double mean = std::accumulate(seg.begin(), seg.end(), 0.0) / static_cast<double>(seg.size());
    for (std::size_t k = s.begin; k < s.end; ++k) {
      auto b = static_cast<std::size_t>(alphas[k] / kTwoPi * static_cast<double>(bins));
      b = std::min(b, bins - 1);
      sum[b] += e[k] - mean;
      count[b] += 1.0;
    }
  }
  for (std::size_t b = 0; b < bins; ++b) sum[b] = count[b] > 0.0 ? sum[b] / count[b] : 0.0;
  return sum;
}

}  // namespace piezo::metrics
