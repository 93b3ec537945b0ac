#include "piezo/errors.hpp"
#include "piezo/metrics.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace piezo;

namespace {

double population_std(const std::vector<double>& v) {
  long double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<long double>(v.size());
  long double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return static_cast<double>(std::sqrt(ss / static_cast<long double>(v.size())));
}

std::vector<double> sawtooth_alphas(std::size_t period, std::size_t n, std::size_t offset = 0) {
  std::vector<double> a(n);
  for (std::size_t k = 0; k < n; ++k) a[k] = kTwoPi * static_cast<double>((k + offset) % period) / static_cast<double>(period);
  return a;
}

}  // namespace

TEST(Rmsd, MatchesPopulationStandardDeviation) {
  const auto e = support::gaussian(1000, 4, 3e-9);
  EXPECT_NEAR(metrics::rmsd(e), population_std(e), 1e-12 * population_std(e));
}

TEST(Rmsd, IgnoresOffsetAndIsNonNegative) {
  const std::vector<double> c(50, 7.0);
  EXPECT_EQ(metrics::rmsd(c), 0.0);
  auto e = support::gaussian(200, 5);
  const double base = metrics::rmsd(e);
  for (double& x : e) x += 10.0;
  EXPECT_NEAR(metrics::rmsd(e), base, 1e-12);
  EXPECT_THROW(metrics::rmsd(std::vector<double>{}), ParameterError);
}

TEST(StepSegments, SplitsAtWraparoundAndDropsPartialSteps) {
  const auto a = sawtooth_alphas(100, 380, 30);  // 70-sample head, 3 full steps, 10-sample tail
  const auto all = metrics::step_segments(a, 1.0, 1);
  ASSERT_EQ(all.size(), 5u);
  EXPECT_EQ(all[0].end, 70u);
  const auto full = metrics::step_segments(a, 1.0, 98);
  ASSERT_EQ(full.size(), 3u);
  for (const auto& s : full) EXPECT_EQ(s.end - s.begin, 100u);
}

TEST(StepSegments, NegativeDirectionWrapsUpward) {
  std::vector<double> a = sawtooth_alphas(50, 200);
  std::reverse(a.begin(), a.end());
  const auto s = metrics::step_segments(a, -1.0, 45);
  ASSERT_EQ(s.size(), 4u);
  for (const auto& seg : s) EXPECT_EQ(seg.end - seg.begin, 50u);
}

TEST(PerStepRmsd, RemovesEachStepMean) {
  const auto a = sawtooth_alphas(40, 160);
  auto e = support::gaussian(160, 6);
  const auto steps = metrics::step_segments(a, 1.0, 40);
  const auto before = metrics::per_step_rmsd(e, steps);
  for (std::size_t s = 0; s < steps.size(); ++s)
    for (std::size_t k = steps[s].begin; k < steps[s].end; ++k) e[k] += 100.0 * static_cast<double>(s);
  const auto after = metrics::per_step_rmsd(e, steps);
  for (std::size_t s = 0; s < steps.size(); ++s) EXPECT_NEAR(after[s], before[s], 1e-12);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    std::vector<double> seg(e.begin() + static_cast<std::ptrdiff_t>(steps[s].begin),
                            e.begin() + static_cast<std::ptrdiff_t>(steps[s].end));
    EXPECT_NEAR(after[s], population_std(seg), 1e-12);
  }
}

class SpectrumProperty : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(SpectrumProperty, MonotoneAndStartsAtRmsd) {
  std::mt19937_64 rng(GetParam());
  const std::size_t n = 64 + rng() % 900;
  auto e = support::gaussian(n, GetParam() + 100, 1e-8);
  for (std::size_t k = 0; k < n; ++k) e[k] += 3e-8 * std::sin(0.01 * static_cast<double>(k * (GetParam() % 7 + 1)));
  const auto s = metrics::reverse_cumulative_spectrum(e, 10000.0);
  ASSERT_EQ(s.size(), n / 2 + 1);
  EXPECT_NEAR(s.front().amplitude, metrics::rmsd(e), 1e-9 * metrics::rmsd(e));
  for (std::size_t k = 1; k < s.size(); ++k) {
    EXPECT_LE(s[k].amplitude, s[k - 1].amplitude);
    EXPECT_GT(s[k].frequency, s[k - 1].frequency);
  }
  EXPECT_GE(s.back().amplitude, 0.0);
}

INSTANTIATE_TEST_SUITE_P(RandomSignals, SpectrumProperty, ::testing::Range<std::uint64_t>(1, 21));

TEST(Spectrum, PureToneSitsAtItsBin) {
  const std::size_t n = 1000;
  std::vector<double> e(n);
  for (std::size_t k = 0; k < n; ++k) e[k] = std::sin(kTwoPi * 50.0 * static_cast<double>(k) / static_cast<double>(n));
  const auto s = metrics::reverse_cumulative_spectrum(e, 1000.0);
  EXPECT_NEAR(s[50].amplitude, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s[51].amplitude, 0.0, 1e-9);
}

TEST(AlphaBinned, StepOffsetsVanish) {
  std::vector<double> a(360 * 3);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = kTwoPi * (static_cast<double>(k % 360) + 0.5) / 360.0;  // off the bin edges
  std::vector<double> e(a.size());
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = std::cos(a[k]) + static_cast<double>(k / 360);
  const auto steps = metrics::step_segments(a, 1.0, 360);
  const auto b = metrics::alpha_binned(e, a, steps, 36);
  for (std::size_t i = 0; i < b.size(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 10; ++j) mean += std::cos(a[i * 10 + j]);
    EXPECT_NEAR(b[i], mean / 10.0, 1e-12);
  }
}
