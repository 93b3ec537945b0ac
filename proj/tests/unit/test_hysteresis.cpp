#include "piezo/errors.hpp"
#include "piezo/hysteresis.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace piezo;
using namespace piezo::hyst;

namespace {

HysteresisDataset uniform_dataset(std::size_t per_direction, std::uint64_t seed, double rate_hi = 1e5,
                                  double absement_hi = 250.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rate(0.02 * rate_hi, rate_hi), abs(0.0, absement_hi);
  HysteresisDataset data;
  for (Direction d : kBothDirections)
    for (std::size_t i = 0; i < per_direction; ++i) {
      HysteresisSample s;
      s.direction = d;
      s.rate = d == Direction::Plus ? rate(rng) : -rate(rng);
      s.absement = abs(rng);
      s.included = true;
      data.samples.push_back(s);
    }
  return data;
}

// Dense normal equations with the offset unpenalised, solved by Gaussian
// elimination with partial pivoting in long double.
std::vector<long double> normal_equations(const HysteresisDataset& data, const KernelSetup& setup, Direction d,
                                          double ridge) {
  const std::size_t m = setup.centers.size(), p = m + 1;
  std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0.0L));
  for (const HysteresisSample& s : data.samples) {
    if (!s.included || s.direction != d) continue;
    std::vector<long double> row(p);
    for (std::size_t c = 0; c < m; ++c)
      row[c] = kernel({std::abs(s.rate), s.absement}, setup.centers[c], setup.sigma_f2, setup.ell_rate, setup.ell_absement);
    row[m] = 1.0L;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) a[i][j] += row[i] * row[j];
      a[i][p] += row[i] * s.gain;
    }
  }
  for (std::size_t i = 0; i < m; ++i) a[i][i] += ridge;
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<long double> x(p);
  for (std::size_t i = 0; i < p; ++i) x[i] = a[i][p] / a[i][i];
  return x;
}

}  // namespace

TEST(FrequencyGrid, LogSpacedWithExactEndpointsAndAlternatingSigns) {
  const FrequencyGrid g = frequency_grid(0.3, 100.0, 52);
  ASSERT_EQ(g.positive.size(), 52u);
  EXPECT_EQ(g.positive.front(), 0.3);
  EXPECT_EQ(g.positive.back(), 100.0);
  const double ratio = g.positive[1] / g.positive[0];
  for (std::size_t i = 1; i < g.positive.size(); ++i) EXPECT_NEAR(g.positive[i] / g.positive[i - 1], ratio, 1e-12);
  const auto sched = g.signed_schedule();
  ASSERT_EQ(sched.size(), 104u);
  for (std::size_t i = 0; i < g.positive.size(); ++i) {
    EXPECT_EQ(sched[2 * i], g.positive[i]);
    EXPECT_EQ(sched[2 * i + 1], -g.positive[i]);
  }
  EXPECT_THROW(frequency_grid(1.0, 1.0, 5), ParameterError);
  EXPECT_THROW(frequency_grid(1.0, 2.0, 1), ParameterError);
}

TEST(Exclusion, ThresholdIsOnePercentOfMedianRate) {
  HysteresisDataset data;
  for (double r : {-500.0, 1.0, 2.0, 4.9, 5.0, 700.0, 600.0, 800.0, -1000.0}) {
    HysteresisSample s;
    s.rate = r;
    s.current = 1e-6 * r;
    s.direction = r >= 0.0 ? Direction::Plus : Direction::Minus;
    data.samples.push_back(s);
  }
  data.apply_exclusion();
  EXPECT_DOUBLE_EQ(data.threshold, 5.0);  // median |rate| is 500
  for (const auto& s : data.samples) {
    EXPECT_EQ(s.included, std::abs(s.rate) >= 5.0) << s.rate;
    if (s.included) {
      EXPECT_DOUBLE_EQ(s.gain, 1e-6);
    }
  }
  EXPECT_EQ(data.included_count(Direction::Minus), 2u);
  EXPECT_FALSE(observed_gain(1.0, 0.0, 0.0).has_value());
  EXPECT_DOUBLE_EQ(*observed_gain(-2.0, 4.0, 1.0), 0.5);
}

TEST(KernelFit, MatchesDenseNormalEquations) {
  HysteresisDataset data = uniform_dataset(50, 11);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> noise(0.9, 1.1);
  for (auto& s : data.samples) s.gain = (1.0 + 1e-2 * s.absement) * noise(rng);
  KernelSetup setup = default_kernel_setup(data, 3);  // 9 centres
  ASSERT_LE(setup.centers.size(), 10u);
  setup.sigma_f2 = 1.0;  // unit-scale columns keep the dense oracle well conditioned
  setup.ridge = 0.3;
  const KernelModel model = fit_model(data, setup);
  for (Direction d : kBothDirections) {
    const auto ref = normal_equations(data, setup, d, *setup.ridge);
    const std::size_t m = setup.centers.size();
    long double scale = 0.0L;
    for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, std::abs(ref[i]));
    for (std::size_t i = 0; i < m; ++i)
      EXPECT_NEAR(model.weights[index(d)][static_cast<Eigen::Index>(i)], static_cast<double>(ref[i]),
                  1e-10 * static_cast<double>(scale));
    EXPECT_NEAR(model.offset[index(d)], static_cast<double>(ref[m]), 1e-10 * std::abs(static_cast<double>(ref[m])));
  }
}

TEST(KernelFit, RecoversModelClassExactlyPerDirection) {
  HysteresisDataset data = uniform_dataset(400, 12);
  KernelSetup setup = default_kernel_setup(data, 5);
  setup.sigma_f2 = 1.0;
  setup.ridge = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PerDirection<std::vector<double>> w;
  for (auto& v : w) {
    v.resize(setup.centers.size());
    for (double& x : v) x = 1e-9 * u(rng);
  }
  const PerDirection<double> offset{2e-8, 3e-8};
  auto truth = [&](Point x, Direction d) {
    double g = offset[index(d)];
    for (std::size_t i = 0; i < setup.centers.size(); ++i)
      g += w[index(d)][i] * kernel(x, setup.centers[i], setup.sigma_f2, setup.ell_rate, setup.ell_absement);
    return g;
  };
  for (auto& s : data.samples) s.gain = truth({std::abs(s.rate), s.absement}, s.direction);
  const KernelModel model = fit_model(data, setup);
  for (Direction d : kBothDirections) {
    for (std::size_t i = 0; i < setup.centers.size(); ++i)
      EXPECT_NEAR(model.weights[index(d)][static_cast<Eigen::Index>(i)], w[index(d)][i], 1e-15);
    EXPECT_NEAR(model.offset[index(d)], offset[index(d)], 1e-15);
    for (const Point x : {Point{3e3, 10.0}, Point{5e4, 120.0}, Point{9e4, 240.0}})
      EXPECT_NEAR(model.eval(x, d), truth(x, d), 1e-15);
  }
  EXPECT_NEAR(residual_rms(data, model), 0.0, 1e-16);
}

TEST(KernelFit, TooFewSamplesIsAFitError) {
  HysteresisDataset data = uniform_dataset(5, 13);
  for (auto& s : data.samples) s.gain = 1e-8;
  EXPECT_THROW(fit_model(data, default_kernel_setup(data, 3)), FitError);
}

TEST(RambergOsgood, RecoversNoiselessParameters) {
  std::vector<double> a, g;
  const RambergOsgood truth{2e-8, 3e-10, 0.65};
  for (int i = 0; i < 400; ++i) {
    a.push_back(0.6 * i);
    g.push_back(truth.eval(a.back()));
  }
  const RambergOsgood fit = fit_ramberg_osgood(a, g);
  EXPECT_NEAR(fit.h3, truth.h3, 1e-6);
  EXPECT_NEAR(fit.h1, truth.h1, 1e-6 * truth.h1);
  EXPECT_NEAR(fit.h2, truth.h2, 1e-5 * truth.h2);
  EXPECT_THROW(fit_ramberg_osgood({1.0, 1.0}, {2.0, 3.0}), FitError);
}

TEST(LookupTable, ReproducesBilinearFunctionsAndClampsOutside) {
  const auto ra = linear_axis(0.0, 10.0, 6), aa = linear_axis(0.0, 4.0, 5);
  auto f = [](double r, double a) { return 1.0 + 0.5 * r - 0.25 * a + 0.1 * r * a; };
  std::vector<double> v;
  for (double r : ra)
    for (double a : aa) v.push_back(f(r, a));
  const LookupTable2D t(ra, aa, v);
  for (double r = 0.0; r <= 10.0; r += 0.37)
    for (double a = 0.0; a <= 4.0; a += 0.29) EXPECT_NEAR(t.eval(r, a), f(r, a), 1e-13);
  EXPECT_EQ(t.eval(-5.0, 2.0), t.eval(0.0, 2.0));
  EXPECT_EQ(t.eval(50.0, 9.0), f(10.0, 4.0));
  EXPECT_EQ(lut_eval(t, 3.0, 1.0), t.eval(3.0, 1.0));
  EXPECT_EQ(t.min_value(), f(0.0, 4.0));
  EXPECT_EQ(t.scaled(2.0).node(1, 1), 2.0 * t.node(1, 1));
}

TEST(LookupTable, ContinuousAcrossCellEdges) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  const auto ra = linear_axis(0.0, 1e5, 9), aa = linear_axis(0.0, 300.0, 7);
  std::vector<double> v(ra.size() * aa.size());
  for (double& x : v) x = u(rng);
  const LookupTable2D t(ra, aa, v);
  for (std::size_t i = 1; i + 1 < ra.size(); ++i)
    for (double a = 0.0; a <= 300.0; a += 7.3) {
      const double below = t.eval(std::nextafter(ra[i], 0.0), a), above = t.eval(std::nextafter(ra[i], 1e9), a);
      EXPECT_NEAR(below, t.eval(ra[i], a), 1e-12);
      EXPECT_NEAR(above, t.eval(ra[i], a), 1e-12);
    }
  for (std::size_t j = 1; j + 1 < aa.size(); ++j)
    for (double r = 0.0; r <= 1e5; r += 3.1e3)
      EXPECT_NEAR(t.eval(r, std::nextafter(aa[j], 0.0)), t.eval(r, std::nextafter(aa[j], 1e9)), 1e-12);
}

TEST(LookupTable, BuildRejectsNonPositiveNodes) {
  KernelModel m;
  m.centers = {{0.0, 0.0}};
  m.weights = {Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 0.0)};
  m.offset = {0.5, 1.0};
  EXPECT_THROW(build_lut(m, linear_axis(0.0, 1.0, 3), linear_axis(0.0, 1.0, 3)), FitError);
}

TEST(LookupTable, DefaultAxesSpanTheVisitedRegion) {
  HysteresisDataset data = uniform_dataset(100, 14);
  for (auto& s : data.samples) s.gain = 1.0;
  const auto [ra, aa] = default_lut_axes(data, 16);
  double rmax = 0.0, amax = 0.0;
  for (const auto& s : data.samples) {
    rmax = std::max(rmax, std::abs(s.rate));
    amax = std::max(amax, s.absement);
  }
  EXPECT_EQ(ra.front(), 0.0);
  EXPECT_EQ(aa.front(), 0.0);
  EXPECT_EQ(ra.back(), rmax);
  EXPECT_EQ(aa.back(), amax);
  EXPECT_EQ(ra.size(), 16u);
}

TEST(HysteresisCsv, DatasetsAndTablesRoundTrip) {
  support::TempDir dir("hyst");
  Datasets data;
  for (Element e : kAllElements) {
    data[index(e)] = uniform_dataset(20, 20 + index(e));
    data[index(e)].element = e;
    for (auto& s : data[index(e)].samples) {
      s.current = 1e-8 * s.rate / 3.0;
      s.t = 1.0 / 7.0;
    }
    data[index(e)].apply_exclusion();
  }
  write_datasets_csv(data, dir / "data.csv");
  const Datasets back = read_datasets_csv(dir / "data.csv");
  for (Element e : kAllElements) {
    ASSERT_EQ(back[index(e)].samples.size(), data[index(e)].samples.size());
    EXPECT_EQ(back[index(e)].threshold, data[index(e)].threshold);
    for (std::size_t k = 0; k < data[index(e)].samples.size(); ++k) {
      const auto &a = data[index(e)].samples[k], &b = back[index(e)].samples[k];
      EXPECT_EQ(a.rate, b.rate);
      EXPECT_EQ(a.current, b.current);
      EXPECT_EQ(a.absement, b.absement);
      EXPECT_EQ(a.included, b.included);
      EXPECT_EQ(a.gain, b.gain);
      EXPECT_EQ(a.direction, b.direction);
    }
  }

  LutSet luts;
  for (Element e : kAllElements)
    for (Direction d : kBothDirections) {
      std::vector<double> v(12);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1e-8 * (1.0 + i / 3.0 + index(e) + 0.1 * index(d));
      luts[index(e)][index(d)] = LookupTable2D(linear_axis(0.0, 1e5 / 3.0, 3), linear_axis(0.0, 100.0 / 7.0, 4), v);
    }
  write_luts_csv(luts, dir / "luts.csv");
  const LutSet lb = read_luts_csv(dir / "luts.csv");
  for (Element e : kAllElements)
    for (Direction d : kBothDirections) {
      EXPECT_EQ(lb[index(e)][index(d)].values(), luts[index(e)][index(d)].values());
      EXPECT_EQ(lb[index(e)][index(d)].rate_axis(), luts[index(e)][index(d)].rate_axis());
      EXPECT_EQ(lb[index(e)][index(d)].absement_axis(), luts[index(e)][index(d)].absement_axis());
    }
}
