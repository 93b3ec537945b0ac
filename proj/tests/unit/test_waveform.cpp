#include "piezo/errors.hpp"
#include "piezo/profile.hpp"
#include "piezo/waveform.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace piezo;
using waveform::StrokeBounds;

namespace {

constexpr std::array<double, 6> kBreaks{0.0, kPi / 3.0, 2.0 * kPi / 3.0, kPi, 4.0 * kPi / 3.0, 5.0 * kPi / 3.0};

double circular_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

}  // namespace

class ZeroMeanRates : public ::testing::TestWithParam<std::tuple<double, double>> {};

TEST_P(ZeroMeanRates, IntegrateToZeroOverOnePeriod) {
  const auto [f, span] = GetParam();
  const std::size_t n = 6 * 20000;  // midpoints never land on a breakpoint
  for (Element e : kAllElements) {
    double acc = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double r = waveform::element_rate(e, kTwoPi * (static_cast<double>(k) + 0.5) / static_cast<double>(n), f, span);
      acc += r;
      scale = std::max(scale, std::abs(r));
    }
    EXPECT_LE(std::abs(acc / static_cast<double>(n)), 1e-12 * scale) << name(e);
  }
}

INSTANTIATE_TEST_SUITE_P(FrequenciesAndSpans, ZeroMeanRates,
                         ::testing::Combine(::testing::Values(0.3, 2.0, -3.0, 41.0), ::testing::Values(1e-6, 4.2e-6)));

TEST(Waveform, PiecewiseConstantWithBreakpointsAtSixths) {
  const double f = 2.0, span = 3e-6;
  for (Element e : kAllElements) {
    for (std::size_t i = 0; i < kBreaks.size(); ++i) {
      const double lo = kBreaks[i], hi = i + 1 < kBreaks.size() ? kBreaks[i + 1] : kTwoPi;
      const double at = waveform::element_rate(e, lo, f, span);
      for (int j = 1; j < 50; ++j) EXPECT_EQ(waveform::element_rate(e, lo + (hi - lo) * j / 50.0, f, span), at);
      EXPECT_EQ(waveform::element_rate(e, std::nextafter(hi, 0.0), f, span), at);  // half-open on the right
    }
  }
  // No breakpoint at pi for the shears or clamps: values across it agree.
  for (Element e : kAllElements)
    EXPECT_EQ(waveform::element_rate(e, std::nextafter(kPi, 0.0), f, span), waveform::element_rate(e, kPi, f, span));
}

TEST(Waveform, PeakToPeakPositionMatchesSpan) {
  const double f = 1.0, span = 2e-6;
  const std::size_t n = 60000;
  for (Element e : kAllElements) {
    double x = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x += waveform::element_rate(e, kTwoPi * (static_cast<double>(k) + 0.5) / static_cast<double>(n), f, span) / (f * n);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    EXPECT_NEAR((hi - lo) * kTwoPi, span, 1e-9 * span) << name(e);
  }
}

TEST(Waveform, ReversedFrequencyNegatesRates) {
  for (Element e : kAllElements)
    for (double a : {0.1, 1.2, 2.5, 3.5, 4.3, 5.5})
      EXPECT_EQ(waveform::element_rate(e, a, -3.0, 1e-6), -waveform::element_rate(e, a, 3.0, 1e-6));
}

TEST(Waveform, MoverRateFollowsEngagedShear) {
  waveform::StrokePlan plan;
  plan.fixed = {StrokeBounds{-1e-6, 1e-6}, StrokeBounds{-2e-6, 2e-6}, StrokeBounds{-1e-6, 1e-6}, StrokeBounds{-1e-6, 1e-6}};
  EXPECT_EQ(waveform::nominal_mover_rate(0.5, 2.0, plan), waveform::element_rate(Element::S2, 0.5, 2.0, 4e-6));
  EXPECT_EQ(waveform::nominal_mover_rate(4.0, 2.0, plan), waveform::element_rate(Element::S1, 5.8, 2.0, 2e-6));
}

// Each step rounds by at most half an ulp of 2*pi, so the drift grows linearly;
// 1e-12 rad holds up to half a second at the default rate.
TEST(CommutationAngle, StepwiseAdvanceMatchesSingleShot) {
  const double ts = 1e-4;
  const double per_step = 0.5 * (std::nextafter(kTwoPi, 8.0) - kTwoPi);
  for (double f : {0.3, 2.0, -7.5, 99.0})
    for (double a0 : {0.0, 1.0, 6.2}) {
      double a = a0;
      for (std::size_t n = 1; n <= 20000; ++n) {
        a = waveform::advance_alpha(a, f, ts);
        ASSERT_GE(a, 0.0);
        ASSERT_LT(a, kTwoPi);
        if (n % 499 == 0 || n == 5000) {
          const long double two_pi = 2.0L * 3.141592653589793238462643383279502884L;
          long double single = std::fmod(static_cast<long double>(a0) + two_pi * f * static_cast<long double>(n) * ts, two_pi);
          if (single < 0) single += two_pi;
          const double err = circular_distance(a, static_cast<double>(single));
          if (n <= 5000) {
            EXPECT_LE(err, 1e-12) << "f=" << f << " n=" << n;
          }
          EXPECT_LE(err, static_cast<double>(n) * per_step + 1e-13) << "f=" << f << " n=" << n;
        }
      }
    }
}

TEST(CommutationAngle, WrapsAtBothEnds) {
  const double ts = 1e-4;
  const double d = 1e-3;
  EXPECT_NEAR(waveform::advance_alpha(kTwoPi - d, 5.0, ts), kTwoPi - d + kTwoPi * 5.0 * ts - kTwoPi, 1e-15);
  EXPECT_NEAR(waveform::advance_alpha(0.0, -2.0, ts), kTwoPi - kTwoPi * 2.0 * ts, 1e-15);
}

TEST(CommutationAngle, SequenceHoldsAngleBeforeEachAdvance) {
  const std::vector<double> schedule{2.0, 2.0, -1.0, 5.0};
  const auto a = waveform::alpha_sequence(schedule, 1e-3, 0.5);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0], 0.5);
  EXPECT_EQ(a[1], waveform::advance_alpha(0.5, 2.0, 1e-3));
  EXPECT_EQ(a[3], waveform::advance_alpha(a[2], -1.0, 1e-3));
}

TEST(Reference, IntegratesNominalMoverRate) {
  const auto plan = support::clipping_plan(1e-8);
  const std::vector<double> schedule(500, 3.0);
  const double ts = 1e-4;
  const auto r = waveform::integrate_reference(schedule, plan, ts, nullptr, false);
  const auto a = waveform::alpha_sequence(schedule, ts);
  double acc = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    acc += ts * waveform::nominal_mover_rate(a[k], 3.0, plan);
    EXPECT_NEAR(r[k], acc, 1e-15);
  }
  EXPECT_THROW(waveform::integrate_reference(schedule, plan, ts, nullptr, true), ConfigError);
}

TEST(Reference, ProfileAddsToShearsOfMatchingDirectionOnly) {
  const auto plan = support::clipping_plan(1e-8);
  CompensationProfile plus = CompensationProfile::zero(6, Direction::Plus, 2.0);
  plus.coefficients = {1, 2, 3, 4, 5, 6};
  const double a = 1.3;
  const auto base = waveform::nominal_waveform(a, 4.0, plan);
  const auto mod = waveform::modified_shear_reference(a, 4.0, plan, &plus, nullptr);
  const double c = plus.rate(a, 4.0);
  EXPECT_DOUBLE_EQ(c, 2.0 * plus.value(a));
  EXPECT_EQ(mod[0], base[0] + c);
  EXPECT_EQ(mod[1], base[1] + c);
  EXPECT_EQ(mod[2], base[2]);
  EXPECT_EQ(mod[3], base[3]);
  const auto neg = waveform::modified_shear_reference(a, -4.0, plan, &plus, nullptr);
  EXPECT_EQ(neg, waveform::nominal_waveform(a, -4.0, plan));
}

TEST(Profile, InterpolatesNodesAndWrapsAround) {
  CompensationProfile p = CompensationProfile::zero(8, Direction::Minus);
  for (std::size_t i = 0; i < 8; ++i) p.coefficients[i] = std::sin(static_cast<double>(i));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(p.value(p.spacing() * static_cast<double>(i)), p.coefficients[i]);
  EXPECT_NEAR(p.value(std::nextafter(kTwoPi, 0.0)), p.coefficients[0], 1e-12);
  EXPECT_NEAR(p.value(7.5 * p.spacing()), 0.5 * (p.coefficients[7] + p.coefficients[0]), 1e-15);
  EXPECT_EQ(p.rate(1.0, 10.0), p.value(1.0));  // no reference frequency, no scaling
}

TEST(StrokeTable, InterpolatesAndClampsToEdges) {
  waveform::StrokeLUT lut;
  lut.frequencies = {1.0, 2.0, 4.0};
  for (auto& col : lut.entries) col = {StrokeBounds{-1.0, 1.0}, StrokeBounds{-2.0, 3.0}, StrokeBounds{-4.0, 5.0}};
  lut.validate();
  const StrokeBounds mid = lut.lookup(Element::C1, 1.5);
  EXPECT_DOUBLE_EQ(mid.r_min, -1.5);
  EXPECT_DOUBLE_EQ(mid.r_max, 2.0);
  EXPECT_EQ(lut.lookup(Element::S1, 0.1).r_max, 1.0);
  EXPECT_EQ(lut.lookup(Element::S1, 50.0).r_min, -4.0);
  EXPECT_EQ(lut.lookup(Element::S2, -2.0).r_max, 3.0);  // magnitude of the drive frequency
  const auto scaled = lut.scaled({2.0, 1.0, 1.0, 1.0});
  EXPECT_EQ(scaled.lookup(Element::S1, 2.0).r_max, 6.0);

  waveform::StrokeLUT bad = lut;
  bad.frequencies = {1.0, 1.0, 4.0};
  EXPECT_THROW(bad.validate(), ParameterError);
  bad = lut;
  bad.entries[2][1] = {1.0, 1.0};
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(StrokeTable, CsvRoundTripIsExact) {
  support::TempDir dir("strokes");
  waveform::StrokeLUT lut;
  lut.frequencies = {0.3, 1.0 / 3.0, 7.0};
  for (std::size_t e = 0; e < kElementCount; ++e)
    for (double f : lut.frequencies) lut.entries[e].push_back({-f * 1e-7 / 3.0, (e + 1) * std::sqrt(f) * 1e-6});
  lut.write_csv(dir / "strokes.csv");
  const auto back = waveform::StrokeLUT::read_csv(dir / "strokes.csv");
  EXPECT_EQ(back.frequencies, lut.frequencies);
  for (std::size_t e = 0; e < kElementCount; ++e)
    for (std::size_t i = 0; i < lut.frequencies.size(); ++i) {
      EXPECT_EQ(back.entries[e][i].r_min, lut.entries[e][i].r_min);
      EXPECT_EQ(back.entries[e][i].r_max, lut.entries[e][i].r_max);
    }
}
