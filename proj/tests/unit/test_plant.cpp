#include "piezo/drive.hpp"
#include "piezo/errors.hpp"
#include "piezo/plant.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

using namespace piezo;

namespace {

sim::Trace drive(const sim::PlantConfig& p, double f, std::size_t n) {
  control::ClosedLoop loop(p, support::constant_controller(1e-8, p.sample_rate), support::clipping_plan(1e-8));
  sim::Trace tr;
  tr.sample_rate = p.sample_rate;
  loop.run(control::constant_schedule(f, n),
           [&](const control::DriveSample& d) { tr.append(d.t, d.alpha, *d.state, *d.plant, 0.0); });
  return tr;
}

// Absement from the complete history: reference is the voltage just before the
// first move of the current run of equally signed moves (0 V before any reversal).
double absement_oracle(const std::vector<double>& u, std::size_t k) {
  auto sign = [&](std::size_t i) {
    const double d = u[i] - u[i - 1];
    return d > sim::AbsementTracker::kDeadband ? 1 : (d < -sim::AbsementTracker::kDeadband ? -1 : 0);
  };
  int run = 0;
  bool reversed = false;
  std::size_t first = 0;
  for (std::size_t i = k; i >= 1; --i) {
    const int s = sign(i);
    if (s == 0) continue;
    if (run == 0) run = s;
    if (s != run) {
      reversed = true;
      break;
    }
    first = i;
  }
  const double ref = reversed || run == -1 ? u[first - 1] : 0.0;
  return std::abs(u[k] - ref);
}

}  // namespace

TEST(Plant, IdenticalInputsGiveBitIdenticalTraces) {
  const sim::PlantConfig p = sim::default_plant();
  const auto a = drive(p, 3.0, 8000), b = drive(p, 3.0, 8000);
  EXPECT_EQ(a.measured, b.measured);
  EXPECT_EQ(a.true_position, b.true_position);
  for (std::size_t i = 0; i < kElementCount; ++i) {
    EXPECT_EQ(a.voltage[i], b.voltage[i]);
    EXPECT_EQ(a.current[i], b.current[i]);
  }
  sim::PlantConfig other = p;
  other.seed = p.seed + 1;
  EXPECT_NE(drive(other, 3.0, 8000).measured, a.measured);
  EXPECT_EQ(drive(other, 3.0, 8000).true_position, a.true_position);  // noise only enters the sensor
}

TEST(Plant, ParallelInstancesMatchSequentialRuns) {
  const sim::PlantConfig p = sim::default_plant();
  const auto seq_a = drive(p, 2.0, 5000), seq_b = drive(p, -5.0, 5000);
  sim::Trace par_a, par_b;
  {
    std::jthread ta([&] { par_a = drive(p, 2.0, 5000); });
    std::jthread tb([&] { par_b = drive(p, -5.0, 5000); });
  }
  EXPECT_EQ(par_a.measured, seq_a.measured);
  EXPECT_EQ(par_b.measured, seq_b.measured);
}

TEST(Plant, CurrentTimesGainAndSampleTimeIsTheIncrement) {
  const sim::PlantConfig p = sim::default_plant();
  control::ClosedLoop loop(p, support::constant_controller(1e-8), support::clipping_plan(1e-8));
  std::size_t checked = 0;
  loop.run(control::constant_schedule(4.0, 6000), [&](const control::DriveSample& d) {
    for (std::size_t i = 0; i < kElementCount; ++i) {
      ASSERT_EQ(d.plant->currents[i] * p.current_gain[i] * p.sample_time(), d.plant->increments[i]);
      ++checked;
    }
  });
  EXPECT_EQ(checked, 6000u * kElementCount);
}

TEST(Plant, MoverFollowsKinematicsWithoutDisturbance) {
  const sim::PlantConfig p = support::quiet_plant();
  control::ClosedLoop loop(p, support::constant_controller(1e-8), support::clipping_plan(1e-8));
  double prev = 0.0;
  std::size_t engaged = 0;
  loop.run(control::constant_schedule(3.0, 10000), [&](const control::DriveSample& d) {
    const double ts = p.sample_time();
    const double k = sim::kappa({d.plant->increments[0] / ts, d.plant->increments[1] / ts},
                                {d.state->elements[2].displacement, d.state->elements[3].displacement}, p.clamp_thresholds);
    ASSERT_EQ(d.plant->mover_rate, k);
    ASSERT_NEAR(d.state->true_position - prev, ts * k, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(d.state->true_position) + 1e-30);
    if (k != 0.0) ++engaged;
    prev = d.state->true_position;
  });
  EXPECT_GT(engaged, 5000u);
}

TEST(Kappa, SelectsTheEngagedShear) {
  const std::array<double, 2> rates{1.0, 3.0}, thr{0.5, 0.5};
  EXPECT_EQ(sim::kappa(rates, {1.0, 0.0}, thr), 1.0);
  EXPECT_EQ(sim::kappa(rates, {0.0, 1.0}, thr), 3.0);
  EXPECT_EQ(sim::kappa(rates, {1.0, 1.0}, thr), 2.0);
  EXPECT_EQ(sim::kappa(rates, {0.0, 0.0}, thr), 0.0);
}

TEST(Plant, AbsementMatchesHistoryScan) {
  sim::Plant plant(support::quiet_plant());
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> step(-2.0, 2.0), tiny(-5e-10, 5e-10);
  std::uniform_int_distribution<int> kind(0, 9);
  PerElement<std::vector<double>> u;
  for (auto& h : u) h.push_back(0.0);
  PerElement<double> cmd{};
  for (int k = 0; k < 20000; ++k) {
    for (std::size_t i = 0; i < kElementCount; ++i) {
      const int c = kind(rng);
      if (c < 6) cmd[i] += step(rng);
      else if (c < 8) cmd[i] += tiny(rng);  // inside the deadband
      cmd[i] = std::clamp(cmd[i], -140.0, 140.0);
    }
    plant.step(cmd, 0.0, 1.0);
    for (std::size_t i = 0; i < kElementCount; ++i) {
      u[i].push_back(cmd[i]);
      ASSERT_EQ(plant.state().elements[i].absement.absement, absement_oracle(u[i], u[i].size() - 1))
          << "element " << i << " sample " << k;
    }
  }
}

TEST(Plant, GroundTruthGainIsPositiveEverywhere) {
  const sim::PlantConfig p = sim::default_plant();
  EXPECT_NO_THROW(p.validate());
  for (Element e : kAllElements)
    for (Direction d : kBothDirections)
      for (double rate : {0.0, 1e2, 1e4, 1e5, 1e7})
        for (double a = 0.0; a <= 300.0; a += 5.0) EXPECT_GT(sim::true_hysteresis(p, e, rate, a, d), 0.0);
}

TEST(Plant, TruthIsRateAndAbsementDependent) {
  const sim::PlantConfig p = sim::default_plant();
  for (Element e : kAllElements) {
    EXPECT_NE(sim::true_hysteresis(p, e, 1e3, 10.0, Direction::Plus), sim::true_hysteresis(p, e, 1e5, 10.0, Direction::Plus));
    EXPECT_NE(sim::true_hysteresis(p, e, 1e3, 10.0, Direction::Plus), sim::true_hysteresis(p, e, 1e3, 200.0, Direction::Plus));
  }
  // Direction dependence is strong for clamps, weak for shears.
  auto split = [&](Element e) {
    const double a = sim::true_hysteresis(p, e, 1e4, 50.0, Direction::Plus);
    const double b = sim::true_hysteresis(p, e, 1e4, 50.0, Direction::Minus);
    return std::abs(a - b) / a;
  };
  EXPECT_GT(split(Element::C1), 5.0 * split(Element::S1));
  EXPECT_GT(split(Element::C2), 5.0 * split(Element::S2));
}

TEST(Plant, RejectsInvalidConfigurations) {
  sim::PlantConfig p = sim::default_plant();
  p.truth[0].params[0].c0 = -1e-8;
  EXPECT_THROW(p.validate(), ParameterError);
  p = sim::default_plant();
  p.sample_rate = 0.0;
  EXPECT_THROW(p.validate(), ParameterError);
  p = sim::default_plant();
  p.noise_std = -1.0;
  EXPECT_THROW(p.validate(), ParameterError);
}

TEST(Plant, CommandsOutsideTheAmplifierFault) {
  sim::Plant plant(sim::default_plant());
  EXPECT_THROW(plant.step({151.0, 0.0, 0.0, 0.0}, 0.0, 1.0), SimulationFault);
}

TEST(Sensor, ChainEqualsItsTransferFunction) {
  const sim::PlantConfig p = support::quiet_plant();
  sim::SensorChain chain(p);
  const auto x = support::gaussian(3000, 8, 1e-4);
  const auto y = sim::sensor_transfer(p).filter(x);
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k < x.size(); ++k) ASSERT_NEAR(chain.apply(x[k]), y[k], 1e-10 * scale);
}

TEST(Trace, CsvRoundTripIsExact) {
  support::TempDir dir("trace");
  const sim::Trace a = drive(sim::default_plant(), 7.0, 1500);
  a.write_csv(dir / "trace.csv");
  const sim::Trace b = sim::Trace::read_csv(dir / "trace.csv");
  EXPECT_EQ(a.t, b.t);
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.measured, b.measured);
  for (std::size_t i = 0; i < kElementCount; ++i) {
    EXPECT_EQ(a.voltage[i], b.voltage[i]);
    EXPECT_EQ(a.absement[i], b.absement[i]);
  }
  for (std::size_t k = 1; k < b.t.size(); ++k) ASSERT_GT(b.t[k], b.t[k - 1]);
}
