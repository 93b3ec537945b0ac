#include "piezo/errors.hpp"
#include "piezo/experiment.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace piezo;
using namespace piezo::experiment;

namespace {

StrategyArtifacts constant_artifacts() {
  StrategyArtifacts a;
  a.constant_gains = PerElement<double>{1e-8, 1e-8, 1e-8, 1e-8};
  a.sensor_model = sim::sensor_transfer(sim::default_plant());
  return a;
}

}  // namespace

TEST(Summary, MeanAndSampleTwoSigmaBand) {
  const std::vector<double> v{1.0, 2.0, 4.0};
  const ReportRow r = summarize(3.0, v);
  EXPECT_DOUBLE_EQ(r.mean, 7.0 / 3.0);
  const double s = std::sqrt(((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) + (4 - 7.0 / 3) * (4 - 7.0 / 3)) / 2.0);
  EXPECT_DOUBLE_EQ(r.band, 2.0 * s);
  EXPECT_DOUBLE_EQ(r.upper() - r.mean, r.mean - r.lower());
  EXPECT_EQ(summarize(1.0, std::vector<double>{5.0}).band, 0.0);
}

TEST(Grid, LogSpacedWithExactEnds) {
  const auto g = log_grid(0.4, 100.0, 10);
  ASSERT_EQ(g.size(), 10u);
  EXPECT_EQ(g.front(), 0.4);
  EXPECT_EQ(g.back(), 100.0);
  for (std::size_t i = 2; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], g[1] / g[0], 1e-12);
  EXPECT_EQ(log_grid(2.0, 5.0, 1), std::vector<double>{2.0});
  EXPECT_THROW(log_grid(0.0, 1.0, 3), ParameterError);
}

TEST(Strategies, NamesRoundTrip) {
  for (Strategy s : kAllStrategies) EXPECT_EQ(parse_strategy(name(s)), s);
  EXPECT_THROW(parse_strategy("S4"), ParameterError);
}

TEST(Strategies, MidrangeGainScalesTableMidpointByCurrentGain) {
  const auto ax = hyst::linear_axis(0.0, 1.0, 2);
  hyst::LutSet luts;
  for (auto& e : luts) e = {hyst::LookupTable2D(ax, ax, {1, 2, 3, 4}), hyst::LookupTable2D(ax, ax, {2, 5, 6, 7})};
  const auto g = midrange_gains(luts, {1.0, 2.0, 3.0, 0.5});
  EXPECT_DOUBLE_EQ(g[0], 4.0);
  EXPECT_DOUBLE_EQ(g[1], 8.0);
  EXPECT_DOUBLE_EQ(g[3], 2.0);
}

TEST(Strategies, MissingInputsNameTheStage) {
  auto message = [](Strategy s, const StrategyArtifacts& a) {
    try {
      strategy_setup(s, a, -150.0, 150.0, 0.05, 1e-4);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(Strategy::S1, {}).find("fit"), std::string::npos);
  StrategyArtifacts a;
  const auto ax = hyst::linear_axis(0.0, 1.0, 2);
  hyst::LutSet luts;
  for (auto& e : luts) e = {hyst::LookupTable2D(ax, ax, {1, 1, 1, 1}), hyst::LookupTable2D(ax, ax, {1, 1, 1, 1})};
  a.luts = luts;
  EXPECT_NE(message(Strategy::S2, a).find("identify-sensor"), std::string::npos);
  a.current_gains = PerElement<double>{1, 1, 1, 1};
  EXPECT_NE(message(Strategy::S2, a).find("optimize-strokes"), std::string::npos);
  waveform::StrokeLUT strokes;
  strokes.frequencies = {1.0, 2.0};
  for (auto& c : strokes.entries) c = {{-1e-6, 1e-6}, {-1e-6, 1e-6}};
  a.strokes = strokes;
  EXPECT_NO_THROW(strategy_setup(Strategy::S2, a, -150.0, 150.0, 0.05, 1e-4));
  EXPECT_NE(message(Strategy::S3, a).find("run-ilc"), std::string::npos);
}

TEST(Cells, RmsdRecomputedFromTheTraceMatches) {
  const sim::PlantConfig plant = sim::default_plant();
  const StrategyArtifacts a = constant_artifacts();
  const StrategySetup setup = strategy_setup(Strategy::S1, a, -150.0, 150.0, 0.05, plant.sample_time());
  const CellRun run = run_cell(plant, setup, *a.sensor_model, -7.0, 3.0, 1.0, true);
  ASSERT_EQ(run.steps.size(), 3u);
  ASSERT_EQ(run.trace.measured.size(), run.error.size());
  support::TempDir dir("cell");
  run.trace.write_csv(dir / "trace.csv");
  const sim::Trace back = sim::Trace::read_csv(dir / "trace.csv");
  std::vector<double> e(back.measured.size());
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = back.reference[k] - back.measured[k];
  EXPECT_EQ(e, run.error);
  const auto a1 = metrics::per_step_rmsd(run.error, run.steps), a2 = metrics::per_step_rmsd(e, run.steps);
  EXPECT_EQ(a1, a2);
  for (double v : a1) EXPECT_GT(v, 0.0);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  const sim::PlantConfig plant = sim::default_plant();
  const StrategyArtifacts a = constant_artifacts();
  SweepSettings s;
  s.frequencies = {3.0, 11.0};
  s.strategies = {Strategy::S1};
  s.steps = 2.0;
  s.threads = 1;
  const auto one = strategy_sweep(plant, a, s);
  s.threads = 3;
  const auto three = strategy_sweep(plant, a, s);
  ASSERT_EQ(one.size(), 2u);
  for (std::size_t r = 0; r < one.size(); ++r) {
    EXPECT_EQ(one[r].direction, three[r].direction);
    for (std::size_t i = 0; i < one[r].rows.size(); ++i) {
      EXPECT_EQ(one[r].rows[i].step_rmsd, three[r].rows[i].step_rmsd);
      EXPECT_GE(one[r].rows[i].mean, 0.0);
      EXPECT_EQ(one[r].rows[i].frequency, s.frequencies[i]);
    }
  }
  EXPECT_EQ(&find_report(one, Strategy::S1, Direction::Minus), &one[1]);
}

TEST(Reports, CsvRoundTrip) {
  std::vector<ExperimentReport> reports(2);
  reports[0].strategy = Strategy::S2;
  reports[1].strategy = Strategy::S3;
  reports[1].direction = Direction::Minus;
  for (auto& r : reports)
    for (double f : {0.4, 17.1})
      r.rows.push_back(summarize(f, std::vector<double>{1e-8 / 3.0, 2e-8, 2.5e-8}));
  support::TempDir dir("reports");
  write_reports_csv(reports, dir / "sweep.csv");
  const auto back = read_reports_csv(dir / "sweep.csv");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(back[r].strategy, reports[r].strategy);
    EXPECT_EQ(back[r].direction, reports[r].direction);
    ASSERT_EQ(back[r].rows.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_EQ(back[r].rows[i].frequency, reports[r].rows[i].frequency);
      EXPECT_EQ(back[r].rows[i].mean, reports[r].rows[i].mean);
      EXPECT_EQ(back[r].rows[i].band, reports[r].rows[i].band);
    }
    EXPECT_DOUBLE_EQ(back[r].mean_rmsd(), reports[r].mean_rmsd());
  }
}
