#include "piezo/controller.hpp"
#include "piezo/hysteresis.hpp"
#include "piezo/ilc.hpp"
#include "piezo/plant.hpp"
#include "piezo/stroke.hpp"
#include "piezo/waveform.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace piezo;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

hyst::LookupTable2D table(std::size_t nodes) {
  const auto ra = hyst::linear_axis(0.0, 1e5, nodes), aa = hyst::linear_axis(0.0, 300.0, nodes);
  std::vector<double> v(nodes * nodes);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1e-8 * (1.0 + 0.1 * std::sin(static_cast<double>(i)));
  return hyst::LookupTable2D(ra, aa, v);
}

}  // namespace

static void BM_LutEval(benchmark::State& state) {
  const auto t = table(static_cast<std::size_t>(state.range(0)));
  double r = 0.0, a = 0.0, acc = 0.0;
  for (auto _ : state) {
    acc += t.eval(r, a);
    r = r > 1e5 ? 0.0 : r + 137.0;
    a = a > 300.0 ? 0.0 : a + 0.37;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_LutEval)->Arg(16)->Arg(64);

static void BM_ElementStep(benchmark::State& state) {
  const control::GainModel m = control::GainModel::lut({table(64), table(64)});
  control::ElementHistory h;
  double alpha = 0.0;
  for (auto _ : state) {
    const double rate = waveform::element_rate(Element::S1, alpha, 2.0, 3e-6);
    benchmark::DoNotOptimize(control::element_step(h, m, -135.0, 135.0, 1e-4, 1e-3, rate));
    alpha = waveform::advance_alpha(alpha, 2.0, 1e-4);
  }
}
BENCHMARK(BM_ElementStep);

static void BM_PlantStep(benchmark::State& state) {
  sim::Plant plant(sim::default_plant());
  double u = 0.0, du = 0.01;
  for (auto _ : state) {
    u += du;
    if (std::abs(u) > 130.0) du = -du;
    benchmark::DoNotOptimize(plant.step({u, -u, 0.5 * u, -0.5 * u}, 1.0, 2.0));
  }
}
BENCHMARK(BM_PlantStep);

static void BM_StrokeObjective(benchmark::State& state) {
  const control::GainModel m = control::GainModel::lut({table(64), table(64)});
  const stroke::ElementLaw law{&m, -135.0, 135.0, 1e-4, 1e-3};
  const double f = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(stroke::objective({-8e-6, 8e-6}, f, Element::C1, law));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2.0 * 1e4 / f));
}
BENCHMARK(BM_StrokeObjective)->Arg(1)->Arg(20)->Unit(benchmark::kMicrosecond);

static void BM_LiftedApply(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ilc::LiftedOperator op(sim::sensor_transfer(sim::default_plant()), n);
  const auto x = noise(n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LiftedApply)->Arg(512)->Arg(30000)->Unit(benchmark::kMicrosecond);

static void BM_ProjectorSolve(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto alphas = waveform::alpha_sequence(std::vector<double>(n, 2.0), 1e-4);
  const ilc::Basis basis(alphas, 180);
  const ilc::LiftedOperator g(sim::sensor_transfer(sim::default_plant()), n);
  const ilc::Projector p(basis, g);
  const auto f = noise(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(p.solve(f));
}
BENCHMARK(BM_ProjectorSolve)->Arg(5000)->Arg(30000)->Unit(benchmark::kMillisecond);

static void BM_KernelFit(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> rate(2e3, 1e5), abs(0.0, 250.0);
  hyst::HysteresisDataset data;
  for (Direction d : kBothDirections)
    for (std::int64_t i = 0; i < state.range(0); ++i) {
      hyst::HysteresisSample s;
      s.direction = d;
      s.rate = d == Direction::Plus ? rate(rng) : -rate(rng);
      s.absement = abs(rng);
      s.included = true;
      s.gain = 1e-8 * (1.0 + 1e-3 * s.absement + 1e-6 * std::abs(s.rate));
      data.samples.push_back(s);
    }
  const hyst::KernelSetup setup = hyst::default_kernel_setup(data, 12);
  for (auto _ : state) benchmark::DoNotOptimize(hyst::fit_model(data, setup));
}
BENCHMARK(BM_KernelFit)->Arg(2000)->Arg(16000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
