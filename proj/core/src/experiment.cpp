#include "piezo/experiment.hpp"

#include "piezo/csv.hpp"
#include "piezo/drive.hpp"
#include "piezo/errors.hpp"
#include "piezo/stroke.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace piezo::experiment {

std::string_view name(Strategy s) {
  switch (s) {
    case Strategy::S1: return "S1";
    case Strategy::S2: return "S2";
    case Strategy::S3: return "S3";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  for (Strategy st : kAllStrategies)
    if (name(st) == s) return st;
  throw ParameterError("unknown strategy '" + std::string(s) + "'");
}

double ExperimentReport::mean_rmsd() const {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const ReportRow& r : rows) sum += r.mean;
  return sum / static_cast<double>(rows.size());
}

PerElement<double> midrange_gains(const hyst::LutSet& luts, const PerElement<double>& current_gains) {
  PerElement<double> g{};
  for (Element e : kAllElements) {
    const auto& t = luts[index(e)];
    const double lo = std::min(t[0].min_value(), t[1].min_value());
    const double hi = std::max(t[0].max_value(), t[1].max_value());
    g[index(e)] = 0.5 * (lo + hi) * current_gains[index(e)];
  }
  return g;
}

namespace {

template <class T>
const T& need(const std::optional<T>& v, Strategy s, const char* stage) {
  if (!v) throw ConfigError(std::string(name(s)) + " needs the " + stage + " stage output");
  return *v;
}

}  // namespace

StrategySetup strategy_setup(Strategy s, const StrategyArtifacts& a, double amplifier_min, double amplifier_max,
                             double inset, double sample_time, double stroke_margin) {
  StrategySetup out;
  PerElement<control::GainModel> models;
  if (s == Strategy::S1) {
    const PerElement<double>& gains = need(a.constant_gains, s, "fit");
    for (Element e : kAllElements) models[index(e)] = control::GainModel::constant(gains[index(e)]);
    out.controller = control::ControllerConfig::with_inset(models, amplifier_min, amplifier_max, inset, sample_time);
    for (Element e : kAllElements) {
      const double span = stroke::constant_gain_span(gains[index(e)], out.controller.u_min[index(e)],
                                                     out.controller.u_max[index(e)]) *
                          (1.0 + stroke_margin);
      out.plan.fixed[index(e)] = {-0.5 * span, 0.5 * span};
    }
    return out;
  }
  const hyst::LutSet& luts = need(a.luts, s, "fit");
  const PerElement<double>& xi = need(a.current_gains, s, "identify-sensor");
  const waveform::StrokeLUT& strokes = need(a.strokes, s, "optimize-strokes");
  for (Element e : kAllElements) models[index(e)] = control::GainModel::lut(luts[index(e)]).scaled(xi[index(e)]);
  out.controller = control::ControllerConfig::with_inset(models, amplifier_min, amplifier_max, inset, sample_time);
  out.plan.table = strokes.scaled(xi);
  for (Element e : kAllElements) out.plan.fixed[index(e)] = out.plan.table->lookup(e, out.plan.table->frequencies.front());
  if (s == Strategy::S3) {
    const auto& p = need(a.profiles, s, "run-ilc");
    out.profiles.plus = p[index(Direction::Plus)];
    out.profiles.minus = p[index(Direction::Minus)];
  }
  return out;
}

CellRun run_cell(const sim::PlantConfig& plant, const StrategySetup& setup, const lti::TransferFunction& sensor_model,
                 double drive_frequency, double steps, double lead_in_steps, bool keep_trace) {
  if (drive_frequency == 0.0) throw ParameterError("drive frequency must be nonzero");
  const double fs = plant.sample_rate;
  const double ts = plant.sample_time();
  const std::size_t lead = static_cast<std::size_t>(std::ceil(lead_in_steps));
  const std::size_t measured = static_cast<std::size_t>(std::floor(steps));
  const std::size_t n = control::step_samples(drive_frequency, fs, static_cast<double>(lead + measured)) + 2;
  const std::vector<double> schedule = control::constant_schedule(drive_frequency, n);

  CellRun run;
  run.alpha = waveform::alpha_sequence(schedule, ts);
  const std::vector<double> reference = waveform::integrate_reference(schedule, setup.plan, ts, &sensor_model, true);
  control::ClosedLoop loop(plant, setup.controller, setup.plan, setup.profiles);
  std::vector<double> y(n);
  if (keep_trace) {
    run.trace.sample_rate = fs;
    run.trace.reserve(n);
  }
  loop.run(schedule, [&](const control::DriveSample& d) {
    y[d.k - 1] = d.plant->measured;
    if (keep_trace) run.trace.append(d.t, d.alpha, *d.state, *d.plant, reference[d.k - 1]);
  });
  run.error.resize(n);
  for (std::size_t k = 0; k < n; ++k) run.error[k] = reference[k] - y[k];

  const auto nominal = static_cast<std::size_t>(std::floor(fs / std::abs(drive_frequency)));
  std::vector<metrics::StepSegment> all = metrics::step_segments(run.alpha, drive_frequency, nominal > 2 ? nominal - 2 : 1);
  if (all.size() < lead + measured)
    throw SimulationFault("run at " + csv::format(drive_frequency) + " Hz produced " + std::to_string(all.size()) +
                          " steps, expected " + std::to_string(lead + measured));
  run.steps.assign(all.begin() + static_cast<std::ptrdiff_t>(lead),
                   all.begin() + static_cast<std::ptrdiff_t>(lead + measured));
  return run;
}

ReportRow summarize(double frequency, std::span<const double> step_rmsd) {
  ReportRow row;
  row.frequency = frequency;
  row.step_rmsd.assign(step_rmsd.begin(), step_rmsd.end());
  const double n = static_cast<double>(step_rmsd.size());
  if (step_rmsd.empty()) return row;
  row.mean = std::accumulate(step_rmsd.begin(), step_rmsd.end(), 0.0) / n;
  if (step_rmsd.size() > 1) {
    double ss = 0.0;
    for (double v : step_rmsd) ss += (v - row.mean) * (v - row.mean);
    row.band = 2.0 * std::sqrt(ss / (n - 1.0));
  }
  return row;
}

std::vector<ExperimentReport> strategy_sweep(const sim::PlantConfig& plant, const StrategyArtifacts& artifacts,
                                             const SweepSettings& s) {
  if (s.frequencies.empty()) throw ParameterError("sweep needs at least one frequency");
  for (double f : s.frequencies)
    if (!(f > 0.0)) throw ParameterError("sweep frequencies must be positive");
  const lti::TransferFunction& g_hat = [&]() -> const lti::TransferFunction& {
    if (!artifacts.sensor_model) throw ConfigError("sweep needs the identify-sensor stage output");
    return *artifacts.sensor_model;
  }();

  std::vector<ExperimentReport> reports;
  std::vector<StrategySetup> setups;
  for (Strategy st : s.strategies) {
    setups.push_back(strategy_setup(st, artifacts, s.amplifier_min, s.amplifier_max, s.inset, plant.sample_time(),
                                    s.stroke_margin));
    for (Direction d : s.directions) {
      ExperimentReport r;
      r.strategy = st;
      r.direction = d;
      r.rows.resize(s.frequencies.size());
      reports.push_back(std::move(r));
    }
  }

  const std::size_t per_strategy = s.directions.size() * s.frequencies.size();
  const std::size_t cells = s.strategies.size() * per_strategy;
  std::vector<std::exception_ptr> failures(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      const std::size_t si = c / per_strategy;
      const std::size_t di = (c % per_strategy) / s.frequencies.size();
      const std::size_t fi = c % s.frequencies.size();
      try {
        const double f = s.frequencies[fi] * (s.directions[di] == Direction::Plus ? 1.0 : -1.0);
        const CellRun run = run_cell(plant, setups[si], g_hat, f, s.steps, s.lead_in_steps);
        const std::vector<double> per_step = metrics::per_step_rmsd(run.error, run.steps);
        reports[si * s.directions.size() + di].rows[fi] = summarize(s.frequencies[fi], per_step);
      } catch (...) {
        failures[c] = std::current_exception();
      }
    }
  };
  std::size_t threads = s.threads ? s.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cells);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const std::exception_ptr& e : failures)
    if (e) std::rethrow_exception(e);
  return reports;
}

const ExperimentReport& find_report(std::span<const ExperimentReport> reports, Strategy s, Direction d) {
  for (const ExperimentReport& r : reports)
    if (r.strategy == s && r.direction == d) return r;
  throw ParameterError("no report for " + std::string(name(s)) + " " + std::string(piezo::name(d)));
}

void write_reports_csv(std::span<const ExperimentReport> reports, const std::filesystem::path& path) {
  csv::Writer w(path, {"strategy", "direction", "frequency (Hz)", "step", "rmsd (m)", "mean rmsd (m)", "band lower (m)",
                       "band upper (m)"});
  for (const ExperimentReport& r : reports)
    for (const ReportRow& row : r.rows)
      for (std::size_t i = 0; i < row.step_rmsd.size(); ++i)
        w.cell(name(r.strategy))
            .cell(piezo::name(r.direction))
            .cell(row.frequency)
            .cell(static_cast<long long>(i))
            .cell(row.step_rmsd[i])
            .cell(row.mean)
            .cell(row.lower())
            .cell(row.upper())
            .end_row();
}

std::vector<ExperimentReport> read_reports_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t cs = t.column("strategy"), cd = t.column("direction");
  const std::vector<double> freq = t.numeric_column("frequency (Hz)");
  const std::vector<double> value = t.numeric_column("rmsd (m)");
  std::vector<ExperimentReport> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const Strategy s = parse_strategy(t.rows[i][cs]);
    const Direction d = parse_direction(t.rows[i][cd]);
    if (out.empty() || out.back().strategy != s || out.back().direction != d) {
      out.push_back({});
      out.back().strategy = s;
      out.back().direction = d;
    }
    auto& rows = out.back().rows;
    if (rows.empty() || rows.back().frequency != freq[i]) rows.push_back({freq[i], {}, 0.0, 0.0});
    rows.back().step_rmsd.push_back(value[i]);
  }
  for (ExperimentReport& r : out)
    for (ReportRow& row : r.rows) row = summarize(row.frequency, row.step_rmsd);
  return out;
}

std::vector<double> log_grid(double f_min, double f_max, std::size_t count) {
  if (!(f_min > 0.0 && f_max >= f_min) || count == 0) throw ParameterError("log grid needs 0 < f_min <= f_max and a point");
  if (count == 1) return {f_min};
  std::vector<double> g(count);
  const double step = std::log(f_max / f_min) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = f_min * std::exp(step * static_cast<double>(i));
  g.back() = f_max;
  return g;
}

}  // namespace piezo::experiment
