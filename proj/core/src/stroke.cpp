#include "piezo/stroke.hpp"

#include "piezo/errors.hpp"
#include "piezo/csv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <string>

namespace piezo::stroke {

namespace {

std::size_t period_samples(double drive_frequency, double sample_time) {
  if (drive_frequency == 0.0) throw ParameterError("drive frequency must be nonzero");
  return static_cast<std::size_t>(std::floor(1.0 / (sample_time * std::abs(drive_frequency)) + 1e-9));
}

}  // namespace

VoltageTrajectory simulate_along(std::span<const double> alphas, double drive_frequency, StrokeBounds strokes, Element e,
                                 const ElementLaw& law) {
  VoltageTrajectory tr;
  tr.period = period_samples(drive_frequency, law.sample_time);
  tr.command.reserve(alphas.size());
  tr.candidate.reserve(alphas.size());
  tr.virtual_voltage.reserve(alphas.size());
  tr.alpha.assign(alphas.begin(), alphas.end());
  control::ElementHistory h;
  double windup = 0.0;
  const double span = strokes.span();
  for (double alpha : alphas) {
    const double rate = waveform::element_rate(e, alpha, drive_frequency, span);
    const control::ElementOutput o =
        control::element_step(h, *law.model, law.u_min, law.u_max, law.sample_time, law.guard_fraction, rate);
    if (o.candidate > law.u_max) windup = std::max(windup, 0.0) + (o.candidate - law.u_max);
    else if (o.candidate < law.u_min) windup = std::min(windup, 0.0) + (o.candidate - law.u_min);
    else windup = 0.0;
    tr.command.push_back(o.command);
    tr.candidate.push_back(o.candidate);
    tr.virtual_voltage.push_back(o.command + windup);
  }
  return tr;
}

VoltageTrajectory simulate_voltage_trajectory(double drive_frequency, StrokeBounds strokes, Element e,
                                              const ElementLaw& law, std::size_t periods) {
  const std::size_t p = period_samples(drive_frequency, law.sample_time);
  const std::vector<double> schedule(periods * p, drive_frequency);
  const std::vector<double> alphas = waveform::alpha_sequence(schedule, law.sample_time);
  return simulate_along(alphas, drive_frequency, strokes, e, law);
}

ExtremaSets extrema_sets(std::span<const double> u, std::size_t period_samples, double tie_tolerance) {
  std::size_t lo = period_samples, hi = std::min(u.size(), 2 * period_samples);
  if (period_samples == 0 || lo >= hi) {
    lo = 0;
    hi = u.size();
  }
  ExtremaSets s;
  if (lo >= hi) return s;
  const auto [mn, mx] = std::minmax_element(u.begin() + static_cast<std::ptrdiff_t>(lo), u.begin() + static_cast<std::ptrdiff_t>(hi));
  for (std::size_t k = lo; k < hi; ++k) {
    if (u[k] >= *mx - tie_tolerance) s.top.push_back(k);
    if (u[k] <= *mn + tie_tolerance) s.bottom.push_back(k);
  }
  return s;
}

double objective(StrokeBounds strokes, double drive_frequency, Element e, const ElementLaw& law) {
  // Same recursion as simulate_voltage_trajectory over two periods, keeping only the second.
  const std::size_t p = period_samples(drive_frequency, law.sample_time);
  std::vector<double> second;
  second.reserve(p);
  control::ElementHistory h;
  double windup = 0.0, alpha = 0.0;
  const double span = strokes.span();
  for (std::size_t k = 0; k < 2 * p; ++k) {
    const double rate = waveform::element_rate(e, alpha, drive_frequency, span);
    const control::ElementOutput o =
        control::element_step(h, *law.model, law.u_min, law.u_max, law.sample_time, law.guard_fraction, rate);
    if (o.candidate > law.u_max) windup = std::max(windup, 0.0) + (o.candidate - law.u_max);
    else if (o.candidate < law.u_min) windup = std::min(windup, 0.0) + (o.candidate - law.u_min);
    else windup = 0.0;
    if (k >= p) second.push_back(o.command + windup);
    alpha = waveform::advance_alpha(alpha, drive_frequency, law.sample_time);
  }
  const ExtremaSets sets = extrema_sets(second, 0);
  double j = 0.0;
  for (std::size_t k : sets.top) j += (second[k] - law.u_max) * (second[k] - law.u_max);
  for (std::size_t k : sets.bottom) j += (second[k] - law.u_min) * (second[k] - law.u_min);
  return j;
}

double constant_gain_span(double gain, double u_min, double u_max) { return kTwoPi * gain * (u_max - u_min); }

namespace {

using Vec2 = std::array<double, 2>;

struct Problem {
  double f;
  Element e;
  const ElementLaw* law;
  Vec2 x0;
  double scale;  // m per normalized unit
  double j0;

  Vec2 to_x(const Vec2& z) const { return {x0[0] + scale * z[0], x0[1] + scale * z[1]}; }
  double j_of_x(const Vec2& x) const {
    if (!(x[0] > x[1])) return std::numeric_limits<double>::infinity();
    return objective({x[1], x[0]}, f, e, *law);
  }
  double value(const Vec2& z) const { return j_of_x(to_x(z)) / j0; }
  Vec2 gradient(const Vec2& z, double h) const {  // h in metres
    const Vec2 x = to_x(z);
    Vec2 g{};
    for (int i = 0; i < 2; ++i) {
      Vec2 xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      g[i] = (j_of_x(xp) - j_of_x(xm)) / (2.0 * h) * scale / j0;
    }
    return g;
  }
};

double inf_norm(const Vec2& v) { return std::max(std::abs(v[0]), std::abs(v[1])); }

// Nelder-Mead in normalized coordinates.
Vec2 simplex_search(const Problem& p, Vec2 start, std::size_t iterations, double& best_value) {
  std::array<Vec2, 3> pts{start, Vec2{start[0] + 0.05, start[1]}, Vec2{start[0], start[1] - 0.05}};
  std::array<double, 3> val{};
  for (int i = 0; i < 3; ++i) val[i] = p.value(pts[i]);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::array<int, 3> ord{0, 1, 2};
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int b = ord[0], m = ord[1], w = ord[2];
    if (std::abs(val[w] - val[b]) <= 1e-14 * (1.0 + std::abs(val[b])) &&
        inf_norm({pts[w][0] - pts[b][0], pts[w][1] - pts[b][1]}) * p.scale < 1e-10)
      break;
    const Vec2 c{0.5 * (pts[b][0] + pts[m][0]), 0.5 * (pts[b][1] + pts[m][1])};
    auto along = [&](double t) { return Vec2{c[0] + t * (pts[w][0] - c[0]), c[1] + t * (pts[w][1] - c[1])}; };
    const Vec2 r = along(-1.0);
    const double fr = p.value(r);
    if (fr < val[b]) {
      const Vec2 ex = along(-2.0);
      const double fe = p.value(ex);
      if (fe < fr) {
        pts[w] = ex;
        val[w] = fe;
      } else {
        pts[w] = r;
        val[w] = fr;
      }
    } else if (fr < val[m]) {
      pts[w] = r;
      val[w] = fr;
    } else {
      const Vec2 ct = along(0.5);
      const double fc = p.value(ct);
      if (fc < val[w]) {
        pts[w] = ct;
        val[w] = fc;
      } else {
        for (int i : {m, w}) {
          pts[i] = {0.5 * (pts[i][0] + pts[b][0]), 0.5 * (pts[i][1] + pts[b][1])};
          val[i] = p.value(pts[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (val[i] < val[best]) best = i;
  best_value = val[best];
  return pts[best];
}

StrokeBounds ensure_saturation(double f, Element e, const ElementLaw& law, StrokeBounds raw, double margin) {
  const double center = 0.5 * (raw.r_max + raw.r_min);
  double span = raw.span();
  for (int i = 0; i < 200 && !saturates_every_cycle(f, {center - span / 2, center + span / 2}, e, law, 3); ++i)
    span *= 1.005;
  span *= 1.0 + margin;
  return {center - span / 2, center + span / 2};
}

}  // namespace

OptimizeResult optimize_bounds(double drive_frequency, Element e, const ElementLaw& law, StrokeBounds init,
                               const OptimizerSettings& settings) {
  if (!(init.r_max > init.r_min)) throw ParameterError("initial strokes must satisfy r_max > r_min");
  OptimizeResult res;
  res.j_init = objective(init, drive_frequency, e, law);
  Problem p{drive_frequency, e, &law, {init.r_max, init.r_min}, init.span(), res.j_init};
  if (!(res.j_init > 0.0)) {
    res.optimum = init;
    res.applied = ensure_saturation(drive_frequency, e, law, init, settings.saturation_margin);
    return res;
  }
  const double h = settings.fd_step;
  Vec2 z{0.0, 0.0};
  double fz = 1.0;
  Vec2 g = p.gradient(z, h);
  std::array<std::array<double, 2>, 2> H{{{1.0, 0.0}, {0.0, 1.0}}};
  bool converged = false, fallback = false;
  std::size_t it = 0;
  for (; it < settings.max_iterations; ++it) {
    if (inf_norm(g) <= settings.gradient_tol) {
      converged = true;
      break;
    }
    Vec2 d{-(H[0][0] * g[0] + H[0][1] * g[1]), -(H[1][0] * g[0] + H[1][1] * g[1])};
    double slope = d[0] * g[0] + d[1] * g[1];
    if (!(slope < 0.0)) {
      H = {{{1.0, 0.0}, {0.0, 1.0}}};
      d = {-g[0], -g[1]};
      slope = -(g[0] * g[0] + g[1] * g[1]);
    }
    double t = 1.0, ft = 0.0;
    bool accepted = false;
    while (t * inf_norm(d) * p.scale >= settings.step_tol * 1e-3) {
      ft = p.value({z[0] + t * d[0], z[1] + t * d[1]});
      if (ft <= fz + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      fallback = true;
      break;
    }
    const Vec2 s{t * d[0], t * d[1]};
    const Vec2 zn{z[0] + s[0], z[1] + s[1]};
    const Vec2 gn = p.gradient(zn, h);
    const Vec2 y{gn[0] - g[0], gn[1] - g[1]};
    const double sy = s[0] * y[0] + s[1] * y[1];
    if (sy > 1e-16) {
      // inverse BFGS update
      const Vec2 Hy{H[0][0] * y[0] + H[0][1] * y[1], H[1][0] * y[0] + H[1][1] * y[1]};
      const double yHy = y[0] * Hy[0] + y[1] * Hy[1];
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          H[i][j] += (sy + yHy) * s[i] * s[j] / (sy * sy) - (Hy[i] * s[j] + s[i] * Hy[j]) / sy;
    }
    z = zn;
    fz = ft;
    g = gn;
    if (inf_norm(s) * p.scale < settings.step_tol || fz == 0.0) {
      converged = true;
      break;
    }
  }
  res.iterations = it;
  if (fallback) {
    double fs = fz;
    const Vec2 zs = simplex_search(p, z, 400, fs);
    if (fs <= fz) {
      z = zs;
      fz = fs;
    }
    res.used_simplex = true;
    converged = true;
  }
  const Vec2 x = p.to_x(z);
  res.optimum = {x[1], x[0]};
  res.j_opt = fz * p.j0;
  if (!converged) {
    throw OptimizationError("no convergence at f = " + csv::format(drive_frequency) + " Hz for " + std::string(name(e)) +
                            " after " + std::to_string(it) + " iterations; best span " + csv::format(res.optimum.span()) +
                            " m with J = " + csv::format(res.j_opt));
  }
  res.applied = ensure_saturation(drive_frequency, e, law, res.optimum, settings.saturation_margin);
  return res;
}

bool saturates_every_cycle(double drive_frequency, StrokeBounds strokes, Element e, const ElementLaw& law,
                           std::size_t cycles, std::size_t skip_cycles) {
  const std::size_t per = period_samples(drive_frequency, law.sample_time) + 2;
  const std::vector<double> schedule((cycles + skip_cycles + 1) * per, drive_frequency);
  const std::vector<double> alphas = waveform::alpha_sequence(schedule, law.sample_time);
  const VoltageTrajectory tr = simulate_along(alphas, drive_frequency, strokes, e, law);
  std::vector<std::size_t> starts{0};
  for (std::size_t k = 1; k < alphas.size(); ++k)
    if (drive_frequency > 0 ? alphas[k] < alphas[k - 1] : alphas[k] > alphas[k - 1]) starts.push_back(k);
  std::size_t checked = 0;
  for (std::size_t c = skip_cycles; c + 1 < starts.size() && checked < cycles; ++c, ++checked) {
    bool top = false, bottom = false;
    for (std::size_t k = starts[c]; k < starts[c + 1]; ++k) {
      top = top || tr.candidate[k] > law.u_max;
      bottom = bottom || tr.candidate[k] < law.u_min;
    }
    if (!top || !bottom) return false;
  }
  return checked == cycles;
}

DriftReport drift_check(double drive_frequency, StrokeBounds strokes, Element e, const ElementLaw& law,
                        std::size_t cycles, std::size_t reference_cycle) {
  DriftReport rep;
  rep.cycles = cycles;
  const auto n = static_cast<std::size_t>(std::llround(1.0 / (law.sample_time * std::abs(drive_frequency))));
  rep.samples_per_cycle = n;
  // Rates follow the synchronous frequency so one cycle is exactly n samples.
  const double synced = std::copysign(1.0 / (law.sample_time * static_cast<double>(n)), drive_frequency);
  const double span = strokes.span();
  control::ElementHistory h;
  for (std::size_t c = 0; c < cycles; ++c) {
    double sum = 0.0;
    bool top = false, bottom = false;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t pos = drive_frequency > 0 ? j : (n - j) % n;
      const double alpha = kTwoPi * static_cast<double>(pos) / static_cast<double>(n);
      const control::ElementOutput o = control::element_step(h, *law.model, law.u_min, law.u_max, law.sample_time,
                                                             law.guard_fraction,
                                                             waveform::element_rate(e, alpha, synced, span));
      sum += o.command;
      top = top || o.candidate > law.u_max;
      bottom = bottom || o.candidate < law.u_min;
    }
    rep.cycle_means.push_back(sum / static_cast<double>(n));
    if (c >= 1 && (!top || !bottom)) rep.saturated_every_cycle = false;
  }
  for (std::size_t c = reference_cycle; c < cycles; ++c)
    rep.max_drift = std::max(rep.max_drift, std::abs(rep.cycle_means[c] - rep.cycle_means[reference_cycle]));
  return rep;
}

StrokeTableResult build_stroke_lut(const std::vector<double>& frequencies, const PerElement<ElementLaw>& laws,
                                   const PerElement<StrokeBounds>& init, const OptimizerSettings& settings) {
  StrokeTableResult out;
  out.table.frequencies = frequencies;
  std::vector<std::string> failures;
  for (Element e : kAllElements) {
    const std::size_t ei = index(e);
    auto& applied = out.table.entries[ei];
    auto& optima = out.optima[ei];
    applied.assign(frequencies.size(), {});
    optima.assign(frequencies.size(), {});
    auto record_failure = [&](std::size_t i, const std::exception& ex) {
      failures.push_back(std::string(name(e)) + "@" + csv::format(frequencies[i]) + "Hz (" + ex.what() + ")");
    };
    if (settings.warm_start || !settings.parallel) {
      StrokeBounds start = init[ei];
      for (std::size_t i = 0; i < frequencies.size(); ++i) {
        try {
          const OptimizeResult r = optimize_bounds(frequencies[i], e, laws[ei], start, settings);
          optima[i] = r.optimum;
          applied[i] = r.applied;
          if (settings.warm_start) start = r.optimum;
        } catch (const Error& ex) {
          record_failure(i, ex);
        }
      }
    } else {
      std::vector<std::future<OptimizeResult>> jobs;
      for (double f : frequencies)
        jobs.push_back(std::async(std::launch::async, [&, f] { return optimize_bounds(f, e, laws[ei], init[ei], settings); }));
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        try {
          const OptimizeResult r = jobs[i].get();
          optima[i] = r.optimum;
          applied[i] = r.applied;
        } catch (const Error& ex) {
          record_failure(i, ex);
        }
      }
    }
  }
  if (!failures.empty()) {
    std::string msg = "stroke optimization failed for";
    for (const std::string& f : failures) msg += " " + f;
    throw OptimizationError(msg);
  }
  out.table.validate();
  return out;
}

}  // namespace piezo::stroke
