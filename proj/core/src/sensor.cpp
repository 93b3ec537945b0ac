#include "piezo/sensor.hpp"

#include "piezo/csv.hpp"
#include "piezo/errors.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>

namespace piezo::sensor {

void FrequencyResponse::validate() const {
  if (omega.empty()) throw ParameterError("frequency response has no bins");
  if (value.size() != omega.size() || variance.size() != omega.size())
    throw ParameterError("frequency response columns differ in length");
  if (realizations < 1) throw ParameterError("frequency response needs at least one realization");
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (!(omega[i] > 0.0 && omega[i] <= kPi)) throw ParameterError("frequency bin outside (0, pi]");
    if (i > 0 && !(omega[i] > omega[i - 1])) throw ParameterError("frequency grid not strictly increasing");
  }
}

void FrequencyResponse::write_csv(const std::filesystem::path& path) const {
  csv::Writer w(path, {"omega (rad/sample)", "re", "im", "variance", "realizations"});
  for (std::size_t i = 0; i < size(); ++i) {
    w.cell(omega[i]).cell(value[i].real()).cell(value[i].imag()).cell(variance[i]);
    w.cell(static_cast<long long>(realizations)).end_row();
  }
}

FrequencyResponse FrequencyResponse::read_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  FrequencyResponse out;
  out.omega = t.numeric_column("omega (rad/sample)");
  const auto re = t.numeric_column("re");
  const auto im = t.numeric_column("im");
  out.variance = t.numeric_column("variance");
  const auto reps = t.numeric_column("realizations");
  for (std::size_t i = 0; i < re.size(); ++i) out.value.emplace_back(re[i], im[i]);
  out.realizations = reps.empty() ? 1 : static_cast<std::size_t>(reps.front());
  out.validate();
  return out;
}

std::vector<std::size_t> log_bins(double f_lo, double f_hi, std::size_t count, double sample_rate, std::size_t period) {
  if (!(f_lo > 0.0 && f_hi >= f_lo && count >= 1 && period >= 4))
    throw ParameterError("invalid multisine band");
  const double df = sample_rate / static_cast<double>(period);
  const std::size_t top = (period - 1) / 2;  // strictly below Nyquist
  std::vector<std::size_t> bins;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    const double f = f_lo * std::pow(f_hi / f_lo, t);
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(f / df)), 1, top);
    if (bins.empty() || k > bins.back()) bins.push_back(k);
  }
  return bins;
}

std::vector<double> multisine(std::span<const std::size_t> bins, std::size_t period, double amplitude,
                              std::uint64_t seed) {
  if (period < 2) throw ParameterError("multisine period must be at least 2 samples");
  for (std::size_t k : bins)
    if (k == 0 || 2 * k >= period) throw ParameterError("multisine bin " + std::to_string(k) + " not below Nyquist");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::vector<double> x(period, 0.0);
  for (std::size_t k : bins) {
    const double phi = phase(rng);
    const double w = kTwoPi * static_cast<double>(k) / static_cast<double>(period);
    for (std::size_t n = 0; n < period; ++n) x[n] += amplitude * std::cos(w * static_cast<double>(n) + phi);
  }
  return x;
}

namespace {

// Averages the periods after `skip`. A constant change per period (ratcheting
// of a direction-dependent gain) is removed first so the average is periodic.
std::vector<Complex> averaged_spectrum(const std::vector<double>& x, std::size_t period, std::size_t skip) {
  const std::size_t total = x.size() / period;
  const std::size_t kept = total - skip;
  double drift = 0.0;
  if (kept >= 2) {
    for (std::size_t n = 0; n < period; ++n) drift += x[(total - 1) * period + n] - x[skip * period + n];
    drift /= static_cast<double>(period * (kept - 1));
  }
  std::vector<double> avg(period, 0.0);
  for (std::size_t p = skip; p < total; ++p)
    for (std::size_t n = 0; n < period; ++n) {
      const double t = static_cast<double>((p - skip) * period + n) / static_cast<double>(period);
      avg[n] += x[p * period + n] - drift * t;
    }
  for (double& v : avg) v /= static_cast<double>(kept);
  Eigen::FFT<double> fft;
  std::vector<Complex> spectrum_bins;
  fft.fwd(spectrum_bins, avg);
  return spectrum_bins;
}

}  // namespace

FrequencyResponse bla(std::span<const std::vector<double>> inputs, std::span<const std::vector<double>> outputs,
                      std::size_t period, std::span<const std::size_t> bins, std::size_t transient_periods) {
  if (inputs.empty() || inputs.size() != outputs.size()) throw ParameterError("BLA needs matching input/output records");
  if (bins.empty()) throw ParameterError("BLA needs at least one bin");
  const std::size_t reps = inputs.size();
  std::vector<std::vector<Complex>> est(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    if (inputs[r].size() != outputs[r].size()) throw ParameterError("record lengths differ");
    if (inputs[r].size() % period != 0 || inputs[r].size() / period <= transient_periods)
      throw ParameterError("records must hold whole periods beyond the transient");
    const auto u = averaged_spectrum(inputs[r], period, transient_periods);
    const auto y = averaged_spectrum(outputs[r], period, transient_periods);
    double umax = 0.0;
    for (std::size_t k : bins) umax = std::max(umax, std::abs(u.at(k)));
    for (std::size_t k : bins) {
      if (!(std::abs(u[k]) > 1e-10 * umax))
        throw IdentificationError("no input energy at bin " + std::to_string(k) + " in realization " + std::to_string(r));
      est[r].push_back(y[k] / u[k]);
    }
  }
  FrequencyResponse out;
  out.realizations = reps;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    Complex mean = 0.0;
    for (std::size_t r = 0; r < reps; ++r) mean += est[r][b];
    mean /= static_cast<double>(reps);
    double var = std::numeric_limits<double>::quiet_NaN();
    if (reps > 1) {
      double ss = 0.0;
      for (std::size_t r = 0; r < reps; ++r) ss += std::norm(est[r][b] - mean);
      var = ss / static_cast<double>(reps - 1) / static_cast<double>(reps);
    }
    out.omega.push_back(kTwoPi * static_cast<double>(bins[b]) / static_cast<double>(period));
    out.value.push_back(mean);
    out.variance.push_back(var);
  }
  return out;
}

FrequencyResponse average_sensor_frf(const FrequencyResponse& g_s1, const FrequencyResponse& g_s2, double sample_time) {
  g_s1.validate();
  g_s2.validate();
  if (g_s1.size() != g_s2.size()) throw ParameterError("shear responses on different grids");
  for (std::size_t i = 0; i < g_s1.size(); ++i)
    if (std::abs(g_s1.omega[i] - g_s2.omega[i]) > 1e-12 * g_s1.omega[i])
      throw ParameterError("shear responses on different grids");
  const Complex low = 0.5 * (g_s1.value[0] + g_s2.value[0]);
  double scale = 0.0;
  for (std::size_t i = 0; i < g_s1.size(); ++i) scale = std::max(scale, std::abs(g_s1.value[i]) + std::abs(g_s2.value[i]));
  if (!(std::abs(low) > 1e-12 * scale)) throw IdentificationError("shear responses vanish at the lowest bin");
  // A real gain; its sign follows the low-frequency response.
  const double c_g = std::copysign(std::abs(low), low.real());
  FrequencyResponse out;
  out.omega = g_s1.omega;
  out.realizations = std::min(g_s1.realizations, g_s2.realizations);
  for (std::size_t i = 0; i < g_s1.size(); ++i) {
    const Complex integ = sample_time / (std::polar(1.0, g_s1.omega[i]) - 1.0);
    const Complex f = integ / c_g;
    out.value.push_back(f * 0.5 * (g_s1.value[i] + g_s2.value[i]));
    out.variance.push_back(std::norm(f) * 0.25 * (g_s1.variance[i] + g_s2.variance[i]));
  }
  return out;
}

void SensorModel::validate() const {
  if (!shape.is_stable()) throw IdentificationError("sensor model has poles on or outside the unit circle");
  if (relative_degree < 1) throw IdentificationError("sensor model must have relative degree >= 1");
  if (!(sample_rate > 0.0)) throw ParameterError("sensor model sample rate must be positive");
}

namespace {

Complex poly_at(const std::vector<double>& c, double omega) {
  Complex acc = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) acc += c[k] * std::polar(1.0, -omega * static_cast<double>(k));
  return acc;
}

struct RationalFit {
  std::vector<double> num, den;
};

// Weighted Levy problem B - T (A - 1) = T with Sanathanan-Koerner reweighting by 1/|A_prev|.
RationalFit levy_sk(std::span<const double> omega, std::span<const Complex> target, std::span<const double> weight,
                    std::size_t order, std::size_t iterations) {
  const auto n = static_cast<Eigen::Index>(omega.size());
  const auto nb = static_cast<Eigen::Index>(order + 1);
  const auto na = static_cast<Eigen::Index>(order);
  RationalFit fit{std::vector<double>(order + 1, 0.0), std::vector<double>(order + 1, 0.0)};
  fit.den[0] = 1.0;
  for (std::size_t it = 0; it <= iterations; ++it) {
    Eigen::MatrixXd A(2 * n, nb + na);
    Eigen::VectorXd b(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = weight[i] / std::abs(poly_at(fit.den, omega[i]));
      const Complex t = target[i];
      for (Eigen::Index k = 0; k < nb; ++k) {
        const Complex e = std::polar(1.0, -omega[i] * static_cast<double>(k)) * w;
        A(2 * i, k) = e.real();
        A(2 * i + 1, k) = e.imag();
      }
      for (Eigen::Index k = 1; k <= na; ++k) {
        const Complex e = -t * std::polar(1.0, -omega[i] * static_cast<double>(k)) * w;
        A(2 * i, nb + k - 1) = e.real();
        A(2 * i + 1, nb + k - 1) = e.imag();
      }
      b[2 * i] = (t * w).real();
      b[2 * i + 1] = (t * w).imag();
    }
    const Eigen::VectorXd scale = A.colwise().norm().transpose().cwiseMax(std::numeric_limits<double>::min());
    const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
    const Eigen::VectorXd x = As.colPivHouseholderQr().solve(b).cwiseQuotient(scale);
    for (Eigen::Index k = 0; k < nb; ++k) fit.num[k] = x[k];
    for (Eigen::Index k = 1; k <= na; ++k) fit.den[k] = x[nb + k - 1];
  }
  return fit;
}

// Unstable poles p -> 1/conj(p); the numerator absorbs 1/|p| so magnitudes are kept.
RationalFit reflect_poles(RationalFit fit) {
  auto poles = lti::poly_roots(fit.den);
  double gain = 1.0;
  bool changed = false;
  for (Complex& p : poles) {
    const double m = std::abs(p);
    if (m >= 1.0) {
      changed = true;
      if (m > 1.0) {
        gain /= m;
        p = 1.0 / std::conj(p);
      } else {
        p *= 0.999;
      }
    }
  }
  if (!changed) return fit;
  std::vector<double> den = lti::poly_from_roots(poles);
  den.resize(fit.den.size(), 0.0);
  fit.den = std::move(den);
  for (double& b : fit.num) b *= gain;
  return fit;
}

}  // namespace

SensorModel fit_parametric(const FrequencyResponse& frf, std::size_t max_order, double sample_time,
                           const FitSettings& settings) {
  if (max_order < 1) throw ParameterError("sensor model order must be at least 1");
  frf.validate();
  const std::size_t n = frf.size();
  if (n < 2 * max_order + 1) throw IdentificationError("too few bins for the requested order");

  // Strip the delayed integrator and the extra delay: T = G (z - 1) z / T_s.
  std::vector<Complex> target(n);
  std::vector<double> weight(n);
  std::vector<bool> scored(n);
  const double band = settings.band_fraction * frf.omega.back();
  for (std::size_t i = 0; i < n; ++i) {
    const Complex z = std::polar(1.0, frf.omega[i]);
    const Complex factor = (z - 1.0) * z / sample_time;
    target[i] = frf.value[i] * factor;
    const double var = std::isnan(frf.variance[i]) ? 0.0 : frf.variance[i] * std::norm(factor);
    // Inverse standard deviation, floored at 0.1% relative so clean bins do not dominate.
    weight[i] = 1.0 / std::sqrt(var + 1e-6 * std::norm(target[i]));
    // Bins whose own scatter is below half the tolerance decide the order.
    scored[i] = frf.omega[i] <= band && std::sqrt(var) <= 0.5 * settings.tolerance * std::abs(target[i]);
  }
  if (std::none_of(scored.begin(), scored.end(), [](bool b) { return b; }))
    for (std::size_t i = 0; i < n; ++i) scored[i] = frf.omega[i] <= band;

  const lti::TransferFunction shell =
      lti::TransferFunction::integrator(sample_time, true) * lti::TransferFunction::delay(1);
  SensorModel best;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t order = 1; order <= max_order; ++order) {
    const RationalFit fit =
        reflect_poles(levy_sk(frf.omega, target, weight, order, settings.iterations));
    SensorModel m;
    m.shape = lti::TransferFunction(fit.num, fit.den);
    m.transfer = shell * m.shape;
    m.order = order;
    m.sample_rate = 1.0 / sample_time;
    m.relative_degree = m.transfer.relative_degree();
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::abs(m.response(frf.omega[i]) - frf.value[i]) / std::abs(frf.value[i]);
      m.bin_error.push_back(e);
      if (scored[i]) err = std::max(err, e);
    }
    if (!m.shape.is_stable() || !std::isfinite(err)) continue;
    if (err < best_err) {
      best_err = err;
      best = std::move(m);
    }
    if (best_err <= settings.tolerance) break;
  }
  if (!(best_err <= settings.reject_error))
    throw IdentificationError("parametric sensor fit error " + csv::format(best_err) + " above " +
                              csv::format(settings.reject_error));
  best.validate();
  return best;
}

namespace {

struct ShearRecords {
  std::vector<std::vector<double>> voltage, position, charge;
};

ShearRecords excite_shear(const sim::PlantConfig& base, Element shear, const ExperimentSettings& s,
                          std::span<const std::size_t> bins, std::size_t period) {
  const Element engaged = shear == Element::S1 ? Element::C1 : Element::C2;
  const Element released = shear == Element::S1 ? Element::C2 : Element::C1;
  const double amplitude = s.excitation_rms * std::sqrt(2.0 / static_cast<double>(bins.size()));
  const auto settle = static_cast<std::size_t>(std::llround(s.settle_seconds * base.sample_rate));
  ShearRecords rec;
  for (std::size_t r = 0; r < s.realizations; ++r) {
    sim::PlantConfig cfg = base;
    cfg.seed = base.seed + 7919 * (index(shear) + 1) + r;
    sim::Plant plant(cfg);
    PerElement<double> u{};
    for (std::size_t k = 0; k < settle; ++k) {
      const double ramp = std::min(1.0, 2.0 * static_cast<double>(k + 1) / static_cast<double>(settle));
      u[index(engaged)] = ramp * s.clamp_hold;
      u[index(released)] = -ramp * s.clamp_hold;
      plant.step(u, 0.0, 0.0);
    }
    const auto& es = plant.state().elements;
    const auto& thr = cfg.clamp_thresholds;
    const std::size_t ce = index(engaged) - index(Element::C1), cr = index(released) - index(Element::C1);
    if (!(es[index(engaged)].displacement >= thr[ce]) || !(es[index(released)].displacement < thr[cr]))
      throw IdentificationError("clamp hold of +/-" + csv::format(s.clamp_hold) + " V does not isolate " +
                                std::string(name(shear)));

    const std::vector<double> x = multisine(bins, period, amplitude, s.seed + 104729 * r);
    const std::size_t total = s.periods * period;
    std::vector<double> volt(total), pos(total), charge(total);
    double q = 0.0;
    for (std::size_t k = 0; k < total; ++k) {
      u[index(shear)] = x[k % period];
      const sim::StepResult out = plant.step(u, 0.0, 0.0);
      q += out.currents[index(shear)] * cfg.sample_time();
      volt[k] = u[index(shear)];
      pos[k] = out.measured;
      charge[k] = q;
    }
    rec.voltage.push_back(std::move(volt));
    rec.position.push_back(std::move(pos));
    rec.charge.push_back(std::move(charge));
  }
  return rec;
}

}  // namespace

SensorIdentification identify_sensor(const sim::PlantConfig& plant, const ExperimentSettings& s) {
  plant.validate();
  if (s.realizations < 1 || s.periods <= s.transient_periods)
    throw ParameterError("identification needs realizations >= 1 and periods beyond the transient");
  const double fs = plant.sample_rate;
  const auto period = static_cast<std::size_t>(std::llround(fs / s.f_lo));
  const std::vector<std::size_t> bins = log_bins(s.f_lo, s.f_hi_fraction * fs / 2.0, s.bins, fs, period);

  SensorIdentification id;
  PerElement<double> xi{};
  for (Element shear : {Element::S1, Element::S2}) {
    const ShearRecords rec = excite_shear(plant, shear, s, bins, period);
    FrequencyResponse g = bla(rec.voltage, rec.position, period, bins, s.transient_periods);
    const FrequencyResponse yq = bla(rec.charge, rec.position, period, bins, s.transient_periods);
    xi[index(shear)] = std::abs(yq.value.front());
    (shear == Element::S1 ? id.g_s1 : id.g_s2) = std::move(g);
  }
  const double clamp_xi = 0.5 * (xi[index(Element::S1)] + xi[index(Element::S2)]);
  xi[index(Element::C1)] = clamp_xi;
  xi[index(Element::C2)] = clamp_xi;
  id.current_gain = xi;
  id.g_hat = average_sensor_frf(id.g_s1, id.g_s2, plant.sample_time());
  id.model = fit_parametric(id.g_hat, s.model_order, plant.sample_time(), s.fit);
  return id;
}

void write_model_csv(const SensorModel& model, const PerElement<double>& current_gain, const std::filesystem::path& path) {
  csv::Writer w(path, {"field", "index", "value"});
  auto put = [&](std::string_view field, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) w.cell(field).cell(static_cast<long long>(i)).cell(values[i]).end_row();
  };
  put("shape_num", model.shape.num());
  put("shape_den", model.shape.den());
  put("transfer_num", model.transfer.num());
  put("transfer_den", model.transfer.den());
  const double meta[] = {static_cast<double>(model.relative_degree), model.sample_rate, static_cast<double>(model.order)};
  put("meta", meta);
  put("bin_error", model.bin_error);
  put("current_gain", current_gain);
}

std::pair<SensorModel, PerElement<double>> read_model_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t cf = t.column("field");
  const std::vector<double> values = t.numeric_column("value");
  std::map<std::string, std::vector<double>, std::less<>> fields;
  for (std::size_t i = 0; i < t.rows.size(); ++i) fields[t.rows[i][cf]].push_back(values[i]);
  auto get = [&](std::string_view f) -> std::vector<double>& {
    auto it = fields.find(f);
    if (it == fields.end() || it->second.empty()) throw IoError(path.string() + ": missing field " + std::string(f));
    return it->second;
  };
  SensorModel m;
  m.shape = lti::TransferFunction(get("shape_num"), get("shape_den"));
  m.transfer = lti::TransferFunction(get("transfer_num"), get("transfer_den"));
  const std::vector<double>& meta = get("meta");
  if (meta.size() != 3) throw IoError(path.string() + ": malformed meta rows");
  m.relative_degree = static_cast<std::size_t>(meta[0]);
  m.sample_rate = meta[1];
  m.order = static_cast<std::size_t>(meta[2]);
  if (auto it = fields.find("bin_error"); it != fields.end()) m.bin_error = it->second;
  const std::vector<double>& g = get("current_gain");
  if (g.size() != kElementCount) throw IoError(path.string() + ": expected four current gains");
  PerElement<double> gains{};
  std::copy(g.begin(), g.end(), gains.begin());
  m.validate();
  return {std::move(m), gains};
}

}  // namespace piezo::sensor
