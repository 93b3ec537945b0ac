#include "piezo/waveform.hpp"

#include "piezo/csv.hpp"
#include "piezo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace piezo::waveform {

namespace {

constexpr double kThird = kPi / 3.0;
constexpr double kTwoThirds = 2.0 * kPi / 3.0;
constexpr double kFourThirds = 4.0 * kPi / 3.0;
constexpr double kFiveThirds = 5.0 * kPi / 3.0;

double clamp_rate(double alpha, double drive_frequency, double span, int sign) {
  const double k = sign * drive_frequency * span / kTwoThirds;
  if (alpha < kThird) return k;
  if (alpha < kTwoThirds) return 0.0;
  if (alpha < kFourThirds) return -k;
  if (alpha < kFiveThirds) return 0.0;
  return k;
}

double slow_shear_rate(double drive_frequency, double span) { return drive_frequency * span / kFiveThirds; }
double fast_shear_rate(double drive_frequency, double span) { return -drive_frequency * span / kThird; }

}  // namespace

StrokeBounds StrokeLUT::lookup(Element e, double drive_frequency) const {
  const auto& col = entries[index(e)];
  if (frequencies.empty()) throw ConfigError("empty stroke table");
  const double f = std::abs(drive_frequency);
  if (f <= frequencies.front()) return col.front();
  if (f >= frequencies.back()) return col.back();
  const auto it = std::upper_bound(frequencies.begin(), frequencies.end(), f);
  const std::size_t hi = static_cast<std::size_t>(it - frequencies.begin());
  const std::size_t lo = hi - 1;
  if (frequencies[lo] == f) return col[lo];
  const double w = (f - frequencies[lo]) / (frequencies[hi] - frequencies[lo]);
  return {col[lo].r_min + w * (col[hi].r_min - col[lo].r_min), col[lo].r_max + w * (col[hi].r_max - col[lo].r_max)};
}

void StrokeLUT::validate() const {
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    if (!(frequencies[i] > 0.0)) throw ParameterError("stroke table frequencies must be positive");
    if (i > 0 && !(frequencies[i] > frequencies[i - 1])) throw ParameterError("stroke table frequencies must increase");
  }
  for (const auto& col : entries) {
    if (col.size() != frequencies.size()) throw ParameterError("stroke table column length mismatch");
    for (const StrokeBounds& b : col)
      if (!std::isfinite(b.r_min) || !std::isfinite(b.r_max) || !(b.r_max > b.r_min))
        throw ParameterError("stroke table entry must satisfy r_max > r_min");
  }
}

StrokeLUT StrokeLUT::scaled(const PerElement<double>& factors) const {
  StrokeLUT out = *this;
  for (std::size_t e = 0; e < kElementCount; ++e)
    for (StrokeBounds& b : out.entries[e]) {
      b.r_min *= factors[e];
      b.r_max *= factors[e];
    }
  return out;
}

void StrokeLUT::write_csv(const std::filesystem::path& path) const {
  csv::Writer w(path, {"frequency", "element", "r_min", "r_max"});
  for (std::size_t i = 0; i < frequencies.size(); ++i)
    for (Element e : kAllElements) {
      const StrokeBounds& b = entries[index(e)][i];
      w.cell(frequencies[i]).cell(name(e)).cell(b.r_min).cell(b.r_max);
      w.end_row();
    }
}

StrokeLUT StrokeLUT::read_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t cf = t.column("frequency"), ce = t.column("element"), cmin = t.column("r_min"),
                    cmax = t.column("r_max");
  StrokeLUT lut;
  for (const auto& row : t.rows) {
    const double f = csv::parse_double(row[cf]);
    if (lut.frequencies.empty() || lut.frequencies.back() != f) lut.frequencies.push_back(f);
    lut.entries[index(parse_element(row[ce]))].push_back({csv::parse_double(row[cmin]), csv::parse_double(row[cmax])});
  }
  lut.validate();
  return lut;
}

StrokeBounds StrokePlan::bounds(Element e, double drive_frequency) const {
  if (table) return table->lookup(e, drive_frequency);
  return fixed[index(e)];
}

void StrokePlan::validate() const {
  if (table) table->validate();
  else
    for (const StrokeBounds& b : fixed)
      if (!(b.r_max > b.r_min)) throw ParameterError("stroke bounds must satisfy r_max > r_min");
}

double advance_alpha(double alpha, double drive_frequency, double sample_time) {
  double a = alpha + kTwoPi * drive_frequency * sample_time;
  // One subtraction is exact on [2pi, 4pi) and agrees with fmod there.
  if (a >= kTwoPi && a < 2.0 * kTwoPi) a -= kTwoPi;
  else if (!(a > -kTwoPi && a < kTwoPi)) a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

double element_rate(Element e, double alpha, double drive_frequency, double span) {
  switch (e) {
    case Element::S1:
      return (alpha >= kThird && alpha < kTwoThirds) ? fast_shear_rate(drive_frequency, span)
                                                     : slow_shear_rate(drive_frequency, span);
    case Element::S2:
      return (alpha >= kFourThirds && alpha < kFiveThirds) ? fast_shear_rate(drive_frequency, span)
                                                           : slow_shear_rate(drive_frequency, span);
    case Element::C1: return clamp_rate(alpha, drive_frequency, span, -1);
    case Element::C2: return clamp_rate(alpha, drive_frequency, span, +1);
  }
  return 0.0;
}

PerElement<double> nominal_waveform(double alpha, double drive_frequency, const StrokePlan& plan) {
  PerElement<double> r{};
  for (Element e : kAllElements) r[index(e)] = element_rate(e, alpha, drive_frequency, plan.bounds(e, drive_frequency).span());
  return r;
}

double nominal_mover_rate(double alpha, double drive_frequency, const StrokePlan& plan) {
  const Element engaged = alpha < kPi ? Element::S2 : Element::S1;
  return slow_shear_rate(drive_frequency, plan.bounds(engaged, drive_frequency).span());
}

PerElement<double> modified_shear_reference(double alpha, double drive_frequency, const StrokePlan& plan,
                                            const CompensationProfile* plus, const CompensationProfile* minus) {
  PerElement<double> r = nominal_waveform(alpha, drive_frequency, plan);
  const CompensationProfile* p = direction_of(drive_frequency) == Direction::Plus ? plus : minus;
  if (p != nullptr) {
    const double c = p->rate(alpha, drive_frequency);
    r[index(Element::S1)] += c;
    r[index(Element::S2)] += c;
  }
  return r;
}

std::vector<double> alpha_sequence(std::span<const double> schedule, double sample_time, double alpha0) {
  std::vector<double> out(schedule.size());
  double a = alpha0;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    out[k] = a;
    a = advance_alpha(a, schedule[k], sample_time);
  }
  return out;
}

std::vector<double> integrate_reference(std::span<const double> schedule, const StrokePlan& plan, double sample_time,
                                        const lti::TransferFunction* sensor_model, bool sensor_referenced) {
  if (sensor_referenced && sensor_model == nullptr)
    throw ConfigError("sensor-referenced mover reference requested but no sensor model is available");
  const std::vector<double> alphas = alpha_sequence(schedule, sample_time);
  std::vector<double> rates(schedule.size());
  for (std::size_t k = 0; k < schedule.size(); ++k) rates[k] = nominal_mover_rate(alphas[k], schedule[k], plan);
  if (sensor_model != nullptr) return sensor_model->filter(rates);
  return lti::TransferFunction::integrator(sample_time).filter(rates);
}

}  // namespace piezo::waveform
