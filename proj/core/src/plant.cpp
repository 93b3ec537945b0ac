#include "piezo/plant.hpp"

#include "piezo/csv.hpp"
#include "piezo/errors.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace piezo::sim {

namespace {

// Direction-dependent offsets that make the rate-free gain integrate to the same
// displacement up and down over a full swing, so clamp loops close.
double closing_offset(const HysteresisParams& plus, double c1_minus, double absement_scale, double swing) {
  const double shape = absement_scale * (1.0 - std::exp(-swing / absement_scale)) / swing;
  return plus.c0 - (c1_minus - plus.c1) * shape;
}

double rate_free_rise(const HysteresisParams& p, double absement_scale, double span) {
  return p.c0 * span + p.c1 * absement_scale * (1.0 - std::exp(-span / absement_scale));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError(what);
}

}  // namespace

void PlantConfig::validate() const {
  require(sample_rate > 0.0, "sample_rate must be positive");
  require(sensor_cutoff_hz > 0.0 && sensor_cutoff_hz < sample_rate / 2.0, "sensor cutoff must lie in (0, F_s/2)");
  require(noise_std >= 0.0, "noise std must be non-negative");
  require(amplifier_min < amplifier_max, "amplifier range is empty");
  for (Element e : kAllElements) {
    require(current_gain[index(e)] > 0.0, "current gain of " + std::string(name(e)) + " must be positive");
    const ElementTruth& t = truth[index(e)];
    require(t.absement_scale > 0.0 && t.rate_scale > 0.0, "hysteresis scales must be positive");
  }
  for (const auto& table : disturbance)
    for (const Harmonic& h : table)
      require(h.order >= 1 && std::isfinite(h.amplitude) && std::isfinite(h.phase), "invalid disturbance harmonic");
  if (resonance) require(resonance->frequency_hz > 0.0 && resonance->frequency_hz < sample_rate / 2.0 &&
                             resonance->damping > 0.0,
                         "invalid resonance");
  const double span = amplifier_max - amplifier_min;
  constexpr int kGrid = 64;
  for (Element e : kAllElements)
    for (Direction d : kBothDirections)
      for (int i = 0; i <= kGrid; ++i)
        for (int j = 0; j <= kGrid; ++j) {
          // rate axis mapped through tanh so the grid also covers the saturated limit
          const double th = static_cast<double>(i) / kGrid;
          const double rate = th >= 1.0 ? 1e12 : truth[index(e)].rate_scale * std::atanh(th);
          const double gain = true_hysteresis(*this, e, rate, span * j / kGrid, d);
          require(gain > 0.0, "ground-truth gain of " + std::string(name(e)) + " is not positive");
        }
}

std::array<double, 2> engagement_thresholds(const PlantConfig& cfg, double u_min, double u_max, double fraction) {
  const double swing = u_max - u_min;
  std::array<double, 2> out{};
  {
    // C1 first retracts to u_min, then swings up and down between the bounds.
    const ElementTruth& t = cfg.truth[index(Element::C1)];
    const double low = -rate_free_rise(t.params[index(Direction::Minus)], t.absement_scale, -u_min);
    const double high = low + rate_free_rise(t.params[index(Direction::Plus)], t.absement_scale, swing);
    out[0] = low + fraction * (high - low);
  }
  {
    // C2 first extends to u_max.
    const ElementTruth& t = cfg.truth[index(Element::C2)];
    const double high = rate_free_rise(t.params[index(Direction::Plus)], t.absement_scale, u_max);
    const double low = high - rate_free_rise(t.params[index(Direction::Minus)], t.absement_scale, swing);
    out[1] = low + fraction * (high - low);
  }
  return out;
}

PlantConfig default_plant(double sample_rate, double u_min, double u_max) {
  PlantConfig cfg;
  cfg.sample_rate = sample_rate;
  const double swing = u_max - u_min;

  auto shear = [](HysteresisParams plus, HysteresisParams minus) {
    ElementTruth t;
    t.params = {plus, minus};
    t.absement_scale = 80.0;
    t.rate_scale = 3.0e4;
    return t;
  };
  cfg.truth[index(Element::S1)] = shear({1.0e-8, -3.0e-9, -1.5e-9}, {1.0e-8, -2.9e-9, -1.5e-9});
  cfg.truth[index(Element::S2)] = shear({0.95e-8, -2.8e-9, -1.4e-9}, {0.95e-8, -2.75e-9, -1.4e-9});

  auto clamp = [&](HysteresisParams plus, double c1_minus) {
    ElementTruth t;
    t.absement_scale = 60.0;
    t.rate_scale = 3.0e4;
    HysteresisParams minus{closing_offset(plus, c1_minus, t.absement_scale, swing), c1_minus, plus.c2};
    t.params = {plus, minus};
    return t;
  };
  cfg.truth[index(Element::C1)] = clamp({1.2e-8, -1.5e-9, -0.5e-9}, -4.5e-9);
  cfg.truth[index(Element::C2)] = clamp({1.2e-8, -4.0e-9, -0.5e-9}, -1.8e-9);

  cfg.current_gain = {2.0e-3, 2.1e-3, 1.9e-3, 2.0e-3};
  cfg.disturbance[index(Direction::Plus)] = {{1, 1.5e-7, 0.3}, {2, 1.0e-7, 1.1}, {3, 0.5e-7, -0.4}, {6, 0.4e-7, 0.7}};
  cfg.disturbance[index(Direction::Minus)] = {{1, 2.0e-7, 2.0}, {2, 0.8e-7, -0.5}, {3, 0.7e-7, 0.9}, {6, 0.3e-7, -1.2}};
  cfg.clamp_thresholds = engagement_thresholds(cfg, u_min, u_max, 0.3);
  return cfg;
}

double true_hysteresis(const PlantConfig& cfg, Element e, double rate, double absement, Direction dir) {
  const ElementTruth& t = cfg.truth[index(e)];
  const HysteresisParams& p = t.params[index(dir)];
  return p.c0 + p.c1 * std::exp(-absement / t.absement_scale) + p.c2 * std::tanh(std::abs(rate) / t.rate_scale);
}

double kappa(std::array<double, 2> shear_rates, std::array<double, 2> clamp_positions,
             std::array<double, 2> thresholds) {
  const bool c1 = clamp_positions[0] >= thresholds[0];
  const bool c2 = clamp_positions[1] >= thresholds[1];
  if (c1 && !c2) return shear_rates[0];
  if (c2 && !c1) return shear_rates[1];
  if (c1 && c2) return 0.5 * (shear_rates[0] + shear_rates[1]);
  return 0.0;
}

double disturbance(const PlantConfig& cfg, double alpha, double drive_frequency) {
  double acc = 0.0;
  for (const Harmonic& h : cfg.disturbance[index(direction_of(drive_frequency))])
    acc += h.amplitude * std::sin(h.order * alpha + h.phase);
  return std::abs(drive_frequency) * acc;
}

namespace {

lti::TransferFunction resonance_tf(const Resonance& r, double fs) {
  // Unit-DC second-order section, bilinear with prewarping at the resonance.
  const double w = 2.0 * kPi * r.frequency_hz;
  const double k = w / std::tan(w / (2.0 * fs));
  const double w2 = w * w;
  const double a0 = k * k + 2.0 * r.damping * w * k + w2;
  const double a1 = 2.0 * (w2 - k * k);
  const double a2 = k * k - 2.0 * r.damping * w * k + w2;
  return lti::TransferFunction({w2, 2.0 * w2, w2}, {a0, a1, a2});
}

}  // namespace

lti::TransferFunction sensor_transfer(const PlantConfig& cfg) {
  lti::TransferFunction g = lti::TransferFunction::integrator(cfg.sample_time()) *
                            lti::TransferFunction::delay(cfg.sensor_delay) *
                            lti::butterworth_lowpass(2, cfg.sensor_cutoff_hz, cfg.sample_rate);
  if (cfg.resonance) g = g * resonance_tf(*cfg.resonance, cfg.sample_rate);
  return g;
}

SensorChain::SensorChain(const PlantConfig& cfg)
    : sample_time_(cfg.sample_time()),
      delay_line_(cfg.sensor_delay, 0.0),
      lowpass_(lti::butterworth_lowpass(2, cfg.sensor_cutoff_hz, cfg.sample_rate)),
      noise_std_(cfg.noise_std),
      rng_(cfg.seed) {}

double SensorChain::apply(double mover_rate) {
  integrated_ += sample_time_ * mover_rate;
  double delayed = integrated_;
  if (!delay_line_.empty()) {
    delay_line_.push_back(integrated_);
    delayed = delay_line_.front();
    delay_line_.pop_front();
  }
  double y = lowpass_.step(delayed);
  if (noise_std_ > 0.0) y += noise_std_ * noise_(rng_);
  return y;
}

Plant::Plant(PlantConfig cfg) : cfg_(std::move(cfg)), sensor_(cfg_) {
  cfg_.validate();
  if (cfg_.resonance) resonance_.emplace(resonance_tf(*cfg_.resonance, cfg_.sample_rate));
}

StepResult Plant::step(const PerElement<double>& u_cmd, double alpha, double drive_frequency) {
  const double ts = cfg_.sample_time();
  StepResult out;
  for (Element e : kAllElements) {
    const std::size_t i = index(e);
    const double u = u_cmd[i];
    if (!(u >= cfg_.amplifier_min && u <= cfg_.amplifier_max)) {
      std::ostringstream msg;
      msg << "command " << u << " V for " << name(e) << " outside amplifier range at sample " << state_.sample;
      throw SimulationFault(msg.str());
    }
    ElementState& es = state_.elements[i];
    const double du = u - es.voltage;
    const double rate = du / ts;
    const double absement = es.absement.absement;
    const double gain = true_hysteresis(cfg_, e, rate, absement, direction_of(du));
    if (!(gain > 0.0)) throw SimulationFault("non-positive ground-truth gain for " + std::string(name(e)));
    const double xi = cfg_.current_gain[i];
    const double current = gain * du / (xi * ts);
    const double increment = current * xi * ts;
    es.displacement += increment;
    es.previous_voltage = es.voltage;
    es.voltage = u;
    es.absement.update(u);
    out.currents[i] = current;
    out.rates[i] = rate;
    out.absements[i] = absement;
    out.increments[i] = increment;
  }
  const std::array<double, 2> shear_rates{out.increments[0] / ts, out.increments[1] / ts};
  const std::array<double, 2> clamps{state_.elements[index(Element::C1)].displacement,
                                     state_.elements[index(Element::C2)].displacement};
  double rate = kappa(shear_rates, clamps, cfg_.clamp_thresholds) + disturbance(cfg_, alpha, drive_frequency);
  if (resonance_) rate = resonance_->step(rate);
  state_.true_position += ts * rate;
  state_.measured_position = sensor_.apply(rate);
  ++state_.sample;
  out.mover_rate = rate;
  out.true_position = state_.true_position;
  out.measured = state_.measured_position;
  return out;
}

void Trace::reserve(std::size_t n) {
  t.reserve(n);
  alpha.reserve(n);
  for (std::size_t i = 0; i < kElementCount; ++i) {
    voltage[i].reserve(n);
    current[i].reserve(n);
    rate[i].reserve(n);
    absement[i].reserve(n);
  }
  true_position.reserve(n);
  measured.reserve(n);
  reference.reserve(n);
}

void Trace::append(double time, double alpha_value, const PlantState& state, const StepResult& r, double ref) {
  t.push_back(time);
  alpha.push_back(alpha_value);
  for (std::size_t i = 0; i < kElementCount; ++i) {
    voltage[i].push_back(state.elements[i].voltage);
    current[i].push_back(r.currents[i]);
    rate[i].push_back(r.rates[i]);
    absement[i].push_back(state.elements[i].absement.absement);
  }
  true_position.push_back(r.true_position);
  measured.push_back(r.measured);
  reference.push_back(ref);
}

namespace {

std::vector<std::string> trace_header() {
  std::vector<std::string> h{"t (s)", "alpha (rad)"};
  const char* groups[][2] = {{"u", "V"}, {"i", "A"}, {"udot", "V/s"}, {"ua", "V"}};
  for (auto& g : groups)
    for (Element e : kAllElements) h.push_back(std::string(g[0]) + "_" + std::string(name(e)) + " (" + g[1] + ")");
  h.insert(h.end(), {"y_true (m)", "y (m)", "r (m)"});
  return h;
}

}  // namespace

void Trace::write_csv(const std::filesystem::path& path) const {
  csv::Writer w(path, trace_header());
  for (std::size_t k = 0; k < size(); ++k) {
    w.cell(t[k]).cell(alpha[k]);
    for (const auto* group : {&voltage, &current, &rate, &absement})
      for (std::size_t i = 0; i < kElementCount; ++i) w.cell((*group)[i][k]);
    w.cell(true_position[k]).cell(measured[k]).cell(reference[k]);
    w.end_row();
  }
}

Trace Trace::read_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  const std::vector<std::string> header = trace_header();
  Trace tr;
  tr.t = table.numeric_column(header[0]);
  tr.alpha = table.numeric_column(header[1]);
  std::size_t col = 2;
  for (auto* group : {&tr.voltage, &tr.current, &tr.rate, &tr.absement})
    for (std::size_t i = 0; i < kElementCount; ++i) (*group)[i] = table.numeric_column(header[col++]);
  tr.true_position = table.numeric_column(header[col++]);
  tr.measured = table.numeric_column(header[col++]);
  tr.reference = table.numeric_column(header[col++]);
  if (tr.t.size() >= 2) tr.sample_rate = 1.0 / (tr.t[1] - tr.t[0]);
  return tr;
}

}  // namespace piezo::sim
