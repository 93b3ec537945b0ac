#include "piezo/controller.hpp"

#include "piezo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace piezo::control {

GainModel GainModel::constant(double gain) {
  if (!(gain > 0.0)) throw ParameterError("constant gain must be positive");
  GainModel m;
  m.model_ = gain;
  m.median_ = gain;
  m.direction_dependent_ = false;
  return m;
}

GainModel GainModel::lut(PerDirection<hyst::LookupTable2D> tables) {
  std::vector<double> all;
  for (const auto& t : tables) {
    if (!(t.min_value() > 0.0)) throw ParameterError("lookup gains must be positive");
    all.insert(all.end(), t.values().begin(), t.values().end());
  }
  auto mid = all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2);
  std::nth_element(all.begin(), mid, all.end());
  GainModel m;
  m.median_ = *mid;
  m.model_ = std::move(tables);
  m.direction_dependent_ = true;
  return m;
}

GainModel GainModel::function(Function f, double median, bool direction_dependent) {
  GainModel m;
  m.model_ = std::move(f);
  m.median_ = median;
  m.direction_dependent_ = direction_dependent;
  return m;
}

double GainModel::eval(double rate, double absement, Direction d) const {
  if (const double* c = std::get_if<double>(&model_)) return *c;
  if (const auto* t = std::get_if<PerDirection<hyst::LookupTable2D>>(&model_)) return (*t)[index(d)].eval(rate, absement);
  return std::get<Function>(model_)(rate, absement, d);
}

GainModel GainModel::scaled(double factor) const {
  if (const double* c = std::get_if<double>(&model_)) return constant(*c * factor);
  if (const auto* t = std::get_if<PerDirection<hyst::LookupTable2D>>(&model_))
    return lut({(*t)[0].scaled(factor), (*t)[1].scaled(factor)});
  Function f = std::get<Function>(model_);
  return function([f, factor](double r, double a, Direction d) { return factor * f(r, a, d); }, median_ * factor,
                  direction_dependent_);
}

ModelHandle select_direction_model(const GainModel& model, double reference_rate) {
  if (!model.direction_dependent()) return {&model, Direction::Plus};
  return {&model, direction_of(reference_rate)};
}

void ControllerConfig::validate() const {
  if (!(sample_time > 0.0)) throw ParameterError("controller sample time must be positive");
  for (Element e : kAllElements) {
    const std::size_t i = index(e);
    if (!(amplifier_min < u_min[i] && u_min[i] < u_max[i] && u_max[i] < amplifier_max))
      throw ParameterError("anti-windup bounds of " + std::string(name(e)) + " must lie strictly inside the amplifier range");
  }
}

ControllerConfig ControllerConfig::with_inset(PerElement<GainModel> models, double amplifier_min, double amplifier_max,
                                              double inset, double sample_time) {
  ControllerConfig c;
  c.models = std::move(models);
  const double margin = inset * (amplifier_max - amplifier_min);
  c.u_min.fill(amplifier_min + margin);
  c.u_max.fill(amplifier_max - margin);
  c.amplifier_min = amplifier_min;
  c.amplifier_max = amplifier_max;
  c.sample_time = sample_time;
  c.validate();
  return c;
}

void update_absement(ElementHistory& h, double u_new) { h.absement.update(u_new); }

ElementOutput element_step(ElementHistory& h, const GainModel& model, double u_min, double u_max, double sample_time,
                           double guard_fraction, double reference_rate) {
  const ModelHandle handle = select_direction_model(model, reference_rate);
  double gain = handle.eval(std::abs(h.u1 - h.u2) / sample_time, h.absement.absement);
  if (!(gain > 0.0) || !std::isfinite(gain)) {
    std::ostringstream msg;
    msg << "model returned gain " << gain << " at absement " << h.absement.absement;
    throw ControllerFault(msg.str());
  }
  gain = std::max(gain, guard_fraction * model.median());
  const double candidate = h.u1 + sample_time * reference_rate / gain;
  const double u = std::clamp(candidate, u_min, u_max);
  h.u2 = h.u1;
  h.u1 = u;
  update_absement(h, u);
  return {u, candidate};
}

ControlOutput control_step(ControllerState& state, const ControllerConfig& cfg, const PerElement<double>& reference_rates) {
  ControlOutput out;
  for (std::size_t i = 0; i < kElementCount; ++i) {
    const ElementOutput o = element_step(state.elements[i], cfg.models[i], cfg.u_min[i], cfg.u_max[i], cfg.sample_time,
                                         cfg.guard_fraction, reference_rates[i]);
    out.command[i] = o.command;
    out.candidate[i] = o.candidate;
  }
  return out;
}

}  // namespace piezo::control
