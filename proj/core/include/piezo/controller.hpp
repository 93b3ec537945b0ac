#pragma once

#include "piezo/absement.hpp"
#include "piezo/hysteresis.hpp"
#include "piezo/types.hpp"

#include <functional>
#include <variant>

namespace piezo::control {

// Gain model M̂(|udot|, u_a) in the same units as the reference rates per volt.
class GainModel {
 public:
  using Function = std::function<double(double rate, double absement, Direction)>;

  GainModel() : model_(1.0) {}
  static GainModel constant(double gain);
  static GainModel lut(PerDirection<hyst::LookupTable2D> tables);
  // Arbitrary callable, e.g. a known truth in tests; `median` sets the guard level.
  static GainModel function(Function f, double median, bool direction_dependent = true);

  double eval(double rate, double absement, Direction d) const;
  double median() const { return median_; }
  bool direction_dependent() const { return direction_dependent_; }
  bool is_constant() const { return std::holds_alternative<double>(model_); }
  const PerDirection<hyst::LookupTable2D>* tables() const { return std::get_if<PerDirection<hyst::LookupTable2D>>(&model_); }
  GainModel scaled(double factor) const;

 private:
  std::variant<double, PerDirection<hyst::LookupTable2D>, Function> model_;
  double median_ = 1.0;
  bool direction_dependent_ = false;
};

struct ModelHandle {
  const GainModel* model = nullptr;
  Direction direction = Direction::Plus;
  double eval(double rate, double absement) const { return model->eval(rate, absement, direction); }
  bool operator==(const ModelHandle&) const = default;
};

// "+" model for reference rates >= 0; direction-independent models always return the "+" handle.
ModelHandle select_direction_model(const GainModel& model, double reference_rate);

struct ControllerConfig {
  PerElement<GainModel> models{};
  PerElement<double> u_min{};
  PerElement<double> u_max{};
  double amplifier_min = -150.0;
  double amplifier_max = 150.0;
  double sample_time = 1e-4;
  double guard_fraction = 1e-3;

  void validate() const;
  // Anti-windup bounds placed `inset` of the amplifier span inside each limit.
  static ControllerConfig with_inset(PerElement<GainModel> models, double amplifier_min, double amplifier_max,
                                     double inset, double sample_time);
};

struct ElementHistory {
  double u1 = 0.0;  // u(t_{k-1})
  double u2 = 0.0;  // u(t_{k-2})
  sim::AbsementTracker absement;
};

struct ControllerState {
  PerElement<ElementHistory> elements{};
};

struct ElementOutput {
  double command = 0.0;    // clamped voltage
  double candidate = 0.0;  // unclamped law output
};

void update_absement(ElementHistory& h, double u_new);

ElementOutput element_step(ElementHistory& h, const GainModel& model, double u_min, double u_max, double sample_time,
                           double guard_fraction, double reference_rate);

struct ControlOutput {
  PerElement<double> command{};
  PerElement<double> candidate{};
};

ControlOutput control_step(ControllerState& state, const ControllerConfig& cfg, const PerElement<double>& reference_rates);

}  // namespace piezo::control
