#pragma once

namespace piezo::sim {

// Accumulated voltage change since the last reversal of the voltage rate.
// Shared by the plant and the controller so both track identical values.
struct AbsementTracker {
  static constexpr double kDeadband = 1e-9;  // V

  double last_voltage = 0.0;
  double reference_voltage = 0.0;
  double absement = 0.0;
  int sign = +1;

  void update(double u_new) {
    const double d = u_new - last_voltage;
    const int s = d > kDeadband ? 1 : (d < -kDeadband ? -1 : 0);
    if (s != 0 && s != sign) {
      reference_voltage = last_voltage;
      sign = s;
    }
    absement = u_new > reference_voltage ? u_new - reference_voltage : reference_voltage - u_new;
    last_voltage = u_new;
  }
};

}  // namespace piezo::sim
