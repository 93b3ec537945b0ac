#pragma once

#include "piezo/types.hpp"

#include <span>
#include <vector>

namespace piezo {

// Piecewise-linear, 2π-periodic function of the commutation angle on a uniform
// grid of nodes 2π·c/n. Values are rates in m/s learned at `reference_frequency`;
// evaluation at another drive frequency scales them by |f|/reference_frequency
// so that the position correction per step stays the same.
struct CompensationProfile {
  Direction direction = Direction::Plus;
  double reference_frequency = 0.0;  // Hz; 0 disables scaling
  std::vector<double> coefficients;

  static CompensationProfile zero(std::size_t nodes, Direction d, double reference_frequency = 0.0);

  std::size_t nodes() const { return coefficients.size(); }
  double spacing() const { return kTwoPi / static_cast<double>(coefficients.size()); }
  double value(double alpha) const;
  double rate(double alpha, double drive_frequency) const;
};

struct BasisWeight {
  std::size_t lower = 0;
  std::size_t upper = 0;
  double w_lower = 1.0;
  double w_upper = 0.0;
};

// Interpolation weights of the piecewise-linear basis at alpha in [0, 2π).
BasisWeight basis_weight(double alpha, std::size_t nodes);

}  // namespace piezo
