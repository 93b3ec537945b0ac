#include "piezo/profile.hpp"

#include <cmath>

namespace piezo {

CompensationProfile CompensationProfile::zero(std::size_t nodes, Direction d, double reference_frequency) {
  return CompensationProfile{d, reference_frequency, std::vector<double>(nodes, 0.0)};
}

BasisWeight basis_weight(double alpha, std::size_t nodes) {
  const double spacing = kTwoPi / static_cast<double>(nodes);
  double pos = alpha / spacing;
  auto c = static_cast<std::size_t>(std::floor(pos));
  if (c >= nodes) c = nodes - 1;  // alpha rounding just below 2π
  const double frac = pos - static_cast<double>(c);
  BasisWeight w;
  w.lower = c;
  w.upper = (c + 1) % nodes;
  w.w_upper = frac;
  w.w_lower = 1.0 - frac;
  return w;
}

double CompensationProfile::value(double alpha) const {
  if (coefficients.empty()) return 0.0;
  const BasisWeight w = basis_weight(alpha, coefficients.size());
  return w.w_lower * coefficients[w.lower] + w.w_upper * coefficients[w.upper];
}

double CompensationProfile::rate(double alpha, double drive_frequency) const {
  const double v = value(alpha);
  if (reference_frequency <= 0.0) return v;
  return v * std::abs(drive_frequency) / reference_frequency;
}

}  // namespace piezo
