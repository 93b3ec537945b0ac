#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace piezo::lti {

using Complex = std::complex<double>;

// Rational discrete-time filter in powers of the backward shift q^{-1}:
//   H(q) = (num[0] + num[1] q^{-1} + ...) / (den[0] + den[1] q^{-1} + ...).
// Constructors normalize den[0] to 1.
class TransferFunction {
 public:
  TransferFunction();  // unit gain
  TransferFunction(std::vector<double> num, std::vector<double> den);

  static TransferFunction gain(double g);
  static TransferFunction delay(std::size_t samples);
  // y_k = y_{k-1} + T_s x_k; with `delayed`, y_k = y_{k-1} + T_s x_{k-1}.
  static TransferFunction integrator(double sample_time, bool delayed = false);

  const std::vector<double>& num() const { return num_; }
  const std::vector<double>& den() const { return den_; }

  Complex response(double omega) const;  // omega in rad/sample
  std::vector<double> impulse_response(std::size_t n) const;
  std::vector<double> filter(std::span<const double> x) const;

  // Number of leading zero numerator coefficients (pure delay in samples).
  std::size_t relative_degree() const;
  std::vector<Complex> poles() const;
  std::vector<Complex> zeros() const;
  bool is_stable(double radius = 1.0) const;
  double dc_gain() const { return response(0.0).real(); }

  TransferFunction operator*(const TransferFunction& other) const;
  TransferFunction scaled(double g) const;

 private:
  std::vector<double> num_;
  std::vector<double> den_;
};

// Streaming direct-form-II-transposed realization; zero initial state.
class Filter {
 public:
  Filter() = default;
  explicit Filter(const TransferFunction& tf);
  double step(double x);
  void reset();

 private:
  std::vector<double> b_, a_, state_;
};

std::vector<double> poly_multiply(std::span<const double> a, std::span<const double> b);
// Real coefficients of prod (1 - r_i q^{-1}); complex roots must come in conjugate pairs.
std::vector<double> poly_from_roots(std::span<const Complex> roots);
// Roots in z of c0 + c1 z^{-1} + ... after stripping leading zeros.
std::vector<Complex> poly_roots(std::span<const double> coeffs);

// Butterworth lowpass via the bilinear transform with cutoff prewarping; unity DC gain.
TransferFunction butterworth_lowpass(int order, double cutoff_hz, double sample_rate);

}  // namespace piezo::lti
