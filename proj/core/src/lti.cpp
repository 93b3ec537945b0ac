#include "piezo/lti.hpp"

#include "piezo/errors.hpp"
#include "piezo/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace piezo::lti {

namespace {

std::vector<double> trim_trailing(std::vector<double> v) {
  while (v.size() > 1 && v.back() == 0.0) v.pop_back();
  return v;
}

}  // namespace

TransferFunction::TransferFunction() : num_{1.0}, den_{1.0} {}

TransferFunction::TransferFunction(std::vector<double> num, std::vector<double> den)
    : num_(std::move(num)), den_(std::move(den)) {
  if (num_.empty()) num_ = {0.0};
  if (den_.empty() || den_.front() == 0.0) throw ParameterError("transfer function needs a nonzero leading denominator");
  const double a0 = den_.front();
  for (double& b : num_) b /= a0;
  for (double& a : den_) a /= a0;
  num_ = trim_trailing(std::move(num_));
  den_ = trim_trailing(std::move(den_));
}

TransferFunction TransferFunction::gain(double g) { return TransferFunction({g}, {1.0}); }

TransferFunction TransferFunction::delay(std::size_t samples) {
  std::vector<double> num(samples + 1, 0.0);
  num.back() = 1.0;
  return TransferFunction(std::move(num), {1.0});
}

TransferFunction TransferFunction::integrator(double sample_time, bool delayed) {
  if (delayed) return TransferFunction({0.0, sample_time}, {1.0, -1.0});
  return TransferFunction({sample_time}, {1.0, -1.0});
}

Complex TransferFunction::response(double omega) const {
  const Complex zinv = std::polar(1.0, -omega);
  auto eval = [&](const std::vector<double>& c) {
    Complex acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * zinv + *it;
    return acc;
  };
  return eval(num_) / eval(den_);
}

std::vector<double> TransferFunction::impulse_response(std::size_t n) const {
  std::vector<double> x(n, 0.0);
  if (n > 0) x[0] = 1.0;
  return filter(x);
}

std::vector<double> TransferFunction::filter(std::span<const double> x) const {
  Filter f(*this);
  std::vector<double> y(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) y[k] = f.step(x[k]);
  return y;
}

std::size_t TransferFunction::relative_degree() const {
  std::size_t d = 0;
  while (d < num_.size() && num_[d] == 0.0) ++d;
  return d;
}

std::vector<Complex> TransferFunction::poles() const { return poly_roots(den_); }
std::vector<Complex> TransferFunction::zeros() const { return poly_roots(num_); }

bool TransferFunction::is_stable(double radius) const {
  for (const Complex& p : poles())
    if (std::abs(p) >= radius) return false;
  return true;
}

TransferFunction TransferFunction::operator*(const TransferFunction& other) const {
  return TransferFunction(poly_multiply(num_, other.num_), poly_multiply(den_, other.den_));
}

TransferFunction TransferFunction::scaled(double g) const {
  std::vector<double> num = num_;
  for (double& b : num) b *= g;
  return TransferFunction(std::move(num), den_);
}

Filter::Filter(const TransferFunction& tf) : b_(tf.num()), a_(tf.den()) {
  const std::size_t n = std::max(b_.size(), a_.size());
  b_.resize(n, 0.0);
  a_.resize(n, 0.0);
  state_.assign(n, 0.0);
}

double Filter::step(double x) {
  if (b_.empty()) return 0.0;
  const std::size_t n = b_.size();
  const double y = b_[0] * x + state_[0];
  for (std::size_t i = 0; i + 1 < n; ++i) state_[i] = b_[i + 1] * x - a_[i + 1] * y + state_[i + 1];
  state_[n - 1] = 0.0;
  return y;
}

void Filter::reset() { std::fill(state_.begin(), state_.end(), 0.0); }

std::vector<double> poly_multiply(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

std::vector<double> poly_from_roots(std::span<const Complex> roots) {
  std::vector<Complex> c{1.0};
  for (const Complex& r : roots) {
    std::vector<Complex> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= r * c[i];
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

std::vector<Complex> poly_roots(std::span<const double> coeffs) {
  std::size_t lead = 0;
  while (lead < coeffs.size() && coeffs[lead] == 0.0) ++lead;
  std::size_t last = coeffs.size();
  while (last > lead && coeffs[last - 1] == 0.0) --last;
  std::vector<Complex> roots(coeffs.size() - last, Complex(0.0));  // trailing zeros are roots at z = 0
  if (last <= lead + 1) return roots;
  const auto n = static_cast<Eigen::Index>(last - lead - 1);
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) companion(0, j) = -coeffs[lead + 1 + j] / coeffs[lead];
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  for (Eigen::Index i = 0; i < n; ++i) roots.push_back(solver.eigenvalues()(i));
  return roots;
}

TransferFunction butterworth_lowpass(int order, double cutoff_hz, double sample_rate) {
  if (order < 1) throw ParameterError("Butterworth order must be >= 1");
  if (!(sample_rate > 0.0) || !(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0)
    throw ParameterError("Butterworth cutoff must lie in (0, sample_rate/2)");
  const double fs2 = 2.0 * sample_rate;
  const double wc = fs2 * std::tan(kPi * cutoff_hz / sample_rate);
  std::vector<Complex> zpoles;
  for (int k = 1; k <= order; ++k) {
    const Complex s = wc * std::polar(1.0, kPi * (2.0 * k + order - 1) / (2.0 * order));
    zpoles.push_back((fs2 + s) / (fs2 - s));
  }
  std::vector<Complex> zzeros(static_cast<std::size_t>(order), Complex(-1.0));
  std::vector<double> num = poly_from_roots(zzeros);
  std::vector<double> den = poly_from_roots(zpoles);
  double sn = 0.0, sd = 0.0;
  for (double b : num) sn += b;
  for (double a : den) sd += a;
  for (double& b : num) b *= sd / sn;
  return TransferFunction(std::move(num), std::move(den));
}

}  // namespace piezo::lti
