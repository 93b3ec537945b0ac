#include "piezo/hysteresis.hpp"

#include "piezo/csv.hpp"
#include "piezo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace piezo::hyst {

std::vector<double> FrequencyGrid::signed_schedule() const {
  std::vector<double> out;
  out.reserve(2 * positive.size());
  for (double f : positive) {
    out.push_back(f);
    out.push_back(-f);
  }
  return out;
}

FrequencyGrid frequency_grid(double f_min, double f_max, std::size_t count) {
  if (count < 2) throw ParameterError("frequency grid needs at least 2 points");
  if (!(f_min > 0.0) || !(f_max > f_min)) throw ParameterError("frequency grid requires 0 < f_min < f_max");
  FrequencyGrid g{f_min, f_max, count, {}};
  g.positive.resize(count);
  const double ratio = f_max / f_min;
  for (std::size_t i = 0; i < count; ++i)
    g.positive[i] = f_min * std::pow(ratio, static_cast<double>(i) / static_cast<double>(count - 1));
  g.positive.front() = f_min;
  g.positive.back() = f_max;
  return g;
}

std::optional<double> observed_gain(double current, double rate, double threshold) {
  if (!(std::abs(rate) >= threshold) || rate == 0.0) return std::nullopt;
  return std::abs(current / rate);
}

void HysteresisDataset::apply_exclusion(double fraction) {
  std::vector<double> mags;
  mags.reserve(samples.size());
  for (const HysteresisSample& s : samples) mags.push_back(std::abs(s.rate));
  threshold = 0.0;
  if (!mags.empty()) {
    auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
    std::nth_element(mags.begin(), mid, mags.end());
    threshold = fraction * *mid;
  }
  for (HysteresisSample& s : samples) {
    const auto m = observed_gain(s.current, s.rate, threshold);
    s.included = m.has_value() && std::isfinite(*m) && *m > 0.0;
    s.gain = s.included ? *m : 0.0;
  }
}

std::size_t HysteresisDataset::included_count(Direction d) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [d](const HysteresisSample& s) { return s.included && s.direction == d; }));
}

void write_datasets_csv(const Datasets& data, const std::filesystem::path& path) {
  csv::Writer w(path, {"element", "t", "udot", "ua", "i", "direction", "included"});
  for (const HysteresisDataset& d : data)
    for (const HysteresisSample& s : d.samples) {
      w.cell(name(d.element)).cell(s.t).cell(s.rate).cell(s.absement).cell(s.current).cell(name(s.direction));
      w.cell(static_cast<long long>(s.included ? 1 : 0));
      w.end_row();
    }
}

Datasets read_datasets_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t ce = t.column("element"), ct = t.column("t"), cr = t.column("udot"), ca = t.column("ua"),
                    ci = t.column("i"), cd = t.column("direction");
  Datasets out;
  for (Element e : kAllElements) out[index(e)].element = e;
  for (const auto& row : t.rows) {
    HysteresisSample s;
    s.t = csv::parse_double(row[ct]);
    s.rate = csv::parse_double(row[cr]);
    s.absement = csv::parse_double(row[ca]);
    s.current = csv::parse_double(row[ci]);
    s.direction = parse_direction(row[cd]);
    out[index(parse_element(row[ce]))].samples.push_back(s);
  }
  // Inclusion is a pure function of the samples; recompute rather than trust the column.
  for (HysteresisDataset& d : out) d.apply_exclusion();
  return out;
}

double kernel(Point x, Point y, double sigma_f2, double ell_rate, double ell_absement) {
  const double a = (x.rate - y.rate) / ell_rate;
  const double b = (x.absement - y.absement) / ell_absement;
  return sigma_f2 * std::exp(-0.5 * (a * a + b * b));
}

KernelSetup default_kernel_setup(const HysteresisDataset& data, std::size_t grid) {
  if (grid < 2) throw ParameterError("kernel centre grid needs at least 2 points per axis");
  double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin, amin = rmin, amax = -rmin;
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (const HysteresisSample& s : data.samples) {
    if (!s.included) continue;
    const double r = std::abs(s.rate);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    amin = std::min(amin, s.absement);
    amax = std::max(amax, s.absement);
    ++n;
    const double delta = s.gain - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (s.gain - mean);
  }
  if (n == 0) throw FitError(std::string(name(data.element)) + ": no included samples");
  if (!(rmax > rmin) || !(amax > amin)) throw FitError(std::string(name(data.element)) + ": visited region is degenerate");
  KernelSetup setup;
  const double dr = (rmax - rmin) / static_cast<double>(grid - 1);
  const double da = (amax - amin) / static_cast<double>(grid - 1);
  for (std::size_t i = 0; i < grid; ++i)
    for (std::size_t j = 0; j < grid; ++j)
      setup.centers.push_back({rmin + dr * static_cast<double>(i), amin + da * static_cast<double>(j)});
  setup.ell_rate = 0.5 * dr;
  setup.ell_absement = 0.5 * da;
  const double var = m2 / static_cast<double>(n);
  setup.sigma_f2 = var > 0.0 ? var : (mean != 0.0 ? mean * mean : 1.0);
  return setup;
}

double KernelModel::eval(Point x, Direction d) const {
  const Eigen::VectorXd& w = weights[index(d)];
  double acc = offset[index(d)];
  for (std::size_t i = 0; i < centers.size(); ++i)
    acc += w[static_cast<Eigen::Index>(i)] * kernel(x, centers[i], sigma_f2, ell_rate, ell_absement);
  return acc;
}

namespace {

// Caps the sample count by striding within cells of a 16 x 16 partition of the
// visited box. Sparse cells keep everything, so rarely visited corners still
// constrain their weights.
std::vector<const HysteresisSample*> thin_rows(const std::vector<const HysteresisSample*>& rows, std::size_t cap) {
  constexpr std::size_t kCells = 16;
  double rmax = 0.0, amax = 0.0;
  for (const HysteresisSample* s : rows) {
    rmax = std::max(rmax, std::abs(s->rate));
    amax = std::max(amax, s->absement);
  }
  auto bin = [](double v, double hi) {
    if (!(hi > 0.0)) return std::size_t{0};
    return std::min(kCells - 1, static_cast<std::size_t>(v / hi * static_cast<double>(kCells)));
  };
  std::vector<std::vector<const HysteresisSample*>> cells(kCells * kCells);
  for (const HysteresisSample* s : rows) cells[bin(std::abs(s->rate), rmax) * kCells + bin(s->absement, amax)].push_back(s);

  auto kept_for = [&](std::size_t quota) {
    std::size_t total = 0;
    for (const auto& c : cells) total += std::min(c.size(), quota);
    return total;
  };
  std::size_t lo = 0, hi = rows.size();
  while (lo + 1 < hi) {
    const std::size_t mid = (lo + hi) / 2;
    (kept_for(mid) <= cap ? lo : hi) = mid;
  }
  std::vector<const HysteresisSample*> kept;
  kept.reserve(cap);
  for (const auto& c : cells) {
    const std::size_t take = std::min(c.size(), lo);
    for (std::size_t i = 0; i < take; ++i) kept.push_back(c[i * c.size() / take]);
  }
  return kept;
}

}  // namespace

KernelModel fit_model(const HysteresisDataset& data, const KernelSetup& setup) {
  KernelModel model;
  model.element = data.element;
  model.centers = setup.centers;
  model.sigma_f2 = setup.sigma_f2;
  model.ell_rate = setup.ell_rate;
  model.ell_absement = setup.ell_absement;
  if (!(setup.sigma_f2 > 0.0 && setup.ell_rate > 0.0 && setup.ell_absement > 0.0))
    throw ParameterError("kernel hyperparameters must be positive");
  const auto m = static_cast<Eigen::Index>(setup.centers.size());
  for (Direction d : kBothDirections) {
    std::vector<const HysteresisSample*> rows;
    for (const HysteresisSample& s : data.samples)
      if (s.included && s.direction == d) rows.push_back(&s);
    const std::string where = std::string(name(data.element)) + " direction " + std::string(name(d));
    if (rows.size() < setup.centers.size())
      throw FitError(where + ": " + std::to_string(rows.size()) + " samples for " + std::to_string(m) + " centres");
    if (setup.max_samples > 0 && rows.size() > setup.max_samples) rows = thin_rows(rows, setup.max_samples);
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd K(n, m);
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Point x{std::abs(rows[r]->rate), rows[r]->absement};
      for (Eigen::Index c = 0; c < m; ++c)
        K(r, c) = kernel(x, setup.centers[c], setup.sigma_f2, setup.ell_rate, setup.ell_absement);
      y[r] = rows[r]->gain;
    }
    const double ridge = setup.ridge ? *setup.ridge : setup.ridge_factor * K.squaredNorm() / static_cast<double>(m);
    if (ridge < 0.0) throw ParameterError("ridge must be non-negative");
    // Column m carries the offset and stays out of the ridge penalty.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ridge > 0.0 ? n + m : n, m + 1);
    A.topLeftCorner(n, m) = K;
    A.col(m).head(n).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(A.rows());
    b.head(n) = y;
    if (ridge > 0.0) A.bottomLeftCorner(m, m) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(m, m);
    // Unit column norms so the rank test does not depend on sigma_f2.
    const Eigen::VectorXd scale = A.colwise().norm().transpose().cwiseMax(std::numeric_limits<double>::min());
    A = A * scale.cwiseInverse().asDiagonal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::MatrixXd& R = qr.matrixQR();
    const double rmax = R.diagonal().cwiseAbs().maxCoeff();
    const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(A.rows()) * rmax;
    for (Eigen::Index i = 0; i <= m; ++i)
      if (!(std::abs(R(i, i)) > tol)) throw FitError(where + ": least-squares system is rank deficient");
    const Eigen::VectorXd sol = qr.solve(b).cwiseQuotient(scale);
    model.weights[index(d)] = sol.head(m);
    model.offset[index(d)] = sol[m];
    model.ridge[index(d)] = ridge;
    model.samples_used[index(d)] = rows.size();
  }
  return model;
}

double RambergOsgood::eval(double absement) const { return h1 + h2 * std::pow(absement, h3); }

namespace {

struct LinearFit {
  double h1 = 0.0, h2 = 0.0, sse = std::numeric_limits<double>::infinity();
};

LinearFit fit_fixed_exponent(const std::vector<double>& a, const std::vector<double>& g, double h3) {
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::pow(a[i], h3);
    y[i] = g[i];
  }
  const Eigen::Vector2d c = X.householderQr().solve(y);
  LinearFit f{c[0], c[1], (X * c - y).squaredNorm()};
  if (!std::isfinite(f.sse)) f.sse = std::numeric_limits<double>::infinity();
  return f;
}

}  // namespace

RambergOsgood fit_ramberg_osgood(const std::vector<double>& absement, const std::vector<double>& gain, double h3_min,
                                 double h3_max) {
  if (absement.empty() || absement.size() != gain.size()) throw FitError("Ramberg-Osgood fit needs nonempty data");
  const auto [lo, hi] = std::minmax_element(absement.begin(), absement.end());
  if (!(*hi > *lo)) throw FitError("Ramberg-Osgood fit needs more than one absement value");
  constexpr int kScan = 80;
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  auto h3_at = [&](int i) { return h3_min + (h3_max - h3_min) * i / kScan; };
  for (int i = 0; i <= kScan; ++i) {
    const double sse = fit_fixed_exponent(absement, gain, h3_at(i)).sse;
    if (sse < best_sse) {
      best_sse = sse;
      best = i;
    }
  }
  // golden-section refinement on the bracketing cells
  double a = h3_at(std::max(best - 1, 0)), b = h3_at(std::min(best + 1, kScan));
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = fit_fixed_exponent(absement, gain, x1).sse, f2 = fit_fixed_exponent(absement, gain, x2).sse;
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(b)); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = fit_fixed_exponent(absement, gain, x1).sse;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = fit_fixed_exponent(absement, gain, x2).sse;
    }
  }
  double h3 = 0.5 * (a + b);
  LinearFit lf = fit_fixed_exponent(absement, gain, h3);
  if (best_sse < lf.sse) {
    h3 = h3_at(best);
    lf = fit_fixed_exponent(absement, gain, h3);
  }
  return {lf.h1, lf.h2, h3};
}

RambergOsgoodFit fit_ramberg_osgood(const HysteresisDataset& data) {
  RambergOsgoodFit out;
  for (Direction d : kBothDirections) {
    std::vector<double> a, g;
    for (const HysteresisSample& s : data.samples)
      if (s.included && s.direction == d) {
        a.push_back(s.absement);
        g.push_back(s.gain);
      }
    out.params[index(d)] = fit_ramberg_osgood(a, g);
  }
  return out;
}

namespace {

template <class F>
double rms_over_included(const HysteresisDataset& data, F&& predict) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const HysteresisSample& s : data.samples) {
    if (!s.included) continue;
    const double r = predict(s) - s.gain;
    acc += r * r;
    ++n;
  }
  if (n == 0) throw FitError("no included samples for residual");
  return std::sqrt(acc / static_cast<double>(n));
}

}  // namespace

double residual_rms(const HysteresisDataset& data, const KernelModel& model) {
  return rms_over_included(data, [&](const HysteresisSample& s) {
    return model.eval({std::abs(s.rate), s.absement}, s.direction);
  });
}

double residual_rms(const HysteresisDataset& data, const RambergOsgoodFit& model) {
  return rms_over_included(data, [&](const HysteresisSample& s) { return model.params[index(s.direction)].eval(s.absement); });
}

LookupTable2D::LookupTable2D(std::vector<double> rate_axis, std::vector<double> absement_axis, std::vector<double> values)
    : rate_axis_(std::move(rate_axis)), absement_axis_(std::move(absement_axis)), values_(std::move(values)) {
  auto check_axis = [](const std::vector<double>& ax) {
    if (ax.size() < 2) throw ParameterError("lookup axis needs at least 2 nodes");
    for (std::size_t i = 1; i < ax.size(); ++i)
      if (!(ax[i] > ax[i - 1])) throw ParameterError("lookup axis must be strictly increasing");
  };
  check_axis(rate_axis_);
  check_axis(absement_axis_);
  if (values_.size() != rate_axis_.size() * absement_axis_.size()) throw ParameterError("lookup value count mismatch");
}

namespace {

// Cell index and fractional position with clamping to the edge nodes.
std::pair<std::size_t, double> locate(const std::vector<double>& axis, double x) {
  const std::size_t n = axis.size();
  if (!(x > axis.front())) return {0, 0.0};
  if (x >= axis.back()) return {n - 2, 1.0};
  const double h = (axis.back() - axis.front()) / static_cast<double>(n - 1);
  auto i = static_cast<std::size_t>((x - axis.front()) / h);
  if (i > n - 2) i = n - 2;
  while (i > 0 && axis[i] > x) --i;
  while (i < n - 2 && axis[i + 1] <= x) ++i;
  return {i, (x - axis[i]) / (axis[i + 1] - axis[i])};
}

}  // namespace

double LookupTable2D::eval(double rate, double absement) const {
  const auto [i, t1] = locate(rate_axis_, rate);
  const auto [j, t2] = locate(absement_axis_, absement);
  const std::size_t na = absement_axis_.size();
  const double y00 = values_[i * na + j], y10 = values_[(i + 1) * na + j];
  const double y01 = values_[i * na + j + 1], y11 = values_[(i + 1) * na + j + 1];
  return (1.0 - t1) * (1.0 - t2) * y00 + t1 * (1.0 - t2) * y10 + (1.0 - t1) * t2 * y01 + t1 * t2 * y11;
}

double LookupTable2D::min_value() const { return *std::min_element(values_.begin(), values_.end()); }
double LookupTable2D::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

LookupTable2D LookupTable2D::scaled(double factor) const {
  std::vector<double> v = values_;
  for (double& x : v) x *= factor;
  return LookupTable2D(rate_axis_, absement_axis_, std::move(v));
}

std::vector<double> linear_axis(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw ParameterError("linear axis needs n >= 2 and hi > lo");
  std::vector<double> ax(n);
  for (std::size_t i = 0; i < n; ++i) ax[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  ax.back() = hi;
  return ax;
}

PerDirection<LookupTable2D> build_lut(const KernelModel& model, const std::vector<double>& rate_axis,
                                      const std::vector<double>& absement_axis) {
  PerDirection<LookupTable2D> out;
  for (Direction d : kBothDirections) {
    std::vector<double> values;
    values.reserve(rate_axis.size() * absement_axis.size());
    for (double r : rate_axis)
      for (double a : absement_axis) {
        const double v = model.eval({r, a}, d);
        if (!(v > 0.0))
          throw FitError(std::string(name(model.element)) + " direction " + std::string(name(d)) +
                         ": non-positive lookup node at rate " + csv::format(r) + ", absement " + csv::format(a));
        values.push_back(v);
      }
    out[index(d)] = LookupTable2D(rate_axis, absement_axis, std::move(values));
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> default_lut_axes(const HysteresisDataset& data, std::size_t nodes) {
  double rmax = 0.0, amax = 0.0;
  for (const HysteresisSample& s : data.samples)
    if (s.included) {
      rmax = std::max(rmax, std::abs(s.rate));
      amax = std::max(amax, s.absement);
    }
  if (!(rmax > 0.0) || !(amax > 0.0)) throw FitError(std::string(name(data.element)) + ": no visited region for lookup axes");
  return {linear_axis(0.0, rmax, nodes), linear_axis(0.0, amax, nodes)};
}

double lut_eval(const LookupTable2D& table, double rate, double absement) { return table.eval(rate, absement); }

void write_luts_csv(const LutSet& luts, const std::filesystem::path& path) {
  csv::Writer w(path, {"element", "direction", "rate_index", "absement_index", "rate", "absement", "gain"});
  for (Element e : kAllElements)
    for (Direction d : kBothDirections) {
      const LookupTable2D& t = luts[index(e)][index(d)];
      for (std::size_t i = 0; i < t.rate_axis().size(); ++i)
        for (std::size_t j = 0; j < t.absement_axis().size(); ++j) {
          w.cell(name(e)).cell(name(d)).cell(static_cast<long long>(i)).cell(static_cast<long long>(j));
          w.cell(t.rate_axis()[i]).cell(t.absement_axis()[j]).cell(t.node(i, j));
          w.end_row();
        }
    }
}

LutSet read_luts_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t ce = t.column("element"), cd = t.column("direction"), ci = t.column("rate_index"),
                    cj = t.column("absement_index"), cr = t.column("rate"), ca = t.column("absement"),
                    cg = t.column("gain");
  struct Acc {
    std::vector<double> rate, absement;
    std::vector<std::tuple<std::size_t, std::size_t, double>> cells;
  };
  PerElement<PerDirection<Acc>> acc;
  for (const auto& row : t.rows) {
    Acc& a = acc[index(parse_element(row[ce]))][index(parse_direction(row[cd]))];
    const auto i = static_cast<std::size_t>(std::stoul(row[ci]));
    const auto j = static_cast<std::size_t>(std::stoul(row[cj]));
    if (a.rate.size() <= i) a.rate.resize(i + 1);
    if (a.absement.size() <= j) a.absement.resize(j + 1);
    a.rate[i] = csv::parse_double(row[cr]);
    a.absement[j] = csv::parse_double(row[ca]);
    a.cells.emplace_back(i, j, csv::parse_double(row[cg]));
  }
  LutSet out;
  for (Element e : kAllElements)
    for (Direction d : kBothDirections) {
      Acc& a = acc[index(e)][index(d)];
      std::vector<double> values(a.rate.size() * a.absement.size(), 0.0);
      for (const auto& [i, j, v] : a.cells) values[i * a.absement.size() + j] = v;
      out[index(e)][index(d)] = LookupTable2D(a.rate, a.absement, std::move(values));
    }
  return out;
}

}  // namespace piezo::hyst
