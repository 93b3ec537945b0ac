#include "piezo/ilc.hpp"

#include "piezo/csv.hpp"
#include "piezo/drive.hpp"
#include "piezo/errors.hpp"
#include "piezo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace piezo::ilc {

LiftedOperator::LiftedOperator(lti::TransferFunction source, std::size_t horizon)
    : source_(std::move(source)), horizon_(horizon) {
  if (horizon_ < 1) throw ParameterError("lifted horizon must be at least 1");
  impulse_ = source_.impulse_response(horizon_);
}

std::vector<double> LiftedOperator::apply(std::span<const double> x) const {
  if (x.size() != horizon_) throw ParameterError("lifted operand length differs from the horizon");
  return source_.filter(x);
}

std::vector<double> LiftedOperator::apply_transpose(std::span<const double> x) const {
  if (x.size() != horizon_) throw ParameterError("lifted operand length differs from the horizon");
  std::vector<double> rev(x.rbegin(), x.rend());
  std::vector<double> y = source_.filter(rev);
  std::reverse(y.begin(), y.end());
  return y;
}

Eigen::MatrixXd LiftedOperator::matrix() const {
  const auto n = static_cast<Eigen::Index>(horizon_);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = impulse_[static_cast<std::size_t>(i - j)];
  return m;
}

LiftedOperator lift(const lti::TransferFunction& tf, std::size_t horizon) { return LiftedOperator(tf, horizon); }

Basis::Basis(std::span<const double> alphas, std::size_t nodes) : nodes_(nodes) {
  if (nodes_ < 2) throw ParameterError("basis needs at least two nodes");
  weights_.reserve(alphas.size());
  for (double a : alphas) {
    if (!(a >= 0.0 && a < kTwoPi)) throw ParameterError("basis angle outside [0, 2pi): " + csv::format(a));
    weights_.push_back(basis_weight(a, nodes_));
  }
}

std::vector<double> Basis::synthesize(std::span<const double> gamma) const {
  if (gamma.size() != nodes_) throw ParameterError("coefficient count differs from the basis size");
  std::vector<double> out(weights_.size());
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const BasisWeight& w = weights_[k];
    out[k] = w.w_lower * gamma[w.lower] + w.w_upper * gamma[w.upper];
  }
  return out;
}

Eigen::MatrixXd Basis::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(nodes_));
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const BasisWeight& w = weights_[k];
    const auto r = static_cast<Eigen::Index>(k);
    m(r, static_cast<Eigen::Index>(w.lower)) += w.w_lower;
    m(r, static_cast<Eigen::Index>(w.upper)) += w.w_upper;
  }
  return m;
}

Eigen::MatrixXd Basis::filtered(const LiftedOperator& h) const {
  if (h.horizon() != rows()) throw ParameterError("operator horizon differs from the basis length");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(nodes_));
  std::vector<double> col(rows());
  for (std::size_t c = 0; c < nodes_; ++c) {
    std::fill(col.begin(), col.end(), 0.0);
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const BasisWeight& w = weights_[k];
      if (w.lower == c) col[k] += w.w_lower;
      if (w.upper == c) col[k] += w.w_upper;
    }
    const std::vector<double> f = h.apply(col);
    out.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
  }
  return out;
}

Basis basis_matrix(std::span<const double> alphas, std::size_t nodes) { return Basis(alphas, nodes); }

LearningFilter design_L(const lti::TransferFunction& g_hat, double beta, std::optional<std::size_t> delay,
                        double max_zero_radius) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("learning gain must lie in (0, 1]");
  if (!(max_zero_radius > 0.0 && max_zero_radius < 1.0)) throw ParameterError("zero radius limit must lie in (0, 1)");
  const std::vector<double>& num = g_hat.num();
  double peak = 0.0;
  for (double b : num) peak = std::max(peak, std::abs(b));
  if (!(peak > 0.0)) throw DesignError("model has a zero numerator");
  std::size_t lead = 0;
  while (lead < num.size() && std::abs(num[lead]) <= 1e-12 * peak) ++lead;
  const std::size_t d = delay.value_or(lead);
  if (lead > d)
    throw DesignError("impulse coefficient " + std::to_string(d) + " of the model is zero; first nonzero at " +
                      std::to_string(lead));

  std::vector<double> tail(num.begin() + static_cast<std::ptrdiff_t>(lead), num.end());
  double gain = tail.front();
  std::vector<lti::Complex> zeros = lti::poly_roots(tail);
  for (lti::Complex& z : zeros) {
    double m = std::abs(z);
    if (m > 1.0) {
      gain *= m;
      z = 1.0 / std::conj(z);
      m = 1.0 / m;
    }
    if (m > max_zero_radius) {
      const lti::Complex pulled = z * (max_zero_radius / m);
      const double dc_new = std::abs(1.0 - pulled);
      if (dc_new > 0.0) gain *= std::abs(1.0 - z) / dc_new;
      z = pulled;
    }
  }
  std::vector<double> inv_den = lti::poly_from_roots(zeros);
  for (double& c : inv_den) c *= gain;

  std::vector<double> inv_num(d - lead, 0.0);
  for (double a : g_hat.den()) inv_num.push_back(beta * a);
  return {lti::TransferFunction(std::move(inv_num), std::move(inv_den)), d, beta};
}

lti::TransferFunction design_Q(double cutoff_hz, int order, double sample_rate) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < 0.5 * sample_rate))
    throw ParameterError("Q cutoff must lie in (0, F_s/2), got " + csv::format(cutoff_hz) + " Hz");
  return lti::butterworth_lowpass(order, cutoff_hz, sample_rate);
}

void IlcFilters::validate() const {
  if (!(learning.beta > 0.0 && learning.beta <= 1.0)) throw ParameterError("learning gain must lie in (0, 1]");
  if (!learning.filter.is_stable()) throw DesignError("learning filter L is unstable");
  if (!robustness.is_stable()) throw DesignError("robustness filter Q is unstable");
}

IlcFilters default_filters(const lti::TransferFunction& g_hat, double sample_rate, double beta, double q_cutoff_hz,
                           int q_order) {
  IlcFilters f{design_L(g_hat, beta), design_Q(q_cutoff_hz, q_order, sample_rate)};
  f.validate();
  return f;
}

std::vector<double> ilc_update(std::span<const double> f_proj, std::span<const double> error, const IlcFilters& filters,
                               std::size_t learn_from) {
  if (f_proj.size() != error.size()) throw ParameterError("profile and error sequences differ in length");
  std::vector<double> v = filters.learning.filter.filter(error);
  std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(learn_from, v.size())), 0.0);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] += f_proj[k];
  return filters.robustness.filter(v);
}

Projector::Projector(const Basis& basis, const LiftedOperator& g_hat)
    : g_(&g_hat), b_(basis.filtered(g_hat)) {
  scale_ = b_.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < scale_.size(); ++c)
    if (!(scale_[c] > 0.0))
      throw ProjectionError("basis node " + std::to_string(c) + " is not excited by the angle sequence");
  qr_.compute(b_ * scale_.cwiseInverse().asDiagonal());
  const auto& r = qr_.matrixQR();
  const double rmax = r.diagonal().cwiseAbs().maxCoeff();
  const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(b_.rows()) * rmax;
  for (Eigen::Index i = 0; i < r.cols(); ++i)
    if (!(std::abs(r(i, i)) > tol)) throw ProjectionError("filtered basis is rank deficient at column " + std::to_string(i));
}

std::vector<double> Projector::solve(std::span<const double> f) const {
  const std::vector<double> gf = g_->apply(f);
  const Eigen::Map<const Eigen::VectorXd> rhs(gf.data(), static_cast<Eigen::Index>(gf.size()));
  const Eigen::VectorXd x = qr_.solve(rhs).cwiseQuotient(scale_);
  return {x.data(), x.data() + x.size()};
}

double Projector::normal_residual(std::span<const double> f, std::span<const double> gamma) const {
  const std::vector<double> gf = g_->apply(f);
  const Eigen::Map<const Eigen::VectorXd> y(gf.data(), static_cast<Eigen::Index>(gf.size()));
  const Eigen::Map<const Eigen::VectorXd> g(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
  const Eigen::VectorXd bty = b_.transpose() * y;
  const double denom = bty.norm();
  const Eigen::VectorXd res = b_.transpose() * (y - b_ * g);
  return denom > 0.0 ? res.norm() / denom : res.norm();
}

std::vector<double> project(std::span<const double> f, const Basis& basis, const LiftedOperator& g_hat) {
  return Projector(basis, g_hat).solve(f);
}

namespace {

double largest_singular_value(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

// Thin Q and R of a tall matrix.
struct ThinQR {
  Eigen::MatrixXd q, r;
};

ThinQR thin_qr(const Eigen::MatrixXd& a) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  ThinQR out;
  out.q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  out.r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  return out;
}

Eigen::MatrixXd apply_transpose_columns(const LiftedOperator& h, const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  std::vector<double> col(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::VectorXd::Map(col.data(), m.rows()) = m.col(c);
    const std::vector<double> y = h.apply_transpose(col);
    out.col(c) = Eigen::Map<const Eigen::VectorXd>(y.data(), m.rows());
  }
  return out;
}

}  // namespace

Certificates projection_certificates(const Basis& basis, const LiftedOperator& g_hat, const LiftedOperator& g_true,
                                     const LiftedOperator& q, const LiftedOperator& l, std::size_t cap) {
  const std::size_t n = basis.rows();
  if (n > cap)
    throw ParameterError("certificate horizon " + std::to_string(n) + " exceeds the cap of " + std::to_string(cap) +
                         " samples; reduce N");
  for (const LiftedOperator* op : {&g_hat, &g_true, &q, &l})
    if (op->horizon() != n) throw ParameterError("certificate operators must share the basis horizon");

  const Projector rank_check(basis, g_hat);  // throws on a rank-deficient filtered basis
  Certificates c;
  c.horizon = n;
  const Eigen::MatrixXd b = basis.filtered(g_hat);
  const ThinQR bq = thin_qr(b);
  // P^T = G_hat^T B (B^T B)^{-1} = G_hat^T Q_B R_B^{-T}
  const Eigen::MatrixXd y = bq.r.triangularView<Eigen::Upper>().solve(bq.q.transpose()).transpose();
  const Eigen::MatrixXd pt = apply_transpose_columns(g_hat, y);

  const Eigen::MatrixXd psi = basis.dense();
  const ThinQR psq = thin_qr(psi);
  const ThinQR ptq = thin_qr(pt);

  c.sigma_d = largest_singular_value(psq.r * ptq.r.transpose());
  const Eigen::MatrixXd ppsi = pt.transpose() * psi;  // P Psi, identity in exact arithmetic
  const Eigen::MatrixXd defect = ppsi - Eigen::MatrixXd::Identity(ppsi.rows(), ppsi.cols());
  c.idempotency_defect = largest_singular_value(psq.r * defect * ptq.r.transpose());
  c.spectral_radius_d = ppsi.eigenvalues().cwiseAbs().maxCoeff();

  // X^T = (I - G^T L^T) Q^T P^T, then sigma(D Q (I - L G)) = sigma(R_psi R_X^T).
  const Eigen::MatrixXd qt = apply_transpose_columns(q, pt);
  const Eigen::MatrixXd xt = qt - apply_transpose_columns(g_true, apply_transpose_columns(l, qt));
  c.lemma_value = largest_singular_value(psq.r * thin_qr(xt).r.transpose());
  return c;
}

std::vector<double> uniform_frequency_grid(std::size_t points) {
  // (0, pi]: the integrator in G makes omega = 0 a removable 0/0.
  if (points < 1) throw ParameterError("frequency grid needs at least one point");
  std::vector<double> w(points);
  for (std::size_t i = 0; i < points; ++i) w[i] = kPi * static_cast<double>(i + 1) / static_cast<double>(points);
  return w;
}

double check_convergence_freq(const lti::TransferFunction& q, const lti::TransferFunction& l,
                              const lti::TransferFunction& g, std::span<const double> omega) {
  double sup = 0.0;
  for (double w : omega) sup = std::max(sup, std::abs(q.response(w) * (1.0 - l.response(w) * g.response(w))));
  return sup;
}

IlcResult run_ilc(const sim::PlantConfig& plant, const control::ControllerConfig& controller,
                  const waveform::StrokePlan& plan, const lti::TransferFunction& g_hat, const IlcFilters& filters,
                  const IlcSettings& s) {
  filters.validate();
  if (s.drive_frequency == 0.0) throw ParameterError("learning drive frequency must be nonzero");
  if (s.trials < 1) throw ParameterError("at least one trial is required");
  const double fs = plant.sample_rate;
  const double ts = plant.sample_time();
  const double f = s.drive_frequency;
  const Direction dir = direction_of(f);
  const std::size_t n = control::step_samples(f, fs, s.steps_per_trial);
  const std::vector<double> schedule = control::constant_schedule(f, n);
  const std::vector<double> alphas = waveform::alpha_sequence(schedule, ts);
  const auto nominal = static_cast<std::size_t>(std::floor(fs / std::abs(f)));
  const std::vector<metrics::StepSegment> steps = metrics::step_segments(alphas, f, nominal > 2 ? nominal - 2 : 1);
  if (steps.size() <= s.excluded_steps) throw ParameterError("trial too short for the excluded lead-in steps");
  const std::vector<metrics::StepSegment> learning(steps.begin() + static_cast<std::ptrdiff_t>(s.excluded_steps), steps.end());
  const std::size_t learn_from = learning.front().begin;

  const Basis basis(alphas, s.nodes);
  const LiftedOperator lifted(g_hat, n);
  const Projector projector(basis, lifted);
  const std::vector<double> reference = waveform::integrate_reference(schedule, plan, ts, &g_hat, true);

  IlcResult out;
  std::vector<double> gamma(s.nodes, 0.0);
  out.gamma_history.push_back(gamma);
  std::size_t rising = 0;
  for (std::size_t j = 0; j < s.trials; ++j) {
    sim::PlantConfig cfg = plant;
    if (s.seed_policy == SeedPolicy::PerTrial) cfg.seed = plant.seed + j;
    CompensationProfile prof{dir, std::abs(f), gamma};
    control::ProfilePair pair;
    (dir == Direction::Plus ? pair.plus : pair.minus) = prof;
    control::ClosedLoop loop(cfg, controller, plan, pair);

    const bool record = s.keep_traces && (j == 0 || j + 1 == s.trials);
    sim::Trace trace;
    trace.sample_rate = fs;
    if (record) trace.reserve(n);
    std::vector<double> y(n);
    loop.run(schedule, [&](const control::DriveSample& d) {
      y[d.k - 1] = d.plant->measured;
      if (record) trace.append(d.t, d.alpha, *d.state, *d.plant, reference[d.k - 1]);
    });
    if (record) (j == 0 ? out.first_trace : out.last_trace) = std::move(trace);

    std::vector<double> e(n);
    for (std::size_t k = 0; k < n; ++k) e[k] = reference[k] - y[k];
    const std::vector<double> per_step = metrics::per_step_rmsd(e, learning);
    out.rmsd.push_back(std::accumulate(per_step.begin(), per_step.end(), 0.0) / static_cast<double>(per_step.size()));

    if (j > 0 && out.rmsd[j] > (1.0 + s.divergence_growth) * out.rmsd[j - 1]) {
      if (++rising >= s.divergence_run) {
        std::ostringstream msg;
        msg << "RMSD rose by more than " << s.divergence_growth * 100.0 << "% in " << rising
            << " consecutive trials at f = " << f << " Hz; history (m):";
        for (double v : out.rmsd) msg << ' ' << v;
        throw DivergenceError(msg.str());
      }
    } else {
      rising = 0;
    }

    const std::vector<double> next = ilc_update(basis.synthesize(gamma), e, filters, learn_from);
    gamma = projector.solve(next);
    out.gamma_history.push_back(gamma);
  }
  out.profile = CompensationProfile{dir, std::abs(f), gamma};
  return out;
}

void write_profile_csv(const std::filesystem::path& path, std::span<const CompensationProfile> profiles) {
  csv::Writer w(path, {"alpha (rad)", "gamma (m/s)", "direction", "reference frequency (Hz)"});
  for (const CompensationProfile& p : profiles)
    for (std::size_t c = 0; c < p.nodes(); ++c)
      w.cell(p.spacing() * static_cast<double>(c)).cell(p.coefficients[c]).cell(name(p.direction)).cell(p.reference_frequency).end_row();
}

std::vector<CompensationProfile> read_profile_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const auto values = t.numeric_column("gamma (m/s)");
  const std::size_t dir_col = t.column("direction");
  const auto refs = t.numeric_column("reference frequency (Hz)");
  std::vector<CompensationProfile> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Direction d = parse_direction(t.rows[i][dir_col]);
    if (out.empty() || out.back().direction != d) out.push_back(CompensationProfile{d, refs[i], {}});
    out.back().coefficients.push_back(values[i]);
  }
  return out;
}

void write_rmsd_csv(const std::filesystem::path& path, Direction d, std::span<const double> rmsd) {
  csv::Writer w(path, {"trial", "direction", "rmsd (m)"});
  for (std::size_t j = 0; j < rmsd.size(); ++j)
    w.cell(static_cast<long long>(j)).cell(name(d)).cell(rmsd[j]).end_row();
}

std::vector<double> read_rmsd_csv(const std::filesystem::path& path) { return csv::read(path).numeric_column("rmsd (m)"); }

}  // namespace piezo::ilc
