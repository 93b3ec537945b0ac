#pragma once

#include "piezo/controller.hpp"
#include "piezo/lti.hpp"
#include "piezo/plant.hpp"
#include "piezo/profile.hpp"
#include "piezo/waveform.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace piezo::ilc {

// Finite-horizon lower-triangular Toeplitz view of a causal LTI filter.
class LiftedOperator {
 public:
  LiftedOperator(lti::TransferFunction source, std::size_t horizon);

  std::size_t horizon() const { return horizon_; }
  const lti::TransferFunction& source() const { return source_; }
  const std::vector<double>& impulse() const { return impulse_; }

  // y = H x by causal filtering from rest; x.size() must equal the horizon.
  std::vector<double> apply(std::span<const double> x) const;
  // y = H^T x, i.e. filtering the time-reversed sequence.
  std::vector<double> apply_transpose(std::span<const double> x) const;
  Eigen::MatrixXd matrix() const;

 private:
  lti::TransferFunction source_;
  std::size_t horizon_;
  std::vector<double> impulse_;
};

LiftedOperator lift(const lti::TransferFunction& tf, std::size_t horizon);

// Piecewise-linear angle basis: two wraparound-aware weights per sample.
class Basis {
 public:
  Basis(std::span<const double> alphas, std::size_t nodes);

  std::size_t rows() const { return weights_.size(); }
  std::size_t nodes() const { return nodes_; }
  const std::vector<BasisWeight>& weights() const { return weights_; }

  std::vector<double> synthesize(std::span<const double> gamma) const;  // Psi gamma
  Eigen::MatrixXd dense() const;
  // Columns filtered through the operator: B = H Psi.
  Eigen::MatrixXd filtered(const LiftedOperator& h) const;

 private:
  std::size_t nodes_;
  std::vector<BasisWeight> weights_;
};

Basis basis_matrix(std::span<const double> alphas, std::size_t nodes);

struct LearningFilter {
  lti::TransferFunction filter;
  std::size_t delay = 0;
  double beta = 1.0;
};

// Causal stable realization of beta q^{-d} G^{-1}. Numerator zeros outside the
// unit circle are reflected (magnitude kept); zeros beyond `max_zero_radius`
// are pulled onto that radius (gain kept at DC). d defaults to G's delay.
LearningFilter design_L(const lti::TransferFunction& g_hat, double beta, std::optional<std::size_t> delay = std::nullopt,
                        double max_zero_radius = 0.95);

lti::TransferFunction design_Q(double cutoff_hz, int order, double sample_rate);

struct IlcFilters {
  LearningFilter learning;
  lti::TransferFunction robustness;  // Q

  void validate() const;
};

IlcFilters default_filters(const lti::TransferFunction& g_hat, double sample_rate, double beta = 0.2,
                           double q_cutoff_hz = 500.0, int q_order = 2);

// Q (f_proj + W L e), causal filtering from rest. W zeroes samples before
// `learn_from`; masking after L keeps a held position error at the mask edge
// from turning into a rate impulse.
std::vector<double> ilc_update(std::span<const double> f_proj, std::span<const double> error, const IlcFilters& filters,
                               std::size_t learn_from = 0);

// Least squares for gamma minimizing ||G (f - Psi gamma)||; the QR of B = G Psi is
// factored once and reused across trials with the same angle sequence.
class Projector {
 public:
  Projector(const Basis& basis, const LiftedOperator& g_hat);

  std::vector<double> solve(std::span<const double> f) const;
  // ||B^T (G f - B gamma)|| relative to ||B^T G f||.
  double normal_residual(std::span<const double> f, std::span<const double> gamma) const;
  const Eigen::MatrixXd& filtered_basis() const { return b_; }

 private:
  const LiftedOperator* g_;
  Eigen::MatrixXd b_;
  Eigen::VectorXd scale_;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
};

std::vector<double> project(std::span<const double> f, const Basis& basis, const LiftedOperator& g_hat);

struct Certificates {
  std::size_t horizon = 0;
  double idempotency_defect = 0.0;  // ||D^2 - D||_2
  double sigma_d = 0.0;             // largest singular value of D
  double spectral_radius_d = 0.0;   // largest |eigenvalue| of D
  double lemma_value = 0.0;         // sigma_max(D Q (I - L G))
};

// D = Psi (B^T B)^{-1} B^T G_hat with B = G_hat Psi. Everything is evaluated through
// n_gamma-sized factors; `cap` bounds the horizon all the same.
Certificates projection_certificates(const Basis& basis, const LiftedOperator& g_hat, const LiftedOperator& g_true,
                                     const LiftedOperator& q, const LiftedOperator& l, std::size_t cap = 4000);

std::vector<double> uniform_frequency_grid(std::size_t points);  // [0, pi], rad/sample

// sup over the grid of |Q (1 - L G)|.
double check_convergence_freq(const lti::TransferFunction& q, const lti::TransferFunction& l,
                              const lti::TransferFunction& g, std::span<const double> omega);

enum class SeedPolicy { Fixed, PerTrial };

struct IlcSettings {
  double drive_frequency = 2.0;  // Hz; the sign picks the learned direction
  std::size_t trials = 20;
  std::size_t nodes = 180;
  double steps_per_trial = 6.0;
  std::size_t excluded_steps = 1;
  double divergence_growth = 0.10;
  std::size_t divergence_run = 3;
  SeedPolicy seed_policy = SeedPolicy::Fixed;
  bool keep_traces = true;
};

struct IlcResult {
  CompensationProfile profile;
  std::vector<double> rmsd;  // per trial, mean per-step RMSD over the learning steps
  std::vector<std::vector<double>> gamma_history;  // gamma_0 .. gamma_trials
  std::optional<sim::Trace> first_trace, last_trace;
};

// Trial loop: simulate with the current profile, compare the measured position
// with G_hat applied to the nominal mover rate, update, project.
IlcResult run_ilc(const sim::PlantConfig& plant, const control::ControllerConfig& controller,
                  const waveform::StrokePlan& plan, const lti::TransferFunction& g_hat, const IlcFilters& filters,
                  const IlcSettings& settings = {});

// Profiles as CSV rows (angle, value, direction); RMSD history as CSV.
void write_profile_csv(const std::filesystem::path& path, std::span<const CompensationProfile> profiles);
std::vector<CompensationProfile> read_profile_csv(const std::filesystem::path& path);
void write_rmsd_csv(const std::filesystem::path& path, Direction d, std::span<const double> rmsd);
std::vector<double> read_rmsd_csv(const std::filesystem::path& path);

}  // namespace piezo::ilc
