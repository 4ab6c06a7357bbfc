#pragma once
// Random-intercept linear mixed-effects model fitted by maximum likelihood:
//   total_score ~ model + variant + session_centered + (1 | patient_id)
// with treatment coding against (Llama, cbt), profiled GLS for the fixed
// effects, and the variance pair optimized on the log scale.

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cbtsim/ctrs.hpp"

namespace cbtsim {

struct LmmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kFixedEffects = 5;
inline constexpr const char* kCoefNames[kFixedEffects] = {
    "Intercept", "model[T.Mistral]", "model[T.Qwen]", "variant[T.instruct]", "session_centered"};

struct EvalRecord {
  std::string model;       // Llama | Mistral | Qwen
  std::string variant;     // cbt | instruct
  std::string patient_id;
  int session = 0;         // 1..20
  int total_score = 0;     // 11..110
};

// Raw ingestion row; missing fields are dropped by validate_dataset.
struct RawRecord {
  std::optional<std::string> model, variant, patient_id;
  std::optional<int> session;
  std::optional<int> total_score;
};

struct ValidationReport {
  std::size_t n_input = 0;
  std::size_t n_clean = 0;
  std::size_t dropped = 0;
  std::map<std::string, std::size_t> group_sizes;  // by patient_id
  int design_rank = 0;
  double design_condition = 0.0;
};

std::vector<RawRecord> raw_from_rows(const std::vector<ScoreRow>& rows);
std::vector<EvalRecord> records_from_rows(const std::vector<ScoreRow>& rows);

// Drops rows with missing key variables, reports group sizes, and hard-errors
// on a rank-deficient or ill-conditioned (cond > 1e8) design.
std::pair<std::vector<EvalRecord>, ValidationReport> validate_dataset(
    const std::vector<RawRecord>& rows);

// z-standardization over the full analysis dataset, population (1/n) sd.
std::vector<double> center_sessions(const std::vector<EvalRecord>& records);

struct LmmData {
  Eigen::MatrixXd X;  // n x 5: [1, Mistral, Qwen, instruct, session_centered]
  Eigen::VectorXd y;
  std::vector<std::vector<int>> groups;  // row indices per patient
  std::vector<std::string> group_ids;    // first-appearance order
};

LmmData design_matrix(const std::vector<EvalRecord>& records);

// Exact Gaussian log-likelihood with per-group covariance
// V_g = sigma2*I + tau2*J, evaluated through the rank-one structure
// (no dense inversion).
double loglik(const Eigen::VectorXd& beta, double sigma2, double tau2, const LmmData& data);

// Analytic partial derivatives of loglik w.r.t. (sigma2, tau2) at fixed beta.
Eigen::Vector2d loglik_grad_variance(const Eigen::VectorXd& beta, double sigma2, double tau2,
                                     const LmmData& data);

// GLS estimate of beta at fixed variances; also returns X' V^-1 X.
Eigen::VectorXd profile_beta(double sigma2, double tau2, const LmmData& data,
                             Eigen::MatrixXd* xtvx = nullptr);

enum class OptimizerUsed { Lbfgs, Powell };

struct LmmFit {
  std::array<double, kFixedEffects> beta{};
  std::array<double, kFixedEffects> se{};
  std::array<double, kFixedEffects> z{};
  std::array<double, kFixedEffects> p{};
  std::array<double, kFixedEffects> ci_low{};
  std::array<double, kFixedEffects> ci_high{};
  double sigma2 = 0.0;  // residual variance ("Scale")
  double tau2 = 0.0;    // patient-intercept variance
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  bool converged = false;
  OptimizerUsed optimizer_used = OptimizerUsed::Lbfgs;
  std::size_t n_obs = 0;
  std::size_t n_groups = 0;
  std::size_t min_group_size = 0;
  std::size_t max_group_size = 0;
  double mean_group_size = 0.0;
};

struct FitOptions {
  double grad_tol = 1e-8;
  double step_tol = 1e-10;
  double fallback_grad_norm = 1e-4;  // trigger for the Powell fallback
  double tau2_floor = 1e-10;
  // Keeps the search away from the sigma2 -> 0 region where the quadratic
  // form loses all precision to cancellation.
  double sigma2_floor = 1e-8;
  int max_iterations = 300;
  // Forces the fallback path regardless of the primary outcome (test hook).
  bool force_fallback = false;
  std::optional<Eigen::Vector2d> start_log_variances;
};

LmmFit fit_lmm(const LmmData& data, const FitOptions& options = {});

// z = beta/se, two-sided normal p, 95% CI at +-1.959964 se.
void wald_tests(LmmFit& fit);

std::vector<double> bonferroni(const std::vector<double>& p, int m);

// AIC = 2k - 2l, BIC = k ln(n) - 2l; k = 7 here (5 fixed + 2 variances).
std::pair<double, double> information_criteria(double loglik, int k, std::size_t n);

struct DiagnosticsBundle {
  std::vector<double> fitted;      // X beta + BLUP group intercept
  std::vector<double> residuals;
  std::vector<double> sorted_residuals;
  std::vector<double> theoretical_quantiles;  // normal quantiles for Q-Q data
  double explained_variance = 0.0;            // var(fitted) / var(y)
};

DiagnosticsBundle diagnostics(const LmmFit& fit, const LmmData& data);

struct GroupDescriptives {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> sd;  // sample sd (n-1); absent for n == 1
  int min = 0;
  int max = 0;
};

struct CategoryDescriptives {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> sd;
};

struct Descriptives {
  // keyed "model/variant"
  std::map<std::string, GroupDescriptives> totals;
  // keyed "model/variant/<category name>"
  std::map<std::string, CategoryDescriptives> categories;
};

Descriptives descriptive_stats(const std::vector<ScoreRow>& rows);

// Standard normal helpers used by Wald tests and Q-Q data.
double normal_two_sided_p(double z);
double normal_quantile(double p);

}  // namespace cbtsim
