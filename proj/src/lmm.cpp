#include "cbtsim/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "cbtsim/optim.hpp"

namespace cbtsim {

std::vector<RawRecord> raw_from_rows(const std::vector<ScoreRow>& rows) {
  std::vector<RawRecord> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    RawRecord raw;
    if (!r.model.empty()) raw.model = r.model;
    if (!r.variant.empty()) raw.variant = r.variant;
    if (!r.patient_id.empty()) raw.patient_id = r.patient_id;
    if (r.session > 0) raw.session = r.session;
    if (r.total_score > 0) raw.total_score = r.total_score;
    out.push_back(std::move(raw));
  }
  return out;
}

std::vector<EvalRecord> records_from_rows(const std::vector<ScoreRow>& rows) {
  std::vector<EvalRecord> out;
  out.reserve(rows.size());
  for (const auto& r : rows)
    out.push_back({r.model, r.variant, r.patient_id, r.session, r.total_score});
  return out;
}

std::pair<std::vector<EvalRecord>, ValidationReport> validate_dataset(
    const std::vector<RawRecord>& rows) {
  ValidationReport report;
  report.n_input = rows.size();
  std::vector<EvalRecord> clean;
  for (const auto& r : rows) {
    if (!r.model || !r.variant || !r.patient_id || !r.session || !r.total_score) {
      ++report.dropped;
      continue;
    }
    clean.push_back({*r.model, *r.variant, *r.patient_id, *r.session, *r.total_score});
  }
  report.n_clean = clean.size();
  if (clean.empty()) throw LmmError("no complete rows remain after validation");
  for (const auto& r : clean) ++report.group_sizes[r.patient_id];

  LmmData data = design_matrix(clean);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(data.X);
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  report.design_rank =
      static_cast<int>((svd.singularValues().array() > smax * 1e-12).count());
  report.design_condition = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (report.design_rank < kFixedEffects)
    throw LmmError("design matrix is rank deficient (rank " +
                   std::to_string(report.design_rank) + " of 5); a predictor is constant or "
                   "collinear");
  if (report.design_condition > 1e8)
    throw LmmError("design matrix is ill-conditioned (condition number > 1e8)");
  return {std::move(clean), report};
}

std::vector<double> center_sessions(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw LmmError("cannot center sessions of an empty dataset");
  double mean = 0.0;
  for (const auto& r : records) mean += r.session;
  mean /= static_cast<double>(records.size());
  double ss = 0.0;
  for (const auto& r : records) ss += (r.session - mean) * (r.session - mean);
  double sd = std::sqrt(ss / static_cast<double>(records.size()));
  if (sd == 0.0) throw LmmError("session has zero variance; cannot z-standardize");
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back((r.session - mean) / sd);
  return out;
}

LmmData design_matrix(const std::vector<EvalRecord>& records) {
  LmmData data;
  const auto n = static_cast<Eigen::Index>(records.size());
  data.X.resize(n, kFixedEffects);
  data.y.resize(n);
  std::vector<double> sc = center_sessions(records);
  std::map<std::string, int> group_index;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    double mistral = 0.0, qwen = 0.0;
    if (r.model == "Mistral") mistral = 1.0;
    else if (r.model == "Qwen") qwen = 1.0;
    else if (r.model != "Llama")
      throw LmmError("unseen model level: '" + r.model + "'");
    double instruct;
    if (r.variant == "instruct") instruct = 1.0;
    else if (r.variant == "cbt") instruct = 0.0;
    else
      throw LmmError("unseen variant level: '" + r.variant + "'");
    data.X(i, 0) = 1.0;
    data.X(i, 1) = mistral;
    data.X(i, 2) = qwen;
    data.X(i, 3) = instruct;
    data.X(i, 4) = sc[static_cast<std::size_t>(i)];
    data.y(i) = r.total_score;

    auto [it, inserted] = group_index.try_emplace(r.patient_id, 0);
    if (inserted) {
      it->second = static_cast<int>(data.groups.size());
      data.groups.emplace_back();
      data.group_ids.push_back(r.patient_id);
    }
    data.groups[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(i));
  }
  return data;
}

double loglik(const Eigen::VectorXd& beta, double sigma2, double tau2, const LmmData& data) {
  if (sigma2 <= 0.0 || tau2 < 0.0)
    throw LmmError("loglik requires sigma2 > 0 and tau2 >= 0");
  const double n = static_cast<double>(data.y.size());
  Eigen::VectorXd r = data.y - data.X * beta;
  double logdet = 0.0, quad = 0.0;
  for (const auto& idx : data.groups) {
    const double m = static_cast<double>(idx.size());
    double ss = 0.0, sum = 0.0;
    for (int i : idx) {
      ss += r(i) * r(i);
      sum += r(i);
    }
    const double denom = sigma2 + m * tau2;
    logdet += (m - 1.0) * std::log(sigma2) + std::log(denom);
    quad += (ss - tau2 / denom * sum * sum) / sigma2;
  }
  double ll = -0.5 * (n * std::log(2.0 * M_PI) + logdet + quad);
  if (!std::isfinite(ll)) throw LmmError("log-likelihood evaluated to a non-finite value");
  return ll;
}

Eigen::Vector2d loglik_grad_variance(const Eigen::VectorXd& beta, double sigma2, double tau2,
                                     const LmmData& data) {
  Eigen::VectorXd r = data.y - data.X * beta;
  const double a = 1.0 / sigma2;
  double d_sigma2 = 0.0, d_tau2 = 0.0;
  for (const auto& idx : data.groups) {
    const double m = static_cast<double>(idx.size());
    const double denom = sigma2 + m * tau2;
    const double c = tau2 / (sigma2 * denom);  // V^-1 = a I - c J
    double ss = 0.0, sum = 0.0;
    for (int i : idx) {
      ss += r(i) * r(i);
      sum += r(i);
    }
    // d/dsigma2: 0.5 * (r' V^-1 V^-1 r - tr(V^-1))
    double vr_norm2 = a * a * ss - (2.0 * a * c - c * c * m) * sum * sum;
    double tr_vinv = m * a - m * c;
    d_sigma2 += 0.5 * (vr_norm2 - tr_vinv);
    // d/dtau2: 0.5 * ((1' V^-1 r)^2 - tr(V^-1 J)); 1'V^-1 r = sum / denom
    double one_vr = sum / denom;
    d_tau2 += 0.5 * (one_vr * one_vr - m / denom);
  }
  return {d_sigma2, d_tau2};
}

Eigen::VectorXd profile_beta(double sigma2, double tau2, const LmmData& data,
                             Eigen::MatrixXd* xtvx) {
  const double a = 1.0 / sigma2;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(kFixedEffects, kFixedEffects);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(kFixedEffects);
  for (const auto& idx : data.groups) {
    const double m = static_cast<double>(idx.size());
    const double c = tau2 / (sigma2 * (sigma2 + m * tau2));
    Eigen::MatrixXd Xg(idx.size(), kFixedEffects);
    Eigen::VectorXd yg(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Xg.row(static_cast<Eigen::Index>(k)) = data.X.row(idx[k]);
      yg(static_cast<Eigen::Index>(k)) = data.y(idx[k]);
    }
    Eigen::VectorXd xsum = Xg.colwise().sum();
    double ysum = yg.sum();
    A += a * Xg.transpose() * Xg - c * xsum * xsum.transpose();
    b += a * Xg.transpose() * yg - c * xsum * ysum;
  }
  if (xtvx) *xtvx = A;
  return A.ldlt().solve(b);
}

namespace {

struct ProfiledObjective {
  const LmmData& data;
  double tau2_floor;
  double sigma2_floor;

  std::pair<double, double> variances(const Eigen::VectorXd& u) const {
    return {std::max(std::exp(u(0)), sigma2_floor), std::max(std::exp(u(1)), tau2_floor)};
  }

  // Negative profiled log-likelihood in u = (log sigma2, log tau2).
  double value(const Eigen::VectorXd& u) const {
    auto [sigma2, tau2] = variances(u);
    if (!std::isfinite(sigma2) || !std::isfinite(tau2))
      return std::numeric_limits<double>::infinity();
    try {
      Eigen::VectorXd beta = profile_beta(sigma2, tau2, data);
      return -loglik(beta, sigma2, tau2, data);
    } catch (const LmmError&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  // By the envelope theorem the gradient of the profiled objective equals the
  // partial derivative at the GLS beta (d loglik / d beta vanishes there).
  double value_grad(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
    auto [sigma2, tau2] = variances(u);
    if (!std::isfinite(sigma2) || !std::isfinite(tau2)) {
      grad.setZero();
      return std::numeric_limits<double>::infinity();
    }
    Eigen::VectorXd beta = profile_beta(sigma2, tau2, data);
    double f;
    try {
      f = -loglik(beta, sigma2, tau2, data);
    } catch (const LmmError&) {
      grad.setZero();
      return std::numeric_limits<double>::infinity();
    }
    Eigen::Vector2d g = loglik_grad_variance(beta, sigma2, tau2, data);
    grad.resize(2);
    grad(0) = -g(0) * sigma2;  // chain rule to the log scale
    grad(1) = -g(1) * tau2;
    if (std::exp(u(0)) < sigma2_floor) grad(0) = 0.0;  // at the floor
    if (std::exp(u(1)) < tau2_floor) grad(1) = 0.0;  // at the floor
    return f;
  }
};

// Observed information over (beta, log sigma2, log tau2) by central
// differences of the full (unprofiled) log-likelihood.
Eigen::MatrixXd numerical_information(const Eigen::VectorXd& beta, double sigma2, double tau2,
                                      const LmmData& data) {
  const int dim = kFixedEffects + 2;
  Eigen::VectorXd theta(dim);
  theta.head(kFixedEffects) = beta;
  theta(kFixedEffects) = std::log(sigma2);
  theta(kFixedEffects + 1) = std::log(std::max(tau2, 1e-12));
  auto eval = [&](const Eigen::VectorXd& t) {
    Eigen::VectorXd b = t.head(kFixedEffects);
    return loglik(b, std::exp(t(kFixedEffects)), std::exp(t(kFixedEffects + 1)), data);
  };
  Eigen::MatrixXd H(dim, dim);
  const double h = 1e-5;
  double f0 = eval(theta);
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      Eigen::VectorXd t = theta;
      double hij;
      if (i == j) {
        t(i) = theta(i) + h;
        double fp = eval(t);
        t(i) = theta(i) - h;
        double fm = eval(t);
        hij = (fp - 2.0 * f0 + fm) / (h * h);
      } else {
        t = theta; t(i) += h; t(j) += h; double fpp = eval(t);
        t = theta; t(i) += h; t(j) -= h; double fpm = eval(t);
        t = theta; t(i) -= h; t(j) += h; double fmp = eval(t);
        t = theta; t(i) -= h; t(j) -= h; double fmm = eval(t);
        hij = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
      }
      H(i, j) = H(j, i) = -hij;  // observed information = -Hessian of loglik
    }
  }
  return H;
}

}  // namespace

LmmFit fit_lmm(const LmmData& data, const FitOptions& options) {
  if (data.groups.size() < 2) throw LmmError("fit requires at least 2 groups");
  const auto n = static_cast<std::size_t>(data.y.size());

  // OLS-based starting values.
  Eigen::VectorXd beta_ols =
      (data.X.transpose() * data.X).ldlt().solve(data.X.transpose() * data.y);
  Eigen::VectorXd resid = data.y - data.X * beta_ols;
  double sigma2_0 = resid.squaredNorm() / static_cast<double>(n);
  double mean_sq_groupmean = 0.0;
  for (const auto& idx : data.groups) {
    double s = 0.0;
    for (int i : idx) s += resid(i);
    double gm = s / static_cast<double>(idx.size());
    mean_sq_groupmean += gm * gm;
  }
  mean_sq_groupmean /= static_cast<double>(data.groups.size());
  double tau2_0 = std::max(mean_sq_groupmean, 1e-3 * sigma2_0);

  ProfiledObjective obj{data, options.tau2_floor, options.sigma2_floor};
  Eigen::VectorXd u0(2);
  if (options.start_log_variances) {
    u0 = *options.start_log_variances;
  } else {
    u0 << std::log(sigma2_0), std::log(tau2_0);
  }

  LbfgsOptions lopts;
  lopts.grad_tol = options.grad_tol;
  lopts.step_tol = options.step_tol;
  lopts.max_iterations = options.max_iterations;
  OptimResult primary = lbfgs_minimize(
      [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) { return obj.value_grad(u, g); }, u0,
      lopts);

  bool use_fallback = options.force_fallback || !primary.converged ||
                      !std::isfinite(primary.f) ||
                      primary.grad_norm > options.fallback_grad_norm;
  OptimResult chosen = primary;
  OptimizerUsed used = OptimizerUsed::Lbfgs;
  if (use_fallback) {
    PowellOptions popts;
    popts.max_iterations = options.max_iterations;
    popts.initial_step = 0.5;
    OptimResult fb =
        powell_minimize([&](const Eigen::VectorXd& u) { return obj.value(u); }, u0, popts);
    // force_fallback is a test hook: the Powell result is reported even when
    // the primary result is no worse.
    if (std::isfinite(fb.f) &&
        (options.force_fallback || !std::isfinite(primary.f) || fb.f <= primary.f)) {
      chosen = fb;
      used = OptimizerUsed::Powell;
    }
    if (!std::isfinite(chosen.f))
      throw LmmError("both optimizers failed to produce a finite objective");
  }

  auto [sigma2, tau2] = obj.variances(chosen.x);
  Eigen::MatrixXd xtvx;
  Eigen::VectorXd beta = profile_beta(sigma2, tau2, data, &xtvx);

  LmmFit fit;
  for (int i = 0; i < kFixedEffects; ++i) fit.beta[static_cast<std::size_t>(i)] = beta(i);
  fit.sigma2 = sigma2;
  fit.tau2 = tau2;
  fit.loglik = loglik(beta, sigma2, tau2, data);
  fit.converged = chosen.converged;
  fit.optimizer_used = used;
  fit.n_obs = n;
  fit.n_groups = data.groups.size();
  std::size_t mn = n, mx = 0;
  for (const auto& idx : data.groups) {
    mn = std::min(mn, idx.size());
    mx = std::max(mx, idx.size());
  }
  fit.min_group_size = mn;
  fit.max_group_size = mx;
  fit.mean_group_size = static_cast<double>(n) / static_cast<double>(data.groups.size());

  // Standard errors from the inverse observed information; the GLS covariance
  // is the fallback if the numerical Hessian is not invertible.
  bool se_ok = false;
  Eigen::MatrixXd info = numerical_information(beta, sigma2, tau2, data);
  if (info.allFinite()) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
    if (lu.isInvertible()) {
      Eigen::MatrixXd cov = lu.inverse();
      se_ok = cov.allFinite();
      for (int i = 0; se_ok && i < kFixedEffects; ++i) {
        double v = cov(i, i);
        if (!(v > 0.0)) {
          se_ok = false;
          break;
        }
        fit.se[static_cast<std::size_t>(i)] = std::sqrt(v);
      }
    }
  }
  if (!se_ok) {
    Eigen::MatrixXd cov = xtvx.ldlt().solve(Eigen::MatrixXd::Identity(kFixedEffects, kFixedEffects));
    for (int i = 0; i < kFixedEffects; ++i) {
      double v = cov(i, i);
      if (!(v > 0.0) || !std::isfinite(v))
        throw LmmError("standard errors are not computable: covariance is not positive");
      fit.se[static_cast<std::size_t>(i)] = std::sqrt(v);
    }
  }

  wald_tests(fit);
  auto [aic, bic] = information_criteria(fit.loglik, kFixedEffects + 2, n);
  fit.aic = aic;
  fit.bic = bic;
  return fit;
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double normal_quantile(double p) {
  // Acklam's rational approximation, refined with one Halley step.
  if (p <= 0.0 || p >= 1.0) throw LmmError("normal_quantile requires p in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

void wald_tests(LmmFit& fit) {
  const double z975 = 1.959964;
  for (std::size_t i = 0; i < kFixedEffects; ++i) {
    fit.z[i] = fit.se[i] > 0 ? fit.beta[i] / fit.se[i] : 0.0;
    fit.p[i] = normal_two_sided_p(fit.z[i]);
    fit.ci_low[i] = fit.beta[i] - z975 * fit.se[i];
    fit.ci_high[i] = fit.beta[i] + z975 * fit.se[i];
  }
}

std::vector<double> bonferroni(const std::vector<double>& p, int m) {
  if (m < 1) throw LmmError("bonferroni requires m >= 1");
  std::vector<double> out;
  out.reserve(p.size());
  for (double pi : p) {
    if (pi < 0.0 || pi > 1.0) throw LmmError("p-value outside [0, 1]");
    out.push_back(std::min(1.0, pi * static_cast<double>(m)));
  }
  return out;
}

std::pair<double, double> information_criteria(double loglik, int k, std::size_t n) {
  double aic = 2.0 * k - 2.0 * loglik;
  double bic = static_cast<double>(k) * std::log(static_cast<double>(n)) - 2.0 * loglik;
  return {aic, bic};
}

DiagnosticsBundle diagnostics(const LmmFit& fit, const LmmData& data) {
  DiagnosticsBundle d;
  const auto n = static_cast<std::size_t>(data.y.size());
  Eigen::VectorXd beta(kFixedEffects);
  for (int i = 0; i < kFixedEffects; ++i) beta(i) = fit.beta[static_cast<std::size_t>(i)];
  Eigen::VectorXd xb = data.X * beta;
  Eigen::VectorXd marg_resid = data.y - xb;

  d.fitted.resize(n);
  d.residuals.resize(n);
  for (const auto& idx : data.groups) {
    const double m = static_cast<double>(idx.size());
    double sum = 0.0;
    for (int i : idx) sum += marg_resid(i);
    // BLUP of the group intercept: tau2 * 1' V^-1 r.
    double blup = fit.tau2 * sum / (fit.sigma2 + m * fit.tau2);
    for (int i : idx) {
      d.fitted[static_cast<std::size_t>(i)] = xb(i) + blup;
      d.residuals[static_cast<std::size_t>(i)] = data.y(i) - d.fitted[static_cast<std::size_t>(i)];
    }
  }
  d.sorted_residuals = d.residuals;
  std::sort(d.sorted_residuals.begin(), d.sorted_residuals.end());
  d.theoretical_quantiles.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    d.theoretical_quantiles[i] =
        normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));

  auto pop_var = [](const auto& get, std::size_t count) {
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += get(i);
    mean /= static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = 0; i < count; ++i) ss += (get(i) - mean) * (get(i) - mean);
    return ss / static_cast<double>(count);
  };
  double var_fitted = pop_var([&](std::size_t i) { return d.fitted[i]; }, n);
  double var_y = pop_var([&](std::size_t i) { return data.y(static_cast<Eigen::Index>(i)); }, n);
  d.explained_variance = var_y > 0 ? var_fitted / var_y : 0.0;
  return d;
}

Descriptives descriptive_stats(const std::vector<ScoreRow>& rows) {
  if (rows.empty()) throw LmmError("descriptive_stats requires a non-empty dataset");
  Descriptives out;
  std::map<std::string, std::vector<int>> totals;
  std::map<std::string, std::vector<int>> cats;
  for (const auto& r : rows) {
    std::string key = r.model + "/" + r.variant;
    totals[key].push_back(r.total_score);
    for (std::size_t i = 0; i < r.category_scores.size(); ++i)
      cats[key + "/" + category_name(all_categories()[i])].push_back(r.category_scores[i]);
  }
  auto mean_sd = [](const std::vector<int>& v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::optional<double> sd;
    if (v.size() > 1) {
      double ss = 0.0;
      for (int x : v) ss += (x - mean) * (x - mean);
      sd = std::sqrt(ss / static_cast<double>(v.size() - 1));  // sample sd
    }
    return std::pair(mean, sd);
  };
  for (const auto& [key, v] : totals) {
    auto [mean, sd] = mean_sd(v);
    out.totals[key] = {v.size(), mean, sd, *std::min_element(v.begin(), v.end()),
                       *std::max_element(v.begin(), v.end())};
  }
  for (const auto& [key, v] : cats) {
    auto [mean, sd] = mean_sd(v);
    out.categories[key] = {v.size(), mean, sd};
  }
  return out;
}

}  // namespace cbtsim
