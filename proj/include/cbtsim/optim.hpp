#pragma once
// Minimizers used by the mixed-model fit: a limited-memory quasi-Newton
// (L-BFGS) primary and a derivative-free Powell direction-set fallback.

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace cbtsim {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using ObjectiveGradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct LbfgsOptions {
  int max_iterations = 200;
  int history = 6;
  double grad_tol = 1e-8;  // infinity norm of the gradient
  double step_tol = 1e-10;
};

OptimResult lbfgs_minimize(const ObjectiveGradFn& fg, const Eigen::VectorXd& x0,
                           const LbfgsOptions& options = {});

struct PowellOptions {
  int max_iterations = 200;
  double f_tol = 1e-12;    // relative decrease per sweep
  double x_tol = 1e-10;
  double initial_step = 1.0;
};

OptimResult powell_minimize(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                            const PowellOptions& options = {});

// Brent line minimization on [a, b] with a bracketing preamble; used by the
// Powell sweeps and exposed for tests.
double brent_minimize(const std::function<double(double)>& f, double a, double b,
                      double tol = 1e-10, int max_iter = 100);

}  // namespace cbtsim
