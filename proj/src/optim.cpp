#include "cbtsim/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace cbtsim {

namespace {

// Strong Wolfe line search (bracket + zoom). The curvature condition keeps
// y's positive so every accepted step yields a valid quasi-Newton pair.
double line_search(const ObjectiveGradFn& fg, const Eigen::VectorXd& x, double f0,
                   const Eigen::VectorXd& g0, const Eigen::VectorXd& dir, Eigen::VectorXd& x_new,
                   double& f_new, Eigen::VectorXd& g_new) {
  const double c1 = 1e-4;
  const double c2 = 0.9;
  const double slope0 = g0.dot(dir);
  if (!(slope0 < 0.0)) return 0.0;

  auto eval = [&](double a) {
    x_new = x + a * dir;
    g_new.resize(x.size());
    f_new = fg(x_new, g_new);
  };

  auto zoom = [&](double lo, double f_lo, double hi) -> double {
    for (int i = 0; i < 50; ++i) {
      double a = 0.5 * (lo + hi);
      eval(a);
      if (!std::isfinite(f_new) || f_new > f0 + c1 * a * slope0 || f_new >= f_lo) {
        hi = a;
      } else {
        double der = g_new.dot(dir);
        if (std::abs(der) <= -c2 * slope0) return a;
        if (der * (hi - lo) >= 0.0) hi = lo;
        lo = a;
        f_lo = f_new;
      }
      if (std::abs(hi - lo) < 1e-16 * (1.0 + std::abs(lo))) break;
    }
    // Settle for the best Armijo point found.
    eval(lo);
    if (std::isfinite(f_new) && f_new <= f0 + c1 * lo * slope0 && lo > 0.0) return lo;
    return 0.0;
  };

  double a_prev = 0.0, f_prev = f0;
  double a = 1.0;
  for (int i = 0; i < 30; ++i) {
    eval(a);
    if (!std::isfinite(f_new) || f_new > f0 + c1 * a * slope0 || (i > 0 && f_new >= f_prev))
      return zoom(a_prev, f_prev, a);
    double der = g_new.dot(dir);
    if (std::abs(der) <= -c2 * slope0) return a;
    if (der >= 0.0) return zoom(a, f_new, a_prev);
    a_prev = a;
    f_prev = f_new;
    a *= 2.0;
  }
  // Expansion never hit the curvature condition; the last iterate still
  // satisfies sufficient decrease.
  eval(a_prev);
  return a_prev;
}

// Plain Armijo backtracking; reaches much smaller steps than the Wolfe
// bracket, used when the latter stalls near a stationary point.
double armijo_search(const ObjectiveGradFn& fg, const Eigen::VectorXd& x, double f0,
                     const Eigen::VectorXd& g0, const Eigen::VectorXd& dir, Eigen::VectorXd& x_new,
                     double& f_new, Eigen::VectorXd& g_new) {
  const double c1 = 1e-4;
  double slope = g0.dot(dir);
  double alpha = 1.0;
  for (int i = 0; i < 50; ++i) {
    x_new = x + alpha * dir;
    g_new.resize(x.size());
    f_new = fg(x_new, g_new);
    if (std::isfinite(f_new) && f_new <= f0 + c1 * alpha * slope) return alpha;
    alpha *= 0.5;
  }
  return 0.0;
}

}  // namespace

OptimResult lbfgs_minimize(const ObjectiveGradFn& fg, const Eigen::VectorXd& x0,
                           const LbfgsOptions& options) {
  OptimResult result;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd g(x.size());
  double f = fg(x, g);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    if (g.lpNorm<Eigen::Infinity>() < options.grad_tol) {
      result.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;
    if (dir.dot(g) >= 0) dir = -g;  // not a descent direction: reset

    Eigen::VectorXd x_new, g_new;
    double f_new;
    double step = line_search(fg, x, f, g, dir, x_new, f_new, g_new);
    if (step == 0.0) {
      // Line search failed along the quasi-Newton direction; drop the
      // curvature history and retry with steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
      step = line_search(fg, x, f, g, dir, x_new, f_new, g_new);
      if (step == 0.0) step = armijo_search(fg, x, f, g, dir, x_new, f_new, g_new);
      if (step == 0.0) {
        // No decrease along -g even at machine-precision step sizes: the
        // iterate is numerically stationary.
        result.converged = true;
        break;
      }
    }

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    if (s.lpNorm<Eigen::Infinity>() < options.step_tol) {
      x = x_new;
      f = f_new;
      g = g_new;
      result.converged = true;
      break;
    }
    if (y.dot(s) > 1e-12 * y.norm() * s.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / y.dot(s));
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    f = f_new;
    g = g_new;
  }
  if (g.lpNorm<Eigen::Infinity>() < options.grad_tol) result.converged = true;
  result.x = x;
  result.f = f;
  result.grad_norm = g.lpNorm<Eigen::Infinity>();
  return result;
}

double brent_minimize(const std::function<double(double)>& f, double a, double b, double tol,
                      int max_iter) {
  const double golden = 0.3819660112501051;
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int iter = 0; iter < max_iter; ++iter) {
    double m = 0.5 * (a + b);
    double tol1 = tol * std::abs(x) + 1e-14;
    double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;

    bool parabolic = false;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (m > x) ? tol1 : -tol1;
        parabolic = true;
      }
    }
    if (!parabolic) {
      e = (x < m) ? b - x : a - x;
      d = golden * e;
    }
    double u = (std::abs(d) >= tol1) ? x + d : x + ((d > 0) ? tol1 : -tol1);
    double fu = f(u);
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return x;
}

namespace {

// Minimizes f along x + t*dir: brackets a minimum from t=0 then runs Brent.
double line_minimize(const ObjectiveFn& f, Eigen::VectorXd& x, const Eigen::VectorXd& dir,
                     double initial_step) {
  auto phi = [&](double t) {
    double v = f(x + t * dir);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  // Bracket: expand until the objective rises.
  double t0 = 0.0, f0 = phi(0.0);
  double step = initial_step;
  double t1 = step, f1 = phi(t1);
  if (f1 > f0) {
    step = -step;
    t1 = step;
    f1 = phi(t1);
  }
  double ta = 0.0, tb = t1;
  if (f1 > f0) {
    // Minimum lies between -step and +step.
    ta = -std::abs(step);
    tb = std::abs(step);
  } else {
    double t2 = t1 + step, f2 = phi(t2);
    int guard = 0;
    while (f2 < f1 && guard++ < 60) {
      t0 = t1; f0 = f1;
      t1 = t2; f1 = f2;
      step *= 2.0;
      t2 = t1 + step;
      f2 = phi(t2);
    }
    ta = std::min(t0, t2);
    tb = std::max(t0, t2);
  }
  double t_best = brent_minimize(phi, ta, tb);
  double f_best = phi(t_best);
  if (f_best < f0) {
    x += t_best * dir;
    return f_best;
  }
  return f0;
}

}  // namespace

OptimResult powell_minimize(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                            const PowellOptions& options) {
  const int n = static_cast<int>(x0.size());
  OptimResult result;
  Eigen::MatrixXd directions = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = x0;
  double fx = f(x);
  if (!std::isfinite(fx)) fx = std::numeric_limits<double>::max();

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    Eigen::VectorXd x_start = x;
    double f_start = fx;
    int biggest_drop_idx = 0;
    double biggest_drop = 0.0;

    for (int i = 0; i < n; ++i) {
      double f_before = fx;
      fx = line_minimize(f, x, directions.col(i), options.initial_step);
      if (f_before - fx > biggest_drop) {
        biggest_drop = f_before - fx;
        biggest_drop_idx = i;
      }
    }

    if (2.0 * (f_start - fx) <= options.f_tol * (std::abs(f_start) + std::abs(fx)) + 1e-300 ||
        (x - x_start).lpNorm<Eigen::Infinity>() < options.x_tol) {
      result.converged = true;
      break;
    }

    // Powell's update: try the averaged direction, replace the direction of
    // largest decrease when the extrapolated point keeps improving.
    Eigen::VectorXd avg_dir = x - x_start;
    Eigen::VectorXd extrapolated = x + avg_dir;
    double f_extra = f(extrapolated);
    if (!std::isfinite(f_extra)) f_extra = std::numeric_limits<double>::max();
    if (f_extra < f_start) {
      double t = 2.0 * (f_start - 2.0 * fx + f_extra) *
                     std::pow(f_start - fx - biggest_drop, 2) -
                 biggest_drop * std::pow(f_start - f_extra, 2);
      if (t < 0.0) {
        fx = line_minimize(f, x, avg_dir, options.initial_step);
        directions.col(biggest_drop_idx) = directions.col(n - 1);
        directions.col(n - 1) = avg_dir.normalized();
      }
    }
  }
  result.x = x;
  result.f = fx;
  result.grad_norm = std::numeric_limits<double>::quiet_NaN();  // derivative-free
  return result;
}

}  // namespace cbtsim
