#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "cbtsim/optim.hpp"

using namespace cbtsim;

namespace {

// f(x) = 1/2 x'Ax - b'x with SPD A has the unique minimizer x* = A^-1 b.
ObjectiveGradFn quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  return [A, b](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
}

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  double a = 1.0 - x[0];
  double b = x[1] - x[0] * x[0];
  g.resize(2);
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("lbfgs solves a separable quadratic exactly") {
  Eigen::MatrixXd A = Eigen::Vector3d(1.0, 4.0, 9.0).asDiagonal();
  Eigen::VectorXd b(3);
  b << 1.0, -2.0, 3.0;
  OptimResult r = lbfgs_minimize(quadratic(A, b), Eigen::VectorXd::Zero(3));
  CHECK(r.converged);
  Eigen::VectorXd expect(3);
  expect << 1.0, -0.5, 1.0 / 3.0;
  CHECK((r.x - expect).norm() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(r.f == doctest::Approx(0.5 * expect.dot(A * expect) - b.dot(expect)).epsilon(1e-10));
}

TEST_CASE("lbfgs handles an ill-conditioned coupled quadratic") {
  Eigen::MatrixXd A(2, 2);
  A << 1000.0, 1.0, 1.0, 0.01;
  Eigen::VectorXd b(2);
  b << 1.0, 2.0;
  Eigen::VectorXd expect = A.ldlt().solve(b);
  OptimResult r = lbfgs_minimize(quadratic(A, b), Eigen::VectorXd::Zero(2));
  CHECK(r.converged);
  CHECK((r.x - expect).norm() < 1e-5);
}

TEST_CASE("lbfgs minimizes Rosenbrock from the standard start") {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions opts;
  opts.max_iterations = 500;
  OptimResult r = lbfgs_minimize(rosenbrock, x0, opts);
  CHECK(r.converged);
  CHECK(std::abs(r.x[0] - 1.0) < 1e-5);
  CHECK(std::abs(r.x[1] - 1.0) < 1e-5);
  CHECK(r.f < 1e-10);
}

TEST_CASE("lbfgs reports non-convergence under a tiny iteration budget") {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions opts;
  opts.max_iterations = 2;
  OptimResult r = lbfgs_minimize(rosenbrock, x0, opts);
  CHECK(!r.converged);
  CHECK(r.iterations <= 2);
}

TEST_CASE("powell solves quadratics without derivatives") {
  Eigen::MatrixXd A(2, 2);
  A << 4.0, 1.0, 1.0, 3.0;
  Eigen::VectorXd b(2);
  b << 1.0, 2.0;
  Eigen::VectorXd expect = A.ldlt().solve(b);
  auto f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(A * x) - b.dot(x); };
  OptimResult r = powell_minimize(f, Eigen::VectorXd::Zero(2));
  CHECK(r.converged);
  CHECK((r.x - expect).norm() < 1e-6);
}

TEST_CASE("powell minimizes Rosenbrock") {
  auto f = [](const Eigen::VectorXd& x) {
    double a = 1.0 - x[0];
    double b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  PowellOptions opts;
  opts.max_iterations = 1000;
  OptimResult r = powell_minimize(f, x0, opts);
  CHECK(r.converged);
  CHECK(std::abs(r.x[0] - 1.0) < 1e-4);
  CHECK(std::abs(r.x[1] - 1.0) < 1e-4);
}

TEST_CASE("optimizers agree on a smooth non-quadratic objective") {
  // f(x, y) = (x - 2)^4 + (x - 2y)^2, minimum at (2, 1).
  auto f = [](const Eigen::VectorXd& x) {
    double u = x[0] - 2.0;
    double v = x[0] - 2.0 * x[1];
    return u * u * u * u + v * v;
  };
  ObjectiveGradFn fg = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    double u = x[0] - 2.0;
    double v = x[0] - 2.0 * x[1];
    g.resize(2);
    g[0] = 4.0 * u * u * u + 2.0 * v;
    g[1] = -4.0 * v;
    return u * u * u * u + v * v;
  };
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  LbfgsOptions lopts;
  lopts.max_iterations = 2000;
  lopts.grad_tol = 1e-10;
  OptimResult a = lbfgs_minimize(fg, x0, lopts);
  PowellOptions popts;
  popts.max_iterations = 2000;
  OptimResult b = powell_minimize(f, x0, popts);
  // The quartic direction is flat near the minimum; positions converge slowly
  // but both function values must be essentially zero.
  CHECK(a.f < 1e-10);
  CHECK(b.f < 1e-10);
  CHECK(std::abs(a.x[0] - 2.0 * a.x[1]) < 1e-5);
  CHECK(std::abs(b.x[0] - 2.0 * b.x[1]) < 1e-5);
}

TEST_CASE("brent finds interior minima of one-dimensional functions") {
  double x = brent_minimize([](double t) { return (t - 0.3) * (t - 0.3); }, -1.0, 1.0);
  CHECK(std::abs(x - 0.3) < 1e-8);

  // cos has its minimum at pi on [2, 4].
  double p = brent_minimize([](double t) { return std::cos(t); }, 2.0, 4.0);
  CHECK(std::abs(p - M_PI) < 1e-7);

  // Asymmetric quartic with minimum at t = 1.
  double q = brent_minimize([](double t) { return std::pow(t - 1.0, 4) + 0.5 * (t - 1.0) * (t - 1.0); },
                            -3.0, 5.0);
  CHECK(std::abs(q - 1.0) < 1e-6);
}
