#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kfp/geometry.hpp"
#include "kfp/kernel.hpp"
#include "kfp/rng.hpp"

using namespace kfp;

namespace {

Eigen::MatrixXd ident(int d) { return Eigen::MatrixXd::Identity(d, d); }

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

// Rotating anisotropic smooth coefficient; A0 and A1 genuinely do not
// commute, which is what separates x - M^T v from x - M v.
TimeMatrixProfile rotating_profile() {
  auto fn = [](double t) {
    Eigen::Matrix2d rot;
    rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    Eigen::Vector2d eig(1.6, 0.7);
    Eigen::Matrix2d m = rot * eig.asDiagonal() * rot.transpose();
    return Eigen::MatrixXd(0.5 * (m + m.transpose()));
  };
  auto dfn = [fn](double t) {
    const double h = 1e-6;
    return Eigen::MatrixXd((fn(t + h) - fn(t - h)) / (2.0 * h));
  };
  return TimeMatrixProfile::smooth(fn, 2, 2.0, dfn);
}

TimeMatrixProfile noncommuting_piecewise() {
  Eigen::Matrix2d a1, a2;
  a1 << 1.5, 0.3, 0.3, 0.8;
  a2 << 0.9, -0.25, -0.25, 1.4;
  return TimeMatrixProfile::piecewise(
      {0.4}, {Eigen::MatrixXd(a1), Eigen::MatrixXd(a2)}, 2.0);
}

}  // namespace

TEST_CASE("explicit kernel value and the t <= 0 branch") {
  CHECK(eval_kolmogorov(1.0, vec1(0.0), vec1(0.0)) ==
        doctest::Approx(0.27566444771089595).epsilon(1e-14));
  CHECK(eval_kolmogorov(-1.0, vec1(0.3), vec1(0.7)) == 0.0);
  CHECK(eval_kolmogorov(0.0, vec1(0.3), vec1(0.7)) == 0.0);

  const auto id = TimeMatrixProfile::constant(ident(1), 1.0);
  const KernelEvaluation ke = eval_kernel(id, -0.5, vec1(0.1), vec1(0.2));
  CHECK(ke.value == 0.0);
  CHECK(std::exp(ke.log_normalization - ke.exponent_v - ke.exponent_x) == 0.0);
}

TEST_CASE("identity profile reduces to the explicit kernel") {
  const CounterRng rng(9);
  const auto s = CounterRng::stream("reduction");
  for (int d : {1, 2, 3}) {
    const auto id = TimeMatrixProfile::constant(ident(d), 1.0);
    for (int i = 0; i < 300; ++i) {
      const double t = rng.uniform(s, 1000ull * d + 3ull * i, 1e-3, 3.0);
      Eigen::VectorXd x(d), v(d);
      for (int k = 0; k < d; ++k) {
        x(k) = rng.uniform(s, 90000ull + 100ull * i + k, -2.0, 2.0) *
               std::pow(t, 1.5);
        v(k) = rng.uniform(s, 70000ull + 100ull * i + k, -2.0, 2.0) *
               std::sqrt(t);
      }
      const double ref = eval_kolmogorov(t, x, v);
      const KernelEvaluation ke = eval_kernel(id, t, x, v);
      CHECK(std::abs(ke.value - ref) <= 1e-12 * ref);
      CHECK(ke.value ==
            doctest::Approx(std::exp(ke.log_normalization - ke.exponent_v -
                                     ke.exponent_x)));
    }
  }
}

TEST_CASE("kernel argument uses x - vt + A1 A0^{-1} v") {
  // For a noncommuting profile the PDE residual distinguishes M^T from M.
  const auto prof = rotating_profile();
  const CounterRng rng(12);
  const auto s = CounterRng::stream("pde");
  for (int i = 0; i < 40; ++i) {
    const double t = rng.uniform(s, i, 0.2, 1.5);
    Eigen::VectorXd x(2), v(2);
    for (int k = 0; k < 2; ++k) {
      x(k) = rng.uniform(s, 100 + 10 * i + k, -1.0, 1.0) * std::pow(t, 1.5);
      v(k) = rng.uniform(s, 200 + 10 * i + k, -1.0, 1.0) * std::sqrt(t);
    }
    const KernelContext ctx = make_kernel_context(prof, t, 1e-12);
    const double gamma_val = eval_kernel(ctx, x, v).value;
    if (gamma_val < 1e-12) continue;

    // direct d/dt from the closed-form matrix derivatives
    const double dt_direct = eval_kernel_dt_direct(ctx, x, v);
    // -v.grad_x + diffusion side via the analytic derivative machinery
    double rhs = 0.0;
    for (int k = 0; k < 2; ++k) {
      std::vector<int> beta{0, 0};
      beta[k] = 1;
      rhs -= v(k) * eval_kernel_derivative(prof, t, x, v, 0, {0, 0}, beta);
    }
    const Eigen::MatrixXd a = prof.value(t);
    for (int ki = 0; ki < 2; ++ki)
      for (int kj = 0; kj < 2; ++kj) {
        std::vector<int> alpha{0, 0};
        alpha[ki] += 1;
        alpha[kj] += 1;
        rhs += a(ki, kj) *
               eval_kernel_derivative(prof, t, x, v, 0, alpha, {0, 0});
      }
    CHECK(std::abs(dt_direct - rhs) <= 1e-8 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("PDE residual by pure finite differences") {
  const auto prof = noncommuting_piecewise();
  const double t = 0.8;  // inside the second segment
  Eigen::VectorXd x(2), v(2);
  x << 0.12, -0.07;
  v << 0.4, -0.3;
  auto gamma = [&](double tt, double x0, double x1, double v0, double v1) {
    Eigen::VectorXd xx(2), vv(2);
    xx << x0, x1;
    vv << v0, v1;
    return eval_kernel(prof, tt, xx, vv).value;
  };
  const Eigen::MatrixXd a = prof.value(t);
  auto residual = [&](double h) {
    const double dt =
        (gamma(t + h, x(0), x(1), v(0), v(1)) -
         gamma(t - h, x(0), x(1), v(0), v(1))) /
        (2 * h);
    const double fx0 = (gamma(t, x(0) + h, x(1), v(0), v(1)) -
                        gamma(t, x(0) - h, x(1), v(0), v(1))) /
                       (2 * h);
    const double fx1 = (gamma(t, x(0), x(1) + h, v(0), v(1)) -
                        gamma(t, x(0), x(1) - h, v(0), v(1))) /
                       (2 * h);
    const double base = gamma(t, x(0), x(1), v(0), v(1));
    const double fv00 = (gamma(t, x(0), x(1), v(0) + h, v(1)) - 2 * base +
                         gamma(t, x(0), x(1), v(0) - h, v(1))) /
                        (h * h);
    const double fv11 = (gamma(t, x(0), x(1), v(0), v(1) + h) - 2 * base +
                         gamma(t, x(0), x(1), v(0), v(1) - h)) /
                        (h * h);
    const double fv01 =
        (gamma(t, x(0), x(1), v(0) + h, v(1) + h) -
         gamma(t, x(0), x(1), v(0) + h, v(1) - h) -
         gamma(t, x(0), x(1), v(0) - h, v(1) + h) +
         gamma(t, x(0), x(1), v(0) - h, v(1) - h)) /
        (4 * h * h);
    return dt + v(0) * fx0 + v(1) * fx1 -
           (a(0, 0) * fv00 + a(1, 1) * fv11 + 2 * a(0, 1) * fv01);
  };
  const double r1 = std::abs(residual(1e-3));
  const double r2 = std::abs(residual(5e-4));
  CHECK(r1 < 1e-4);
  CHECK(r2 < 0.3 * r1 + 1e-10);  // O(h^2) shrink
}

TEST_CASE("analytic derivatives match finite differences (Richardson)") {
  const auto id = TimeMatrixProfile::constant(ident(1), 1.0);
  const double t = 1.0;
  const Eigen::VectorXd x = vec1(0.0), v = vec1(1.0);

  SUBCASE("first v-derivative") {
    const double exact = eval_kernel_derivative(id, t, x, v, 0, {1}, {0});
    auto fd = [&](double h) {
      return (eval_kolmogorov(t, x, vec1(v(0) + h)) -
              eval_kolmogorov(t, x, vec1(v(0) - h))) /
             (2 * h);
    };
    const double e1 = std::abs(fd(1e-3) - exact);
    const double e2 = std::abs(fd(5e-4) - exact);
    CHECK(e1 < 1e-6);
    CHECK(e2 < 0.3 * e1 + 1e-13);
  }
  SUBCASE("zeroth derivative is the kernel") {
    CHECK(eval_kernel_derivative(id, t, x, v, 0, {0}, {0}) ==
          doctest::Approx(eval_kolmogorov(t, x, v)).epsilon(1e-14));
  }
  SUBCASE("x-derivative") {
    const double exact =
        eval_kernel_derivative(id, t, vec1(0.2), v, 0, {0}, {1});
    auto fd = [&](double h) {
      return (eval_kolmogorov(t, vec1(0.2 + h), v) -
              eval_kolmogorov(t, vec1(0.2 - h), v)) /
             (2 * h);
    };
    CHECK(std::abs(fd(1e-4) - exact) < 1e-6);
  }
  SUBCASE("time derivative via the equation") {
    const double exact =
        eval_kernel_derivative(id, t, vec1(0.1), v, 1, {0}, {0});
    auto fd = [&](double h) {
      return (eval_kolmogorov(t + h, vec1(0.1), v) -
              eval_kolmogorov(t - h, vec1(0.1), v)) /
             (2 * h);
    };
    const double e1 = std::abs(fd(1e-3) - exact);
    const double e2 = std::abs(fd(5e-4) - exact);
    CHECK(e1 < 1e-5);
    CHECK(e2 < 0.3 * e1 + 1e-12);
  }
  SUBCASE("second time derivative, constant profile") {
    const double exact =
        eval_kernel_derivative(id, t, vec1(0.1), v, 2, {0}, {0});
    auto fd = [&](double h) {
      return (eval_kolmogorov(t + h, vec1(0.1), v) -
              2 * eval_kolmogorov(t, vec1(0.1), v) +
              eval_kolmogorov(t - h, vec1(0.1), v)) /
             (h * h);
    };
    const double e1 = std::abs(fd(1e-3) - exact);
    CHECK(e1 < 1e-4);
  }
}

TEST_CASE("derivative preconditions") {
  const auto prof = noncommuting_piecewise();
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(2),
                        v = Eigen::VectorXd::Zero(2);
  // depth cap |alpha| + 3|beta| + 2j <= 5
  CHECK_THROWS_AS(eval_kernel_derivative(prof, 0.8, x, v, 0, {3, 0}, {1, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(eval_kernel_derivative(prof, 0.8, x, v, 3, {0, 0}, {0, 0}),
                  std::invalid_argument);
  // time derivative exactly at the coefficient jump
  CHECK_THROWS_AS(eval_kernel_derivative(prof, 0.4, x, v, 1, {0, 0}, {0, 0}),
                  std::invalid_argument);
  // j = 2 on a smooth profile without da/dt
  auto fn = [](double t) {
    return (1.0 + 0.1 * std::sin(t)) * Eigen::MatrixXd::Identity(1, 1);
  };
  const auto no_deriv = TimeMatrixProfile::smooth(fn, 1, 2.0);
  CHECK_THROWS_AS(
      eval_kernel_derivative(no_deriv, 0.5, vec1(0), vec1(0), 2, {0}, {0}),
      std::invalid_argument);
  // but j = 1 works and matches finite differences
  const double exact =
      eval_kernel_derivative(no_deriv, 0.5, vec1(0.05), vec1(0.3), 1, {0}, {0});
  auto fd = [&](double h) {
    return (eval_kernel(no_deriv, 0.5 + h, vec1(0.05), vec1(0.3)).value -
            eval_kernel(no_deriv, 0.5 - h, vec1(0.05), vec1(0.3)).value) /
           (2 * h);
  };
  CHECK(std::abs(fd(1e-4) - exact) < 1e-5);
}

TEST_CASE("Galilean covariance of the kernel argument") {
  // Gamma(ztilde^{-1} o z) computed through the group equals the direct
  // evaluation at (t - ttilde, x - xtilde - (t - ttilde) vtilde, v - vtilde)
  const auto prof = noncommuting_piecewise();
  const CounterRng rng(4);
  const auto s = CounterRng::stream("galilean");
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd xt(2), vt(2), xz(2), vz(2);
    for (int k = 0; k < 2; ++k) {
      xt(k) = rng.uniform(s, 20 * i + k, -0.5, 0.5);
      vt(k) = rng.uniform(s, 20 * i + 4 + k, -0.5, 0.5);
      xz(k) = rng.uniform(s, 20 * i + 8 + k, -0.5, 0.5);
      vz(k) = rng.uniform(s, 20 * i + 12 + k, -0.5, 0.5);
    }
    const KineticPoint ztilde(0.3, xt, vt);
    const KineticPoint z(1.1, xz, vz);
    const KineticPoint arg = invert_into(ztilde, z);
    const double via_group = eval_kernel(prof, arg.t, arg.x, arg.v).value;
    const double direct =
        eval_kernel(prof, z.t - ztilde.t,
                    z.x - ztilde.x - (z.t - ztilde.t) * ztilde.v,
                    z.v - ztilde.v)
            .value;
    CHECK(via_group == doctest::Approx(direct).epsilon(1e-14));
  }
}
