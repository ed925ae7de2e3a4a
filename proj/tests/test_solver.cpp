#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kfp/rng.hpp"
#include "kfp/solver.hpp"

using namespace kfp;

namespace {

TimeMatrixProfile identity_profile(int d = 1) {
  return TimeMatrixProfile::constant(Eigen::MatrixXd::Identity(d, d), 1.0);
}

GridField phase_grid(int nx, int nv, double xr, double vr, Boundary bx,
                     Boundary bv) {
  GridField f;
  f.time = Axis{1, 0.0, 0.0};
  if (bx == Boundary::periodic)
    f.x_axes = {Axis{nx, -xr, 2.0 * xr / nx}};
  else
    f.x_axes = {Axis{nx, -xr, 2.0 * xr / (nx - 1)}};
  if (bv == Boundary::periodic)
    f.v_axes = {Axis{nv, -vr, 2.0 * vr / nv}};
  else
    f.v_axes = {Axis{nv, -vr, 2.0 * vr / (nv - 1)}};
  f.boundary_x = bx;
  f.boundary_v = bv;
  f.allocate();
  return f;
}

void fill(GridField& f, const std::function<double(double, double)>& fn) {
  for (int ix = 0; ix < f.x_axes[0].n; ++ix)
    for (int iv = 0; iv < f.v_axes[0].n; ++iv)
      f.at(0, &ix, &iv) = fn(f.x_axes[0].coord(ix), f.v_axes[0].coord(iv));
}

void fill_kolmogorov(GridField& f, double t0) {
  fill(f, [t0](double x, double v) {
    Eigen::VectorXd xv(1), vv(1);
    xv << x;
    vv << v;
    return eval_kolmogorov(t0, xv, vv);
  });
}

}  // namespace

TEST_CASE("kernel solver reproduces the semigroup") {
  // propagate Gamma_Id(t0) by t and compare with Gamma_Id(t0 + t)
  const double t0 = 2.0, t = 0.5;
  GridField f0 = phase_grid(96, 96, 14.0, 24.0, Boundary::truncated_decay,
                            Boundary::truncated_decay);
  fill_kolmogorov(f0, t0);
  const GridField out = solve_ivp_kernel(identity_profile(), f0, t);
  double sup = 0.0;
  GridField expect = f0;
  fill_kolmogorov(expect, t0 + t);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    sup = std::max(sup, std::abs(out.data[i] - expect.data[i]));
  CHECK(sup <= 1e-6);
  CHECK(out.time.origin == doctest::Approx(t));

  // mass is conserved through the convolution
  CHECK(out.mass(0) == doctest::Approx(f0.mass(0)).epsilon(1e-8));
}

TEST_CASE("kernel solver keeps constants on periodic domains") {
  const auto rough = TimeMatrixProfile::seeded_random(17, 10, 1, 2.0);
  GridField f0 =
      phase_grid(32, 32, 2.0, 5.0, Boundary::periodic, Boundary::periodic);
  for (auto& v : f0.data) v = 0.75;
  const GridField out = solve_ivp_kernel(rough, f0, 0.6);
  for (double v : out.data) CHECK(v == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("kernel solver rejects non-decaying data and bad times") {
  GridField f0 = phase_grid(24, 24, 2.0, 3.0, Boundary::truncated_decay,
                            Boundary::truncated_decay);
  for (auto& v : f0.data) v = 1.0;  // no decay at the truncated boundary
  CHECK_THROWS_AS(solve_ivp_kernel(identity_profile(), f0, 0.5),
                  std::invalid_argument);
  fill(f0, [](double x, double v) {
    return std::exp(-8.0 * (x * x + v * v));
  });
  CHECK_THROWS_AS(solve_ivp_kernel(identity_profile(), f0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("forced kernel solver integrates constant forcing to f = t") {
  GridField g =
      phase_grid(24, 24, 2.0, 5.0, Boundary::periodic, Boundary::periodic);
  for (auto& v : g.data) v = 1.0;
  const double t_end = 0.7;
  const GridField out = solve_forced_kernel(identity_profile(), g, t_end);
  for (double v : out.data) CHECK(v == doctest::Approx(t_end).epsilon(1e-8));

  for (auto& v : g.data) v = 0.0;
  const GridField zero = solve_forced_kernel(identity_profile(), g, t_end);
  for (double v : zero.data) CHECK(v == 0.0);
}

TEST_CASE("fd solver: spatially constant reductions") {
  SUBCASE("c = -1 gives exponential decay") {
    const auto rough = TimeMatrixProfile::seeded_random(23, 8, 1, 2.0);
    GridField f0 =
        phase_grid(24, 24, 2.0, 5.0, Boundary::periodic, Boundary::periodic);
    for (auto& v : f0.data) v = 1.0;
    CoefficientField coeffs = CoefficientField::from_profile(rough);
    coeffs.c = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return -1.0;
    };
    FdOptions opts;
    opts.cfl_safety = 0.02;  // small explicit-Euler step for the ODE error
    const FdResult res = solve_fd(coeffs, f0, 0.5, opts);
    for (double v : res.final_slice.data)
      CHECK(v == doctest::Approx(std::exp(-0.5)).epsilon(1e-4));
  }
  SUBCASE("g = 1 integrates to f = t") {
    GridField f0 =
        phase_grid(16, 16, 2.0, 4.0, Boundary::periodic, Boundary::periodic);
    CoefficientField coeffs = CoefficientField::from_profile(identity_profile());
    coeffs.g = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return 1.0;
    };
    const FdResult res = solve_fd(coeffs, f0, 0.8, FdOptions{});
    for (double v : res.final_slice.data)
      CHECK(v == doctest::Approx(0.8).epsilon(1e-6));
  }
}

TEST_CASE("fd vs kernel solver cross-validation") {
  const double t_end = 0.4;
  auto run = [&](const TimeMatrixProfile& prof, int n) {
    GridField f0 = phase_grid(n, n, 3.0, 6.0, Boundary::periodic,
                              Boundary::truncated_decay);
    fill(f0, [](double x, double v) {
      return std::exp(-2.0 * x * x - 1.5 * v * v);
    });
    const GridField ker = solve_ivp_kernel(prof, f0, t_end);
    FdOptions opts;
    opts.cfl_safety = 0.4;
    opts.transport = Transport::muscl;
    const FdResult fd = solve_fd(CoefficientField::from_profile(prof), f0,
                                 t_end, opts);
    double sup = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < ker.data.size(); ++i) {
      sup = std::max(sup,
                     std::abs(ker.data[i] - fd.final_slice.data[i]));
      scale = std::max(scale, std::abs(ker.data[i]));
    }
    return sup / scale;
  };
  {
    const auto prof = identity_profile();
    const double err64 = run(prof, 64);
    const double err128 = run(prof, 128);
    CHECK(err64 <= 0.02);
    CHECK(err128 < err64);
  }
  {
    const auto prof = TimeMatrixProfile::seeded_random(31, 10, 1, 2.0);
    const double err64 = run(prof, 64);
    const double err128 = run(prof, 128);
    CHECK(err64 <= 0.02);
    CHECK(err128 < err64);
  }
}

TEST_CASE("comparison principle for c <= 0, g = 0") {
  const CounterRng rng(77);
  const auto s = CounterRng::stream("cmp");
  for (std::uint64_t run = 0; run < 10; ++run) {
    const auto prof = TimeMatrixProfile::seeded_random(100 + run, 6, 1, 2.0);
    GridField f0 =
        phase_grid(24, 24, 2.0, 4.0, Boundary::periodic, Boundary::periodic);
    fill(f0, [&](double x, double v) {
      double acc = 0.0;
      for (int m = 1; m <= 3; ++m)
        acc += rng.uniform(s, 100 * run + m, -1.0, 1.0) *
                   std::sin(m * M_PI * x / 2.0) +
               rng.uniform(s, 100 * run + 10 + m, -1.0, 1.0) *
                   std::cos(m * M_PI * v / 4.0);
      return acc;
    });
    double lo = 1e300, hi = -1e300;
    for (double v : f0.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CoefficientField coeffs = CoefficientField::from_profile(prof);
    const double cval = -rng.uniform(s, 9000 + run, 0.0, 1.0);
    coeffs.c = [cval](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return cval;
    };
    const FdResult res = solve_fd(coeffs, f0, 0.3, FdOptions{});
    for (double v : res.final_slice.data) {
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
  }
}

TEST_CASE("galilean invariance of the kernel solver") {
  const double t_end = 0.5;
  const int n = 64;
  const double x0 = 8 * (6.0 / n);   // grid-commensurate shift
  const double v0 = 4 * (12.0 / n);  // t_end * v0 is a multiple of dx
  REQUIRE(std::abs(std::remainder(t_end * v0, 6.0 / n)) < 1e-12);

  auto bump = [](double x, double v) {
    return std::exp(-2.0 * x * x - 1.5 * v * v);
  };
  GridField f0 = phase_grid(n, n, 3.0, 6.0, Boundary::periodic,
                            Boundary::periodic);
  fill(f0, bump);
  GridField f0s = f0;
  fill(f0s, [&](double x, double v) { return bump(x - x0, v - v0); });

  const auto prof = TimeMatrixProfile::seeded_random(13, 8, 1, 2.0);
  const GridField a = solve_ivp_kernel(prof, f0, t_end);
  const GridField b = solve_ivp_kernel(prof, f0s, t_end);
  // b(t, x, v) should equal a(t, x - x0 - t v0, v - v0) at matching nodes
  const double total_shift = x0 + t_end * v0;
  const int sx = static_cast<int>(std::llround(total_shift / f0.x_axes[0].step));
  const int sv = static_cast<int>(std::llround(v0 / f0.v_axes[0].step));
  double sup = 0.0;
  for (int ix = 0; ix < n; ++ix)
    for (int iv = 0; iv < n; ++iv) {
      const int jx = ((ix - sx) % n + n) % n;
      const int jv = iv - sv;
      if (jv < 0 || jv >= n) continue;
      sup = std::max(sup,
                     std::abs(b.at(0, &ix, &iv) - a.at(0, &jx, &jv)));
    }
  CHECK(sup <= 1e-10);
}

TEST_CASE("fd trajectory, residual check, and fault injection") {
  const auto prof = identity_profile();
  GridField f0 = phase_grid(48, 48, 3.0, 6.0, Boundary::periodic,
                            Boundary::truncated_decay);
  fill(f0, [](double x, double v) {
    return std::exp(-2.0 * x * x - 1.5 * v * v);
  });
  FdOptions opts;
  opts.save_every = 40;
  opts.transport = Transport::muscl;
  const FdResult res = solve_fd(CoefficientField::from_profile(prof), f0, 0.2,
                                opts);
  REQUIRE(res.trajectory.time.n >= 3);

  SUBCASE("constant stationary solution has zero residual") {
    GridField traj = res.trajectory;
    for (auto& v : traj.data) v = 3.0;
    traj.boundary_x = traj.boundary_v = Boundary::periodic;
    const ResidualReport rr =
        residual_check(traj, CoefficientField::from_profile(prof));
    CHECK(rr.max_abs == 0.0);
  }
  SUBCASE("exact-solution residual refines at second order") {
    auto residual_at = [&](int n) {
      GridField traj = phase_grid(n, n, 3.0, 6.0, Boundary::periodic,
                                  Boundary::truncated_decay);
      const int slices = 5;
      traj.time = Axis{slices, 1.0, 0.02};
      traj.allocate();
      for (int it = 0; it < slices; ++it) {
        const double t = traj.time.coord(it);
        for (int ix = 0; ix < n; ++ix)
          for (int iv = 0; iv < n; ++iv) {
            Eigen::VectorXd xv(1), vv(1);
            xv << traj.x_axes[0].coord(ix);
            vv << traj.v_axes[0].coord(iv);
            traj.data[static_cast<std::size_t>(
                traj.index(it, &ix, &iv))] = eval_kolmogorov(t, xv, vv);
          }
      }
      const ResidualReport rr =
          residual_check(traj, CoefficientField::from_profile(prof));
      return rr.max_abs;
    };
    const double r48 = residual_at(48);
    const double r96 = residual_at(96);
    CHECK(r96 < 0.4 * r48);
  }
  SUBCASE("corrupted field is flagged") {
    GridField traj = res.trajectory;
    const ResidualReport clean =
        residual_check(traj, CoefficientField::from_profile(prof));
    traj.data[traj.data.size() / 2] += 1.0;
    const ResidualReport bad =
        residual_check(traj, CoefficientField::from_profile(prof));
    CHECK(bad.max_abs > 10.0 * clean.max_abs);
  }
  SUBCASE("too few slices") {
    GridField two = res.trajectory;
    two.time.n = 2;
    two.data.resize(static_cast<std::size_t>(2 * two.slice_size()));
    CHECK_THROWS_AS(residual_check(two, CoefficientField::from_profile(prof)),
                    std::invalid_argument);
  }
}

TEST_CASE("fd solver aborts on blow-up with diagnostics") {
  GridField f0 =
      phase_grid(16, 16, 2.0, 4.0, Boundary::periodic, Boundary::periodic);
  for (auto& v : f0.data) v = 1.0;
  CoefficientField coeffs = CoefficientField::from_profile(identity_profile());
  coeffs.c = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return 1e4;  // exponential blow-up overflows quickly
  };
  CHECK_THROWS_WITH_AS(solve_fd(coeffs, f0, 5.0, FdOptions{}),
                       doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("drift term folds into the forcing") {
  // b grad_v f with f = sin(pi v / 4) on a periodic box
  GridField f0 =
      phase_grid(16, 32, 2.0, 4.0, Boundary::periodic, Boundary::periodic);
  fill(f0, [](double, double v) { return std::sin(M_PI * v / 4.0); });
  CoefficientField coeffs;
  coeffs.dim = 1;
  coeffs.lambda = 1.0;
  coeffs.a = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(1, 1);
  };
  coeffs.b = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    Eigen::VectorXd b(1);
    b << 0.5;
    return b;
  };
  CoefficientField no_drift = coeffs;
  no_drift.b = nullptr;
  FdOptions opts;
  opts.cfl_safety = 0.2;
  const double t_end = 0.05;
  const FdResult with_b = solve_fd(coeffs, f0, t_end, opts);
  const FdResult without_b = solve_fd(no_drift, f0, t_end, opts);
  double sup = 0.0;
  for (int ix = 0; ix < 16; ++ix)
    for (int iv = 0; iv < 32; ++iv) {
      const double v = f0.v_axes[0].coord(iv);
      const double expect =
          0.5 * (M_PI / 4.0) * std::cos(M_PI * v / 4.0) * t_end;
      const double got = with_b.final_slice.at(0, &ix, &iv) -
                         without_b.final_slice.at(0, &ix, &iv);
      sup = std::max(sup, std::abs(got - expect));
    }
  CHECK(sup <= 2e-3);
}

TEST_CASE("serial reference and parallel stepping agree bitwise") {
  const auto prof = TimeMatrixProfile::seeded_random(41, 8, 1, 2.0);
  GridField f0 = phase_grid(32, 32, 2.0, 4.0, Boundary::periodic,
                            Boundary::truncated_decay);
  fill(f0, [](double x, double v) {
    return std::exp(-3.0 * x * x - 2.0 * v * v);
  });
  for (Transport tr : {Transport::upwind1, Transport::muscl}) {
    FdOptions a;
    a.serial = true;
    a.transport = tr;
    FdOptions b;
    b.serial = false;
    b.transport = tr;
    const FdResult ra = solve_fd(CoefficientField::from_profile(prof), f0, 0.1, a);
    const FdResult rb = solve_fd(CoefficientField::from_profile(prof), f0, 0.1, b);
    for (std::size_t i = 0; i < ra.final_slice.data.size(); ++i)
      CHECK(ra.final_slice.data[i] == rb.final_slice.data[i]);
  }
  KernelSolveOptions ka;
  ka.serial = true;
  KernelSolveOptions kb;
  kb.serial = false;
  const GridField ca = solve_ivp_kernel(prof, f0, 0.3, ka);
  const GridField cb = solve_ivp_kernel(prof, f0, 0.3, kb);
  for (std::size_t i = 0; i < ca.data.size(); ++i)
    CHECK(ca.data[i] == cb.data[i]);
}

TEST_CASE("fd solver runs in two phase dimensions") {
  // d = 2: constants decay at rate c on a fully periodic box
  GridField f0;
  f0.time = Axis{1, 0.0, 0.0};
  f0.x_axes = {Axis{8, -1.0, 0.25}, Axis{8, -1.0, 0.25}};
  f0.v_axes = {Axis{8, -2.0, 0.5}, Axis{8, -2.0, 0.5}};
  f0.boundary_x = f0.boundary_v = Boundary::periodic;
  f0.allocate();
  for (auto& v : f0.data) v = 2.0;

  // rotating anisotropic a(t) exercises the mixed-derivative stencil
  auto fn = [](double t) {
    Eigen::Matrix2d rot;
    rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    Eigen::Vector2d eig(1.4, 0.75);
    Eigen::Matrix2d m = rot * eig.asDiagonal() * rot.transpose();
    return Eigen::MatrixXd(0.5 * (m + m.transpose()));
  };
  CoefficientField coeffs;
  coeffs.dim = 2;
  coeffs.lambda = 2.0;
  coeffs.a = [fn](double t, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return fn(t);
  };
  coeffs.c = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return -0.5;
  };
  FdOptions opts;
  opts.cfl_safety = 0.05;
  const FdResult res = solve_fd(coeffs, f0, 0.2, opts);
  for (double v : res.final_slice.data)
    CHECK(v == doctest::Approx(2.0 * std::exp(-0.1)).epsilon(1e-3));
}

TEST_CASE("transport derivative field uses the solver stencil") {
  // f(t, x, v) = t has unit transport derivative
  GridField traj = phase_grid(12, 12, 2.0, 3.0, Boundary::periodic,
                              Boundary::periodic);
  traj.time = Axis{4, 0.0, 0.1};
  traj.allocate();
  for (int it = 0; it < 4; ++it) {
    const std::int64_t n = traj.slice_size();
    for (std::int64_t i = 0; i < n; ++i)
      traj.data[static_cast<std::size_t>(it * n + i)] = 0.1 * it;
  }
  const GridField tf = transport_derivative_field(traj);
  CHECK(tf.time.n == 3);
  for (double v : tf.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}
