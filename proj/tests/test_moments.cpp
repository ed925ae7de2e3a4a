#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kfp/moments.hpp"

using namespace kfp;

namespace {

TimeMatrixProfile identity_profile(int d) {
  return TimeMatrixProfile::constant(Eigen::MatrixXd::Identity(d, d), 1.0);
}

MomentSpec spec(int d, int j, std::vector<int> alpha, std::vector<int> beta,
                double r, double s, bool shift = false) {
  MomentSpec m;
  m.j = j;
  m.alpha = std::move(alpha);
  m.beta = std::move(beta);
  if (m.alpha.empty()) m.alpha.assign(d, 0);
  if (m.beta.empty()) m.beta.assign(d, 0);
  m.r = r;
  m.s = s;
  m.shift_max = shift;
  return m;
}

std::vector<double> geometric_times(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i)
    out.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return out;
}

}  // namespace

TEST_CASE("normalization: mass is one for all profiles and times") {
  QuadratureBudget b;
  for (int d : {1, 2}) {
    const auto id = identity_profile(d);
    const auto rough = TimeMatrixProfile::seeded_random(3, 12, d, 2.0);
    for (double t : {1e-3, 0.1, 1.0, 10.0}) {
      for (const auto* prof : {&id, &rough}) {
        const MomentResult r =
            moment_integral(*prof, t, spec(d, 0, {}, {}, 0, 0), b);
        CHECK(std::abs(r.value - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("analytic Gaussian moments of the explicit kernel") {
  const auto id = identity_profile(1);
  QuadratureBudget b;
  SUBCASE("absolute velocity moment: 2 sqrt(t/pi)") {
    for (double t : {0.25, 1.0}) {
      const MomentResult r = moment_integral(id, t, spec(1, 0, {}, {}, 0, 1), b);
      CHECK(r.value ==
            doctest::Approx(2.0 * std::sqrt(t / M_PI)).epsilon(1e-5));
    }
  }
  SUBCASE("absolute position moment: sqrt(4 t^3 / (3 pi))") {
    const MomentResult r = moment_integral(id, 1.0, spec(1, 0, {}, {}, 1, 0), b);
    CHECK(r.value == doctest::Approx(std::sqrt(4.0 / (3.0 * M_PI))).epsilon(1e-5));
  }
  SUBCASE("first v-derivative: 2 / sqrt(pi t)") {
    for (double t : {0.5, 1.0}) {
      const MomentResult r =
          moment_integral(id, t, spec(1, 0, {1}, {}, 0, 0), b);
      CHECK(r.value == doctest::Approx(2.0 / std::sqrt(M_PI * t)).epsilon(1e-5));
    }
  }
  SUBCASE("d=2 factorization of the derivative moment") {
    // Gamma_2 = Gamma_1(x1,v1) Gamma_1(x2,v2), so the mixed integral splits
    const auto id2 = identity_profile(2);
    const MomentResult r =
        moment_integral(id2, 1.0, spec(2, 0, {1, 0}, {}, 0, 0), b);
    CHECK(r.value == doctest::Approx(2.0 / std::sqrt(M_PI)).epsilon(1e-4));
  }
}

TEST_CASE("second derivative moment against a brute-force oracle") {
  // dense trapezoid over (x, v) of |d^2/dv^2 Gamma_Id| from the closed form,
  // independent of the polynomial machinery
  const double t = 1.0;
  const int n = 1200;
  const double xr = 8.0, vr = 8.0;
  const double dx = 2 * xr / n, dv = 2 * vr / n;
  double oracle = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = -xr + i * dx;
    for (int j = 0; j <= n; ++j) {
      const double v = -vr + j * dv;
      const double q = x - 0.5 * t * v;
      const double y = 3.0 * q / (t * t) - v / (2.0 * t);
      const double gamma = std::sqrt(3.0) / (2.0 * M_PI * t * t) *
                           std::exp(-3.0 * q * q / (t * t * t) -
                                    v * v / (4.0 * t));
      double w = 1.0;
      if (i == 0 || i == n) w *= 0.5;
      if (j == 0 || j == n) w *= 0.5;
      oracle += w * std::abs((y * y - 2.0 / t) * gamma) * dx * dv;
    }
  }
  const auto id = identity_profile(1);
  const MomentResult r =
      moment_integral(id, t, spec(1, 0, {2}, {}, 0, 0), QuadratureBudget{});
  CHECK(r.value == doctest::Approx(oracle).epsilon(1e-4));
}

TEST_CASE("signed first derivative integrates to zero (divergence theorem)") {
  const auto prof = TimeMatrixProfile::seeded_random(8, 10, 1, 2.0);
  const DerivativeKernel dk(prof, 0.7, 0, {1}, {0});
  const int n = 800;
  const double xr = 6.0, vr = 8.0;
  const double dx = 2 * xr / n, dv = 2 * vr / n;
  double total = 0.0;
  Eigen::VectorXd x(1), v(1);
  for (int i = 0; i <= n; ++i) {
    x(0) = -xr + i * dx;
    for (int j = 0; j <= n; ++j) {
      v(0) = -vr + j * dv;
      total += dk(x, v) * dx * dv;
    }
  }
  CHECK(std::abs(total) <= 1e-6);
}

TEST_CASE("scaling exponents recover the predicted powers") {
  const std::vector<double> times = geometric_times(1e-2, 1.0, 7);
  QuadratureBudget b;

  SUBCASE("identity profile, full spec set") {
    const auto id = identity_profile(1);
    std::vector<MomentSpec> specs{
        spec(1, 0, {}, {}, 0, 0), spec(1, 0, {}, {}, 0, 1),
        spec(1, 0, {}, {}, 1, 0), spec(1, 0, {1}, {}, 0, 0),
        spec(1, 0, {2}, {}, 0, 0), spec(1, 0, {}, {1}, 0, 0),
        spec(1, 1, {}, {}, 0, 0)};
    for (std::size_t i = 0; i < specs.size(); ++i)
      specs[i].id = "s" + std::to_string(i);
    const ScalingReport rep = moment_scaling_scan(id, specs, times, b);
    const double expected[] = {0.0, 0.5, 1.5, -0.5, -1.0, -1.5, -1.0};
    REQUIRE(rep.fits.size() == 7);
    for (std::size_t i = 0; i < rep.fits.size(); ++i) {
      CHECK(rep.fits[i].predicted == doctest::Approx(expected[i]));
      CHECK(std::abs(rep.fits[i].deviation) <= 0.1);
      CHECK_FALSE(rep.fits[i].flagged);
    }
  }
  SUBCASE("rough profile with and without the shift maximum") {
    // the shift maximum adds a mildly t-dependent boost, so the fit window
    // stays at small times where the lemma's asymptotics dominate
    const auto rough = TimeMatrixProfile::seeded_random(7, 12, 1, 2.0);
    const std::vector<double> small_times = geometric_times(1e-3, 0.3, 7);
    std::vector<MomentSpec> specs{spec(1, 0, {2}, {}, 0, 0),
                                  spec(1, 0, {2}, {}, 0, 0, true),
                                  spec(1, 0, {}, {}, 0, 1, true)};
    specs[0].id = "d2";
    specs[1].id = "d2_shift";
    specs[2].id = "s1_shift";
    const ScalingReport rep = moment_scaling_scan(rough, specs, small_times, b);
    CHECK(std::abs(rep.fits[0].slope + 1.0) <= 0.1);
    CHECK(std::abs(rep.fits[1].slope + 1.0) <= 0.1);
    CHECK(std::abs(rep.fits[2].slope - 0.5) <= 0.1);
  }
  SUBCASE("second time derivative on a piecewise profile") {
    const auto prof = TimeMatrixProfile::piecewise(
        {1e-4}, {1.3 * Eigen::MatrixXd::Identity(1, 1),
                 0.8 * Eigen::MatrixXd::Identity(1, 1)},
        2.0);
    std::vector<MomentSpec> specs{spec(1, 2, {}, {}, 0, 0)};
    specs[0].id = "j2";
    const ScalingReport rep = moment_scaling_scan(prof, specs, times, b);
    CHECK(rep.fits[0].predicted == doctest::Approx(-2.0));
    CHECK(std::abs(rep.fits[0].deviation) <= 0.1);
  }
}

TEST_CASE("scan preconditions and budget exhaustion") {
  const auto id = identity_profile(1);
  CHECK_THROWS_AS(
      moment_scaling_scan(id, {spec(1, 0, {}, {}, 0, 0)},
                          geometric_times(0.5, 1.0, 4), QuadratureBudget{}),
      std::invalid_argument);
  QuadratureBudget tiny;
  tiny.max_evals = 100;
  CHECK_THROWS_AS(moment_integral(id, 1.0, spec(1, 0, {}, {}, 0, 0), tiny),
                  std::runtime_error);
}

TEST_CASE("Chapman-Kolmogorov composition") {
  const auto id = identity_profile(1);
  std::vector<KineticPoint> pts;
  for (double x : {0.0, 0.4, -0.6}) {
    for (double v : {0.0, 0.8, -1.2}) {
      Eigen::VectorXd xv(1), vv(1);
      xv << x;
      vv << v;
      pts.emplace_back(1.0, xv, vv);
    }
  }
  // a point deep in the tails: both sides vanish and the ratio is skipped
  {
    Eigen::VectorXd xv(1), vv(1);
    xv << 200.0;
    vv << 50.0;
    pts.emplace_back(1.0, xv, vv);
  }
  const ChapmanKolmogorovReport rep =
      chapman_kolmogorov_check(id, 0.5, 0.5, pts, 128);
  CHECK(rep.max_rel_error <= 1e-4);
  CHECK(rep.points.back().skipped);

  const auto rough = TimeMatrixProfile::seeded_random(5, 6, 1, 2.0);
  CHECK_THROWS_AS(chapman_kolmogorov_check(rough, 0.5, 0.5, pts, 64),
                  std::invalid_argument);
}

TEST_CASE("moments move continuously as the composition time vanishes") {
  // convolving Gamma(t) with Gamma(s) equals Gamma(t+s); for s -> 0 its
  // moments approach those of Gamma(t)
  const auto id = identity_profile(1);
  const double t = 1.0;
  QuadratureBudget b;
  const double base =
      moment_integral(id, t, spec(1, 0, {}, {}, 0, 1), b).value;
  double prev_gap = 1e300;
  for (double s : {0.2, 0.05}) {
    const double conv =
        moment_integral(id, t + s, spec(1, 0, {}, {}, 0, 1), b).value;
    const double gap = std::abs(conv - base);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
}
