#include "kfp/landau.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "kfp/quadrature.hpp"
#include "kfp/regularity.hpp"
#include "kfp/rng.hpp"

namespace kfp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void LandauParams::validate() const {
  if (!(gamma >= -3.0 && gamma < 0.0))
    throw std::invalid_argument("LandauParams: gamma must lie in [-3, 0)");
  if (!(a_const > 0.0 && c_const > 0.0))
    throw std::invalid_argument("LandauParams: kernel constants must be > 0");
}

// ---------------------------------------------------------------------------
// VelocityProfile

VelocityProfile VelocityProfile::maxwellian(double amplitude,
                                            double temperature,
                                            Eigen::Vector3d center,
                                            double decay_k) {
  if (!(amplitude >= 0.0) || !(temperature > 0.0))
    throw std::invalid_argument("VelocityProfile::maxwellian: bad parameters");
  VelocityProfile p;
  p.kind_ = Kind::maxwellian;
  p.amplitude_ = amplitude;
  p.temperature_ = temperature;
  p.center_ = std::move(center);
  p.decay_k_ = decay_k;
  // Gaussian decay dominates any polynomial weight; certify by radial scan
  double m = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double r = i * 0.05 * (1.0 + p.center_.norm());
    const double g = amplitude * std::exp(-r * r / (2.0 * temperature));
    m = std::max(m, g * std::pow(1.0 + (r + p.center_.norm()) *
                                           (r + p.center_.norm()),
                                 0.5 * decay_k));
  }
  p.linf_k_ = m;
  return p;
}

VelocityProfile VelocityProfile::indicator_ball(double amplitude, double radius,
                                                Eigen::Vector3d center,
                                                double decay_k) {
  if (!(amplitude >= 0.0) || !(radius > 0.0))
    throw std::invalid_argument("VelocityProfile::indicator_ball: bad parameters");
  VelocityProfile p;
  p.kind_ = Kind::indicator_ball;
  p.amplitude_ = amplitude;
  p.radius_ = radius;
  p.center_ = std::move(center);
  p.decay_k_ = decay_k;
  const double reach = p.center_.norm() + radius;
  p.linf_k_ = amplitude * std::pow(1.0 + reach * reach, 0.5 * decay_k);
  return p;
}

VelocityProfile VelocityProfile::from_grid(GridField samples, double decay_k,
                                           double linf_k) {
  if (samples.dx() != 0 || samples.dv() != 3 || samples.time.n != 1)
    throw std::invalid_argument(
        "VelocityProfile::from_grid: need a single slice over v in R^3");
  for (double v : samples.data)
    if (v < 0.0)
      throw std::invalid_argument("VelocityProfile::from_grid: h must be >= 0");
  VelocityProfile p;
  p.kind_ = Kind::grid;
  p.grid_ = std::move(samples);
  p.decay_k_ = decay_k;
  p.linf_k_ = linf_k;
  for (int k = 0; k < 3; ++k)
    p.center_(k) = p.grid_.v_axes[k].origin +
                   0.5 * p.grid_.v_axes[k].length();
  return p;
}

double VelocityProfile::operator()(const Eigen::Vector3d& v) const {
  switch (kind_) {
    case Kind::maxwellian:
      return amplitude_ *
             std::exp(-(v - center_).squaredNorm() / (2.0 * temperature_));
    case Kind::indicator_ball:
      return (v - center_).norm() <= radius_ ? amplitude_ : 0.0;
    case Kind::grid: {
      Eigen::VectorXd x0(0);
      for (int k = 0; k < 3; ++k) {
        const Axis& a = grid_.v_axes[k];
        if (v(k) < a.origin || v(k) > a.coord(a.n - 1)) return 0.0;
      }
      return grid_.interpolate(0, x0, v);
    }
  }
  return 0.0;
}

double VelocityProfile::support_radius(double eps) const {
  switch (kind_) {
    case Kind::maxwellian: {
      if (!(eps < amplitude_)) return 0.0;
      return std::sqrt(2.0 * temperature_ * std::log(amplitude_ / eps));
    }
    case Kind::indicator_ball:
      return radius_;
    case Kind::grid: {
      double r = 0.0;
      for (int k = 0; k < 3; ++k) {
        const Axis& a = grid_.v_axes[k];
        r = std::max(r, std::max(std::abs(a.origin - center_(k)),
                                 std::abs(a.coord(a.n - 1) - center_(k))));
      }
      return r * std::sqrt(3.0);
    }
  }
  return 0.0;
}

double VelocityProfile::characteristic_width() const {
  switch (kind_) {
    case Kind::maxwellian:
      return std::sqrt(temperature_);
    case Kind::indicator_ball:
      return radius_;
    case Kind::grid: {
      double w = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) w = std::min(w, grid_.v_axes[k].step);
      return 2.0 * w;
    }
  }
  return 1.0;
}

VelocityProfile VelocityProfile::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const std::string kind = j.at("kind").get<std::string>();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  if (j.contains("center")) {
    auto c = j["center"].get<std::vector<double>>();
    if (c.size() != 3)
      throw std::invalid_argument("VelocityProfile JSON: center needs 3 entries");
    center << c[0], c[1], c[2];
  }
  VelocityProfile p = [&] {
    if (kind == "maxwellian")
      return maxwellian(j.value("amplitude", 1.0), j.value("temperature", 1.0),
                        center, j.value("decay_k", 8.0));
    if (kind == "indicator")
      return indicator_ball(j.value("amplitude", 1.0), j.value("radius", 1.0),
                            center, j.value("decay_k", 8.0));
    throw std::invalid_argument("VelocityProfile JSON: unknown kind '" + kind +
                                "'");
  }();
  if (j.contains("witness")) {
    NondegeneracyWitness w;
    w.delta = j["witness"].value("delta", 0.0);
    w.r = j["witness"].value("r", 0.0);
    if (j["witness"].contains("v_x")) {
      auto c = j["witness"]["v_x"].get<std::vector<double>>();
      w.v_x << c[0], c[1], c[2];
    }
    p.witness = w;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Quadrature helpers

namespace {

std::vector<double> radial_edges(double rho_in, double reach,
                                 const LandauBudget& b) {
  std::vector<double> edges;
  const double rmid = std::min(1.0, reach);
  edges.push_back(rho_in);
  if (rmid > rho_in) {
    const int n = b.radial_panels;
    for (int k = 1; k <= n; ++k)
      edges.push_back(rho_in * std::pow(rmid / rho_in, double(k) / n));
  }
  double e = edges.back();
  while (e < reach) {
    e = std::min(reach, e * std::pow(2.0, 1.0 / b.tail_panels_per_octave));
    edges.push_back(e);
  }
  return edges;
}

struct RadialRule {
  std::vector<double> r, w;
};

RadialRule radial_rule(double rho_in, double reach, const LandauBudget& b,
                       int npp) {
  RadialRule rule;
  const std::vector<double> edges = radial_edges(rho_in, reach, b);
  std::vector<double> xs, ws;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    gauss_legendre_on(npp, edges[k], edges[k + 1], xs, ws);
    rule.r.insert(rule.r.end(), xs.begin(), xs.end());
    rule.w.insert(rule.w.end(), ws.begin(), ws.end());
  }
  return rule;
}

// radial value of a symmetric profile at distance `dist` from its center
double radial_value(const VelocityProfile& h, double dist) {
  Eigen::Vector3d v = h.center();
  v(0) += dist;
  return h(v);
}

struct AxisymResult {
  double par = 0.0, perp = 0.0, c = 0.0;
};

// One pass of the axisymmetric (r, mu) quadrature at fixed node budget.
AxisymResult axisym_pass(const LandauParams& params, const VelocityProfile& h,
                         double rho_rel, const LandauBudget& budget, int npp) {
  AxisymResult acc;
  const double gamma = params.gamma;
  const double reach = rho_rel + h.support_radius(budget.tail_eps);
  const RadialRule rr = radial_rule(budget.inner_radius, reach, budget, npp);
  const double width2 =
      std::max(1e-6, h.characteristic_width() * h.characteristic_width());

  std::vector<double> mx, mw, xs, ws;
  for (std::size_t i = 0; i < rr.r.size(); ++i) {
    const double r = rr.r[i];
    const double wr = rr.w[i];
    int nmu = budget.mu_panels_base +
              static_cast<int>(std::ceil(r * rho_rel / width2 / 4.0));
    nmu = std::min(nmu, budget.mu_panels_max);

    // panel boundaries in mu; indicator profiles get a split at the edge
    std::vector<double> mu_edges{-1.0, 1.0};
    if (h.kind() == VelocityProfile::Kind::indicator_ball && rho_rel > 0.0) {
      const double rad = h.support_radius(0.0);
      const double mu_star =
          (rho_rel * rho_rel + r * r - rad * rad) / (2.0 * r * rho_rel);
      if (mu_star > -1.0 && mu_star < 1.0)
        mu_edges = {-1.0, mu_star, 1.0};
    }
    mx.clear();
    mw.clear();
    for (std::size_t e = 0; e + 1 < mu_edges.size(); ++e) {
      const double lo = mu_edges[e], hi = mu_edges[e + 1];
      const int sub = std::max(1, static_cast<int>(
                                       std::ceil(nmu * (hi - lo) / 2.0)));
      for (int s = 0; s < sub; ++s) {
        gauss_legendre_on(npp, lo + (hi - lo) * s / sub,
                          lo + (hi - lo) * (s + 1) / sub, xs, ws);
        mx.insert(mx.end(), xs.begin(), xs.end());
        mw.insert(mw.end(), ws.begin(), ws.end());
      }
    }

    const double r4 = std::pow(r, 4.0 + gamma);
    const double r2 = std::pow(r, 2.0 + gamma);
    double spar = 0.0, sperp = 0.0, sc = 0.0;
    for (std::size_t m = 0; m < mx.size(); ++m) {
      const double mu = mx[m];
      const double dist = std::sqrt(std::max(
          0.0, rho_rel * rho_rel + r * r - 2.0 * r * rho_rel * mu));
      const double hv = radial_value(h, dist);
      if (hv == 0.0) continue;
      spar += mw[m] * (1.0 - mu * mu) * hv;
      sperp += mw[m] * (1.0 + mu * mu) * hv;
      sc += mw[m] * hv;
    }
    acc.par += wr * 2.0 * kPi * r4 * spar;
    acc.perp += wr * kPi * r4 * sperp;
    acc.c += wr * 2.0 * kPi * r2 * sc;
  }
  return acc;
}

Eigen::Vector3d axis_of(const Eigen::Vector3d& u) {
  if (u.norm() < 1e-14) return Eigen::Vector3d::UnitZ();
  return u.normalized();
}

// lab-frame spherical rule used by the general path; validated once against
// the exact second moment of the sphere
struct SphereRule {
  std::vector<Eigen::Vector3d> dir;
  std::vector<double> w;  // sums to 4 pi
};

const SphereRule& sphere_rule(int ntheta, int nphi) {
  static SphereRule rule;
  static int cached_nt = 0, cached_np = 0;
  if (cached_nt == ntheta && cached_np == nphi) return rule;
  rule.dir.clear();
  rule.w.clear();
  const GaussLegendre& gl = gauss_legendre(ntheta);
  for (int i = 0; i < ntheta; ++i) {
    const double mu = gl.nodes[i];
    const double smu = std::sqrt(std::max(0.0, 1.0 - mu * mu));
    for (int jp = 0; jp < nphi; ++jp) {
      const double phi = 2.0 * kPi * (jp + 0.5) / nphi;
      rule.dir.emplace_back(smu * std::cos(phi), smu * std::sin(phi), mu);
      rule.w.push_back(gl.weights[i] * 2.0 * kPi / nphi);
    }
  }
  Eigen::Matrix3d moment = Eigen::Matrix3d::Zero();
  double total = 0.0;
  for (std::size_t k = 0; k < rule.w.size(); ++k) {
    moment += rule.w[k] * rule.dir[k] * rule.dir[k].transpose();
    total += rule.w[k];
  }
  moment /= total;
  if ((moment - Eigen::Matrix3d::Identity() / 3.0).cwiseAbs().maxCoeff() >
      1e-12)
    throw std::runtime_error(
        "sphere_rule: angular rule fails the second-moment identity");
  cached_nt = ntheta;
  cached_np = nphi;
  return rule;
}

struct GeneralResult {
  Eigen::Matrix3d mat = Eigen::Matrix3d::Zero();
  double c = 0.0;
};

GeneralResult general_pass(const LandauParams& params, const VelocityProfile& h,
                           const Eigen::Vector3d& v, const LandauBudget& budget,
                           int npp) {
  GeneralResult acc;
  const double gamma = params.gamma;
  const double rho_rel = (v - h.center()).norm();
  const double reach = rho_rel + h.support_radius(budget.tail_eps);
  const RadialRule rr = radial_rule(budget.inner_radius, reach, budget, npp);
  const SphereRule& sph = sphere_rule(budget.angular_theta, budget.angular_phi);
  for (std::size_t i = 0; i < rr.r.size(); ++i) {
    const double r = rr.r[i];
    const double r4 = std::pow(r, 4.0 + gamma) * rr.w[i];
    const double r2 = std::pow(r, 2.0 + gamma) * rr.w[i];
    for (std::size_t k = 0; k < sph.dir.size(); ++k) {
      const double hv = h(v - r * sph.dir[k]);
      if (hv == 0.0) continue;
      const Eigen::Matrix3d proj =
          Eigen::Matrix3d::Identity() - sph.dir[k] * sph.dir[k].transpose();
      acc.mat += (r4 * sph.w[k] * hv) * proj;
      acc.c += r2 * sph.w[k] * hv;
    }
  }
  return acc;
}

}  // namespace

LandauMatrixResult landau_abar(const LandauParams& params,
                               const VelocityProfile& h,
                               const Eigen::Vector3d& v,
                               const LandauBudget& budget) {
  params.validate();
  if (!(h.decay_k() > 5.0 + params.gamma))
    throw std::invalid_argument(
        "landau_abar: decay certificate too weak (need k > 5 + gamma)");

  const double gamma = params.gamma;
  const double rho_in = budget.inner_radius;
  // analytic stub of the ball |w| <= rho_in (integrand ~ h(v) there)
  const double stub =
      h(v) * (8.0 * kPi / 3.0) * std::pow(rho_in, 5.0 + gamma) / (5.0 + gamma);

  LandauMatrixResult out;
  if (h.radially_symmetric()) {
    const double rho_rel = (v - h.center()).norm();
    const AxisymResult coarse =
        axisym_pass(params, h, rho_rel, budget, budget.nodes_per_panel);
    const AxisymResult fine =
        axisym_pass(params, h, rho_rel, budget, 2 * budget.nodes_per_panel);
    out.eig_parallel = params.a_const * (fine.par + stub);
    out.eig_perp = params.a_const * (fine.perp + stub);
    const Eigen::Vector3d e = axis_of(v - h.center());
    const Eigen::Matrix3d ppar = e * e.transpose();
    out.abar = out.eig_parallel * ppar +
               out.eig_perp * (Eigen::Matrix3d::Identity() - ppar);
    out.error_estimate =
        params.a_const * std::max(std::abs(fine.par - coarse.par),
                                  std::abs(fine.perp - coarse.perp));
  } else {
    const GeneralResult coarse =
        general_pass(params, h, v, budget, budget.nodes_per_panel);
    const GeneralResult fine =
        general_pass(params, h, v, budget, 2 * budget.nodes_per_panel);
    out.abar = params.a_const *
               (fine.mat + stub * Eigen::Matrix3d::Identity());
    out.error_estimate =
        params.a_const * (fine.mat - coarse.mat).cwiseAbs().maxCoeff();
  }
  out.abar = 0.5 * (out.abar + out.abar.transpose());
  return out;
}

LandauScalarResult landau_cbar(const LandauParams& params,
                               const VelocityProfile& h,
                               const Eigen::Vector3d& v,
                               const LandauBudget& budget) {
  params.validate();
  LandauScalarResult out;
  if (params.gamma == -3.0) {
    out.cbar = params.c_const * h(v);
    out.error_estimate = 0.0;
    return out;
  }
  if (!(h.decay_k() > 3.0 + params.gamma))
    throw std::invalid_argument(
        "landau_cbar: decay certificate too weak (need k > 3 + gamma)");
  const double gamma = params.gamma;
  const double stub = h(v) * 4.0 * kPi * std::pow(budget.inner_radius, 3.0 + gamma) /
                      (3.0 + gamma);
  if (h.radially_symmetric()) {
    const double rho_rel = (v - h.center()).norm();
    const AxisymResult coarse =
        axisym_pass(params, h, rho_rel, budget, budget.nodes_per_panel);
    const AxisymResult fine =
        axisym_pass(params, h, rho_rel, budget, 2 * budget.nodes_per_panel);
    out.cbar = params.c_const * (fine.c + stub);
    out.error_estimate = params.c_const * std::abs(fine.c - coarse.c);
  } else {
    const GeneralResult coarse =
        general_pass(params, h, v, budget, budget.nodes_per_panel);
    const GeneralResult fine =
        general_pass(params, h, v, budget, 2 * budget.nodes_per_panel);
    out.cbar = params.c_const * (fine.c + stub);
    out.error_estimate = params.c_const * std::abs(fine.c - coarse.c);
  }
  return out;
}

EllipticityReport verify_ellipticity_bounds(
    const LandauParams& params, const VelocityProfile& h,
    const std::vector<Eigen::Vector3d>& v_samples, const LandauBudget& budget,
    Parallelism par) {
  if (v_samples.empty())
    throw std::invalid_argument("verify_ellipticity_bounds: no samples");
  EllipticityReport rep;
  rep.gamma = params.gamma;
  rep.upper_only = !h.witness.has_value();
  rep.rows.resize(v_samples.size());

  parallel_for(
      static_cast<std::int64_t>(v_samples.size()),
      [&](std::int64_t i) {
        const Eigen::Vector3d& v = v_samples[static_cast<std::size_t>(i)];
        const LandauMatrixResult a = landau_abar(params, h, v, budget);
        const LandauScalarResult c = landau_cbar(params, h, v, budget);
        EllipticityRow row;
        row.vnorm = v.norm();
        const Eigen::Vector3d e = axis_of(v);
        row.eig_parallel = e.dot(a.abar * e);
        // eigenvalues of the orthogonal 2x2 block
        Eigen::Vector3d u1 = e.unitOrthogonal();
        Eigen::Vector3d u2 = e.cross(u1);
        Eigen::Matrix2d block;
        block << u1.dot(a.abar * u1), u1.dot(a.abar * u2),
            u2.dot(a.abar * u1), u2.dot(a.abar * u2);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(
            0.5 * (block + block.transpose()));
        row.eig_perp_min = es.eigenvalues().minCoeff();
        row.eig_perp_max = es.eigenvalues().maxCoeff();
        row.cbar = c.cbar;
        rep.rows[static_cast<std::size_t>(i)] = row;
      },
      par);

  std::vector<double> logw, logpar, logperp;
  for (const auto& row : rep.rows) {
    if (row.cbar < 0.0) rep.cbar_nonnegative = false;
    const double bracket = std::sqrt(1.0 + row.vnorm * row.vnorm);
    logw.push_back(std::log(bracket));
    logpar.push_back(std::log(std::max(row.eig_parallel, 1e-300)));
    logperp.push_back(std::log(std::max(row.eig_perp_max, 1e-300)));
  }
  if (logw.size() >= 2) {
    rep.slope_parallel = fit_slope(logw, logpar);
    rep.slope_perp = fit_slope(logw, logperp);
    const double dev_par = rep.slope_parallel - params.gamma;
    const double dev_perp = rep.slope_perp - (2.0 + params.gamma);
    if (rep.upper_only)
      rep.slopes_ok = dev_par <= 0.1 && dev_perp <= 0.1;
    else
      rep.slopes_ok = std::abs(dev_par) <= 0.1 && std::abs(dev_perp) <= 0.1;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Scaling frame

KineticPoint ScalingFrame::map(const KineticPoint& z) const {
  if (z.dim() != 3)
    throw std::invalid_argument("ScalingFrame::map: z must be 3-dimensional");
  KineticPoint sz(z.t, S * z.x, S * z.v);
  return compose(z0, kinetic_scale(sz, r0));
}

ScalingFrame make_scaling_frame(const KineticPoint& z0, double gamma) {
  if (z0.dim() != 3)
    throw std::invalid_argument("make_scaling_frame: z0 must be 3-dimensional");
  if (!(z0.t > 0.0))
    throw std::invalid_argument("make_scaling_frame: t0 must be > 0");
  if (!(gamma >= -3.0 && gamma < 0.0))
    throw std::invalid_argument("make_scaling_frame: gamma in [-3, 0)");
  ScalingFrame frame;
  frame.z0 = z0;
  frame.gamma = gamma;
  const double bracket = std::sqrt(1.0 + z0.v.squaredNorm());
  Eigen::Matrix3d ppar = Eigen::Matrix3d::Zero();
  if (z0.v.norm() > 0.0) {
    const Eigen::Vector3d e = z0.v.normalized();
    ppar = e * e.transpose();
  }
  frame.S = std::pow(bracket, gamma / 2.0) * ppar +
            std::pow(bracket, 1.0 + gamma / 2.0) *
                (Eigen::Matrix3d::Identity() - ppar);
  const double plus = std::max(0.0, 1.0 + gamma / 2.0);
  frame.r0 =
      std::pow(bracket, -plus) * std::min(1.0, std::sqrt(z0.t / 2.0));
  return frame;
}

GridField rescale_field(const GridField& f, const ScalingFrame& frame,
                        const Axis& time, const std::vector<Axis>& x_axes,
                        const std::vector<Axis>& v_axes) {
  if (f.dx() != 3 || f.dv() != 3)
    throw std::invalid_argument("rescale_field: f must live over R^3 x R^3");
  GridField out;
  out.time = time;
  out.x_axes = x_axes;
  out.v_axes = v_axes;
  out.boundary_x = out.boundary_v = Boundary::truncated_decay;
  out.allocate();

  const std::int64_t n = out.slice_size();
  for (int it = 0; it < out.time.n; ++it) {
    const double t = out.time.coord(it);
    for (std::int64_t i = 0; i < n; ++i) {
      std::int64_t rem = i;
      int iv[3], ix[3];
      for (int k = 2; k >= 0; --k) {
        iv[k] = static_cast<int>(rem % out.v_axes[k].n);
        rem /= out.v_axes[k].n;
      }
      for (int k = 2; k >= 0; --k) {
        ix[k] = static_cast<int>(rem % out.x_axes[k].n);
        rem /= out.x_axes[k].n;
      }
      Eigen::VectorXd x(3), v(3);
      for (int k = 0; k < 3; ++k) {
        x(k) = out.x_axes[k].coord(ix[k]);
        v(k) = out.v_axes[k].coord(iv[k]);
      }
      const KineticPoint zp = frame.map(KineticPoint(t, x, v));
      // locate the time slice of f (linear interpolation when it has many)
      double val;
      if (f.time.n == 1) {
        val = f.interpolate(0, zp.x, zp.v);
      } else {
        const double pos = (zp.t - f.time.origin) / f.time.step;
        if (pos < -1e-9 || pos > f.time.n - 1 + 1e-9)
          throw std::out_of_range("rescale_field: mapped time off the grid");
        const int k0 = std::min(f.time.n - 2,
                                std::max(0, static_cast<int>(std::floor(pos))));
        const double w1 = std::min(1.0, std::max(0.0, pos - k0));
        val = (1.0 - w1) * f.interpolate(k0, zp.x, zp.v) +
              w1 * f.interpolate(k0 + 1, zp.x, zp.v);
      }
      out.data[static_cast<std::size_t>(it * n + i)] = val;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Modulated coefficients and the transformed fields

ModulatedLandauCoefficients::ModulatedLandauCoefficients(
    LandauParams params, VelocityProfile base,
    std::function<double(double, const Eigen::Vector3d&)> modulation,
    double rho_max, const LandauBudget& budget, int table_size)
    : params_(params),
      base_(std::move(base)),
      modulation_(std::move(modulation)),
      rho_max_(rho_max) {
  params_.validate();
  if (!base_.radially_symmetric())
    throw std::invalid_argument(
        "ModulatedLandauCoefficients: base profile must be radially symmetric");
  if (!(rho_max > 0.0) || table_size < 8)
    throw std::invalid_argument("ModulatedLandauCoefficients: bad table spec");
  drho_ = rho_max_ / (table_size - 1);
  eig_par_.resize(table_size);
  eig_perp_.resize(table_size);
  cbar_.resize(table_size);
  for (int i = 0; i < table_size; ++i) {
    Eigen::Vector3d v = base_.center();
    v(2) += i * drho_;
    const LandauMatrixResult a = landau_abar(params_, base_, v, budget);
    const LandauScalarResult c = landau_cbar(params_, base_, v, budget);
    eig_par_[static_cast<std::size_t>(i)] = a.eig_parallel;
    eig_perp_[static_cast<std::size_t>(i)] = a.eig_perp;
    cbar_[static_cast<std::size_t>(i)] = c.cbar;
  }
}

double ModulatedLandauCoefficients::table_lookup(const std::vector<double>& tab,
                                                 double rho) const {
  if (rho > rho_max_ + 1e-9)
    throw std::out_of_range("ModulatedLandauCoefficients: rho beyond the table");
  const double pos = std::min(rho, rho_max_) / drho_;
  const int k0 = std::min(static_cast<int>(tab.size()) - 2,
                          static_cast<int>(std::floor(pos)));
  const double w = pos - k0;
  return (1.0 - w) * tab[static_cast<std::size_t>(k0)] +
         w * tab[static_cast<std::size_t>(k0 + 1)];
}

Eigen::Matrix3d ModulatedLandauCoefficients::abar(
    double t, const Eigen::Vector3d& x, const Eigen::Vector3d& v) const {
  const Eigen::Vector3d rel = v - base_.center();
  const double rho = rel.norm();
  const double lpar = table_lookup(eig_par_, rho);
  const double lperp = table_lookup(eig_perp_, rho);
  const Eigen::Vector3d e = axis_of(rel);
  const Eigen::Matrix3d ppar = e * e.transpose();
  const double m = modulation_ ? modulation_(t, x) : 1.0;
  return m * (lpar * ppar + lperp * (Eigen::Matrix3d::Identity() - ppar));
}

double ModulatedLandauCoefficients::cbar(double t, const Eigen::Vector3d& x,
                                         const Eigen::Vector3d& v) const {
  const double rho = (v - base_.center()).norm();
  const double m = modulation_ ? modulation_(t, x) : 1.0;
  return m * table_lookup(cbar_, rho);
}

TransformedCoefficients transformed_coefficients(
    const ModulatedLandauCoefficients& coeffs, const ScalingFrame& frame,
    int nt, int nx, int nv, Parallelism par) {
  if (nt < 2 || nx < 2 || nv < 2)
    throw std::invalid_argument("transformed_coefficients: bad grid spec");
  TransformedCoefficients out;

  GridField proto;
  const double t_lo = -1.0 + 1e-3;
  proto.time = Axis{nt, t_lo, -t_lo / (nt - 1)};
  proto.x_axes.assign(3, Axis{nx, -1.0, 2.0 / (nx - 1)});
  proto.v_axes.assign(3, Axis{nv, -1.0, 2.0 / (nv - 1)});
  proto.boundary_x = proto.boundary_v = Boundary::truncated_decay;
  proto.allocate();
  for (auto& comp : out.abar_components) comp = proto;
  out.cbar = proto;

  const Eigen::Matrix3d sinv = frame.S.inverse();
  const double bracket = std::sqrt(1.0 + frame.z0.v.squaredNorm());
  const double cweight =
      bracket * bracket / std::min(1.0, frame.z0.t);

  const std::int64_t n = proto.slice_size();
  const std::int64_t total = static_cast<std::int64_t>(proto.time.n) * n;
  std::vector<double> conds(static_cast<std::size_t>(total), 1.0);
  std::vector<double> cw(static_cast<std::size_t>(total), 0.0);

  parallel_for(
      total,
      [&](std::int64_t g) {
        const int it = static_cast<int>(g / n);
        const std::int64_t i = g % n;
        std::int64_t rem = i;
        int iv[3], ix[3];
        for (int k = 2; k >= 0; --k) {
          iv[k] = static_cast<int>(rem % nv);
          rem /= nv;
        }
        for (int k = 2; k >= 0; --k) {
          ix[k] = static_cast<int>(rem % nx);
          rem /= nx;
        }
        Eigen::VectorXd x(3), v(3);
        for (int k = 0; k < 3; ++k) {
          x(k) = proto.x_axes[k].coord(ix[k]);
          v(k) = proto.v_axes[k].coord(iv[k]);
        }
        const KineticPoint zp =
            frame.map(KineticPoint(proto.time.coord(it), x, v));
        const Eigen::Matrix3d a = coeffs.abar(zp.t, zp.x, zp.v);
        const Eigen::Matrix3d abar = sinv * a * sinv;
        const double cb =
            frame.r0 * frame.r0 * coeffs.cbar(zp.t, zp.x, zp.v);
        const std::size_t idx = static_cast<std::size_t>(g);
        const int order[6][2] = {{0, 0}, {0, 1}, {0, 2},
                                 {1, 1}, {1, 2}, {2, 2}};
        for (int comp = 0; comp < 6; ++comp)
          out.abar_components[static_cast<std::size_t>(comp)].data[idx] =
              abar(order[comp][0], order[comp][1]);
        out.cbar.data[idx] = cb;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(
            0.5 * (abar + abar.transpose()));
        const double lmin = es.eigenvalues().minCoeff();
        const double lmax = es.eigenvalues().maxCoeff();
        conds[idx] = lmin > 0.0 ? lmax / lmin
                                : std::numeric_limits<double>::infinity();
        cw[idx] = cb * cweight;
      },
      par);

  out.cond_max = *std::max_element(conds.begin(), conds.end());
  out.cbar_weighted_sup = *std::max_element(cw.begin(), cw.end());
  return out;
}

std::function<double(double, const Eigen::Vector3d&)> make_rough_x_modulation(
    double eps, double holder_exponent, int levels, std::uint64_t seed) {
  if (!(eps >= 0.0 && eps < 1.0))
    throw std::invalid_argument("make_rough_x_modulation: eps in [0, 1)");
  if (!(holder_exponent > 0.0 && holder_exponent < 1.0) || levels < 1)
    throw std::invalid_argument("make_rough_x_modulation: bad roughness spec");
  CounterRng rng(seed);
  const auto dir_stream = CounterRng::stream("rough-x-directions");
  const auto phase_stream = CounterRng::stream("rough-x-phases");
  struct Term {
    Eigen::Vector3d dir;
    double freq;
    double amp;
    double phase;
  };
  auto terms = std::make_shared<std::vector<Term>>();
  double norm = 0.0;
  for (int k = 0; k < levels; ++k) {
    Term t;
    Eigen::Vector3d g;
    for (int c = 0; c < 3; ++c) g(c) = rng.normal(dir_stream, 3 * k + c);
    t.dir = g.norm() > 1e-12 ? g.normalized() : Eigen::Vector3d::UnitX();
    t.freq = std::pow(2.0, k);
    t.amp = std::pow(2.0, -holder_exponent * k);
    t.phase = rng.uniform(phase_stream, k, 0.0, 2.0 * kPi);
    norm += t.amp;
    terms->push_back(t);
  }
  return [terms, eps, norm](double, const Eigen::Vector3d& x) {
    double w = 0.0;
    for (const auto& t : *terms)
      w += t.amp * std::cos(t.freq * t.dir.dot(x) + t.phase);
    return 1.0 + eps * w / norm;
  };
}

W01161Report w01161_scan(const ModulatedLandauCoefficients& coeffs,
                         const Eigen::Vector3d& x0, const Eigen::Vector3d& v0,
                         const std::vector<double>& t0_list, double alpha,
                         int nt, int nx, int nv, Parallelism par) {
  if (t0_list.size() < 2)
    throw std::invalid_argument("w01161_scan: need >= 2 base times");
  W01161Report rep;
  std::vector<double> logt, logs;
  for (double t0 : t0_list) {
    Eigen::VectorXd x0v = x0, v0v = v0;
    const ScalingFrame frame =
        make_scaling_frame(KineticPoint(t0, x0v, v0v), coeffs.params().gamma);
    const TransformedCoefficients tc =
        transformed_coefficients(coeffs, frame, nt, nx, nv, par);
    const KineticCylinder q34(0.75, KineticPoint::origin(3));
    SeminormSpec aniso{SeminormSpec::Kind::holder_aniso, alpha, 1.0, 0.0,
                       20000};
    double semi = 0.0;
    for (const auto& comp : tc.abar_components)
      semi = std::max(semi,
                      estimate_seminorm(comp, aniso, q34, 2026, par).value);
    rep.rows.push_back({t0, semi});
    logt.push_back(std::log(t0));
    logs.push_back(std::log(std::max(semi, 1e-300)));
  }
  rep.slope = fit_slope(logt, logs);
  return rep;
}

}  // namespace kfp
