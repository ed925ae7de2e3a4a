#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kfp/geometry.hpp"
#include "kfp/grid.hpp"
#include "kfp/parallel.hpp"

namespace kfp {

// Soft-potential exponent and the two kernel constants (value irrelevant to
// the scalings; kept configurable, default 1).
struct LandauParams {
  double gamma = -2.0;
  double a_const = 1.0;
  double c_const = 1.0;

  void validate() const;
};

struct NondegeneracyWitness {
  double delta = 0.0;
  double r = 0.0;
  Eigen::Vector3d v_x = Eigen::Vector3d::Zero();
};

// Velocity density h(v) with a certified polynomial-decay bound
// |h(v)| <= linf_k / <v-center>^k.
class VelocityProfile {
 public:
  enum class Kind { maxwellian, indicator_ball, grid };

  // amplitude * exp(-|v-center|^2 / (2 temperature))
  static VelocityProfile maxwellian(double amplitude, double temperature,
                                    Eigen::Vector3d center, double decay_k);
  // amplitude * 1_{|v-center| <= radius}
  static VelocityProfile indicator_ball(double amplitude, double radius,
                                        Eigen::Vector3d center, double decay_k);
  static VelocityProfile from_grid(GridField samples, double decay_k,
                                   double linf_k);
  static VelocityProfile from_json(const std::string& text);

  double operator()(const Eigen::Vector3d& v) const;

  Kind kind() const { return kind_; }
  double decay_k() const { return decay_k_; }
  double linf_k() const { return linf_k_; }
  const Eigen::Vector3d& center() const { return center_; }
  bool radially_symmetric() const { return kind_ != Kind::grid; }
  // |h| <= eps outside the ball of this radius around center()
  double support_radius(double eps) const;
  double characteristic_width() const;  // angular-resolution scale

  std::optional<NondegeneracyWitness> witness;

 private:
  Kind kind_ = Kind::maxwellian;
  double amplitude_ = 1.0;
  double temperature_ = 1.0;
  double radius_ = 1.0;
  Eigen::Vector3d center_ = Eigen::Vector3d::Zero();
  GridField grid_;
  double decay_k_ = 6.0;
  double linf_k_ = 1.0;
};

struct LandauBudget {
  double inner_radius = 1e-4;   // analytic stub below this radius
  int radial_panels = 24;       // geometric panels on [inner_radius, 1]
  int tail_panels_per_octave = 2;
  int nodes_per_panel = 6;
  int angular_theta = 16;       // general (non-symmetric) path
  int angular_phi = 32;
  int mu_panels_base = 6;       // axisymmetric path
  int mu_panels_max = 96;
  double tail_eps = 1e-12;
};

struct LandauMatrixResult {
  Eigen::Matrix3d abar = Eigen::Matrix3d::Zero();
  double error_estimate = 0.0;
  // populated on the axisymmetric path
  double eig_parallel = 0.0;
  double eig_perp = 0.0;
};

struct LandauScalarResult {
  double cbar = 0.0;
  double error_estimate = 0.0;
};

// abar^h(v) = a_gamma int (Id - w w^T/|w|^2) |w|^{2+gamma} h(v-w) dw
LandauMatrixResult landau_abar(const LandauParams& params,
                               const VelocityProfile& h,
                               const Eigen::Vector3d& v,
                               const LandauBudget& budget = {});

// cbar^h(v) = c_gamma int |w|^gamma h(v-w) dw, exactly c_gamma h(v) at
// gamma = -3
LandauScalarResult landau_cbar(const LandauParams& params,
                               const VelocityProfile& h,
                               const Eigen::Vector3d& v,
                               const LandauBudget& budget = {});

struct EllipticityRow {
  double vnorm;
  double eig_parallel;
  double eig_perp_min;
  double eig_perp_max;
  double cbar;
};

struct EllipticityReport {
  std::vector<EllipticityRow> rows;
  double slope_parallel = 0.0;   // log eig vs log <v>
  double slope_perp = 0.0;
  double gamma = 0.0;
  bool cbar_nonnegative = true;
  bool upper_only = false;       // no nondegeneracy witness provided
  bool slopes_ok = false;        // within +-0.1 of gamma and 2+gamma
};

EllipticityReport verify_ellipticity_bounds(
    const LandauParams& params, const VelocityProfile& h,
    const std::vector<Eigen::Vector3d>& v_samples,
    const LandauBudget& budget = {}, Parallelism par = {});

// Kinetic change of variables of the scaled equation around z0.
struct ScalingFrame {
  KineticPoint z0;
  double gamma = 0.0;
  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  double r0 = 0.0;

  // z0 o (S z)_{r0}
  KineticPoint map(const KineticPoint& z) const;
};

ScalingFrame make_scaling_frame(const KineticPoint& z0, double gamma);

// f_{z0} sampled on the given axes over Q_1 by trilinear interpolation.
GridField rescale_field(const GridField& f, const ScalingFrame& frame,
                        const Axis& time, const std::vector<Axis>& x_axes,
                        const std::vector<Axis>& v_axes);

// Landau coefficients as a function of (t, x, v): an isotropic velocity
// profile scaled by a space-time modulation m, so abar^h = m(t,x) abar^base.
// Radial tables keep dense field sampling affordable.
class ModulatedLandauCoefficients {
 public:
  ModulatedLandauCoefficients(
      LandauParams params, VelocityProfile base,
      std::function<double(double, const Eigen::Vector3d&)> modulation,
      double rho_max, const LandauBudget& budget = {}, int table_size = 256);

  Eigen::Matrix3d abar(double t, const Eigen::Vector3d& x,
                       const Eigen::Vector3d& v) const;
  double cbar(double t, const Eigen::Vector3d& x,
              const Eigen::Vector3d& v) const;

  const LandauParams& params() const { return params_; }

 private:
  double table_lookup(const std::vector<double>& tab, double rho) const;

  LandauParams params_;
  VelocityProfile base_;
  std::function<double(double, const Eigen::Vector3d&)> modulation_;
  double rho_max_;
  double drho_;
  std::vector<double> eig_par_, eig_perp_, cbar_;
};

// Abar = S^{-1} abar S^{-1}, Cbar = r0^2 cbar at the mapped points, sampled
// over Q_1; components stored as separate fields (upper triangle order
// 00,01,02,11,12,22).
struct TransformedCoefficients {
  std::array<GridField, 6> abar_components;
  GridField cbar;
  double cond_max = 0.0;       // sup over nodes of cond(Abar)
  double cbar_weighted_sup = 0.0;  // sup Cbar <v0>^2 / min(1, t0)
};

TransformedCoefficients transformed_coefficients(
    const ModulatedLandauCoefficients& coeffs, const ScalingFrame& frame,
    int nt, int nx, int nv, Parallelism par = {});

// 1 + eps * W(x) with W a lacunary cosine sum whose Holder quotients of the
// given exponent stay of order one down to scale 2^{-levels}; |W| <= 1.
std::function<double(double, const Eigen::Vector3d&)> make_rough_x_modulation(
    double eps, double holder_exponent, int levels, std::uint64_t seed);

struct W01161Row {
  double t0;
  double seminorm;  // [Abar]_{C_x^{alpha/3} C_v^alpha (Q_{3/4})}
};

struct W01161Report {
  std::vector<W01161Row> rows;
  double slope = 0.0;  // log seminorm vs log t0; the bound predicts alpha/2
};

W01161Report w01161_scan(const ModulatedLandauCoefficients& coeffs,
                         const Eigen::Vector3d& x0, const Eigen::Vector3d& v0,
                         const std::vector<double>& t0_list, double alpha,
                         int nt, int nx, int nv, Parallelism par = {});

}  // namespace kfp
