#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kfp/geometry.hpp"
#include "kfp/grid.hpp"
#include "kfp/parallel.hpp"
#include "kfp/solver.hpp"

namespace kfp {

// Sampled lower-bound estimators for the anisotropic continuity seminorms.
// Pairs always share the time slice; separations are capped strictly below
// 1/2 in both x and v, as in the space definitions.
struct SeminormSpec {
  enum class Kind {
    holder_aniso,   // |df| / (|dx|^(alpha/3) + |dv|^alpha)
    log_holder,     // |df| / (|dx|^(alpha/3) + log(1/|dv|)^(-theta))
    holder_x,       // x-pairs only, |df| / |dx|^alpha  (alpha used directly)
    holder_v,       // v-pairs only, |df| / |dv|^alpha
    log_holder_v,   // v-pairs only, |df| / log(1/|dv|)^(-theta)
    weighted_sup,   // sup <v>^n |f|
  };
  Kind kind = Kind::holder_aniso;
  double alpha = 0.5;
  double theta = 1.0;
  double weight_n = 0.0;
  std::int64_t pair_cap = 200000;  // budget for the random extra pairs
};

struct SeminormEstimate {
  double value = 0.0;
  KineticPoint arg_a, arg_b;  // attaining pair (equal for weighted_sup)
  std::int64_t pairs = 0;
};

SeminormEstimate estimate_seminorm(const GridField& f, const SeminormSpec& spec,
                                   const KineticCylinder& region,
                                   std::uint64_t seed = 2026,
                                   Parallelism par = {});

// sup |f| over the region's grid nodes
double sup_abs(const GridField& f, const KineticCylinder& region);

// Encloses every node of the field; convenience region.
KineticCylinder whole_grid_region(const GridField& f);

// Centered v-derivative fields (the v axes shrink by one node per side).
GridField first_v_derivative(const GridField& f, int axis);
GridField second_v_derivative(const GridField& f, int axis_i, int axis_j);

struct InterpolationRow {
  double eps;
  double lhs[4];
  double rhs[4];      // bracket evaluated with constant 1
  double constant[4]; // lhs / rhs
};

struct InterpolationReport {
  std::vector<InterpolationRow> rows;
  double max_constant = 0.0;
};

// The four interpolation inequalities between u, D_v u, D2_v u on Q_r.
InterpolationReport check_interpolation(const GridField& u, double alpha,
                                        const std::vector<double>& eps_list,
                                        const KineticCylinder& region,
                                        std::uint64_t seed = 2026);

struct LogInterpolationRow {
  double eps;
  double lhs;
  double rhs;
  double constant;
};

struct LogInterpolationReport {
  std::vector<LogInterpolationRow> rows;
  double max_constant = 0.0;
};

// ||D2_v u|| <= C ( log(1/eps)^theta / eps^2 [u]_log + eps^alpha [u]_{2,alpha} )
LogInterpolationReport check_log_interpolation(
    const GridField& u, double alpha, double theta,
    const std::vector<double>& eps_list, const KineticCylinder& region,
    std::uint64_t seed = 2026);

struct WeightInterpolationReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;
};

// [<v>^{(1-mu)k} phi]_{log^{-theta mu}} against
// ||phi||_{L^inf,k}^{1-mu} [phi]_{log^{-theta}}^mu + ||phi||_{L^inf,((1-mu)k-1)+}
WeightInterpolationReport check_weight_interpolation(const GridField& phi,
                                                     double k, double theta,
                                                     double mu,
                                                     std::uint64_t seed = 2026);

// One time-rough coefficient family sweep of the interior estimate:
// rho(L) = LHS / RHS with the (x,v)-seminorms of the coefficients pinned
// while the number of random time segments L varies.
struct SchauderConfig {
  std::vector<int> l_values{1, 4, 16, 64};
  double alpha = 0.6;
  double coeff_amplitude = 0.45;  // lambda = 2 window
  int nx = 48;
  int nv = 48;
  int saved_slices = 40;
  std::uint64_t seed = 1;
  double cfl_safety = 0.45;
  Parallelism par;
};

struct SchauderRow {
  int l_segments;
  double lhs;
  double rhs;
  double rho;
  double coeff_seminorm;
  double g_seminorm;
  double sup_f;
};

struct SchauderReport {
  std::vector<SchauderRow> rows;
  double rho_max_over_min = 0.0;
};

SchauderReport schauder_experiment(const SchauderConfig& config);

struct LogHolderScalingReport {
  double lhs = 0.0;        // [f_{z0}]_{log^{-theta/2}(Q_1)}
  double rhs = 0.0;        // [f]_{log^{-theta}(Q(z0))} * log(1/t0)^{-theta/2}
  double constant = 0.0;
};

// Empirical check of the log-Holder scaling bound; requires z0.t in (0, 1/2).
LogHolderScalingReport check_logholder_scaling(const GridField& f,
                                               const KineticPoint& z0,
                                               double theta, double gamma,
                                               std::uint64_t seed = 2026);

}  // namespace kfp
