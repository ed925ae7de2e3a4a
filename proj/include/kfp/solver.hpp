#pragma once

#include <functional>
#include <optional>

#include "kfp/grid.hpp"
#include "kfp/kernel.hpp"
#include "kfp/parallel.hpp"
#include "kfp/profile.hpp"

namespace kfp {

// Variable coefficients of (dt + v.grad_x) f = Tr(a D_v^2 f) + c f + g,
// non-divergence form. An optional drift b.grad_v f is folded into g.
struct CoefficientField {
  int dim = 1;
  std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      a;
  std::function<double(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>
      c;  // null -> 0
  std::function<double(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>
      g;  // null -> 0
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      b;  // null -> no drift
  double lambda = 1.0;

  static CoefficientField from_profile(const TimeMatrixProfile& profile);
};

struct KernelSolveOptions {
  double mass_leak_tol = 1e-6;
  double boundary_decay_tol = 1e-12;
  int duhamel_substeps = 8;
  bool serial = false;  // reference path; identical output, no threads
  Parallelism par;
};

// Propagates f0 (one slice over (x,v)) to time t by Galilean convolution
// against the fundamental solution. Periodic axes are handled by summing
// kernel images.
GridField solve_ivp_kernel(const TimeMatrixProfile& profile,
                           const GridField& f0, double t,
                           const KernelSolveOptions& opts = {});

// Duhamel integral of a forcing trajectory up to t_end (midpoint rule in s,
// kernel quadrature in space); initial data zero.
GridField solve_forced_kernel(const TimeMatrixProfile& profile,
                              const GridField& forcing, double t_end,
                              const KernelSolveOptions& opts = {});

enum class Transport {
  upwind1,  // first-order conservative upwind; monotone
  muscl,    // minmod-limited second-order reconstruction
};

struct FdOptions {
  double cfl_safety = 0.5;
  Transport transport = Transport::upwind1;
  int save_every = 0;  // 0: keep only first/last slice in the trajectory
  bool serial = false;
  Parallelism par;
};

struct FdResult {
  GridField final_slice;
  GridField trajectory;  // time axis holds the saved slices
  double dt = 0.0;
  int steps = 0;
};

// Explicit Euler: first-order conservative upwind for v.grad_x, centered
// second differences (4-point cross for the mixed terms) for Tr(a D_v^2),
// a evaluated at cell centers.
FdResult solve_fd(const CoefficientField& coeffs, const GridField& f0,
                  double t_end, const FdOptions& opts = {});

struct ResidualReport {
  std::vector<double> max_per_slice;
  std::vector<double> l2_per_slice;
  double max_abs = 0.0;
};

// Discrete (dt + v.grad_x) f - Tr(a D_v^2 f) - c f - g on interior slices,
// all-centered stencils.
ResidualReport residual_check(const GridField& trajectory,
                              const CoefficientField& coeffs);

// Transport derivative (dt + v.grad_x) f with the solver's own stencil
// (forward Euler time difference, upwind in x); one slice shorter in time.
GridField transport_derivative_field(const GridField& trajectory);

}  // namespace kfp
