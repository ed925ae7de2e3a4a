#pragma once

#include <Eigen/Dense>
#include <vector>

#include "kfp/parallel.hpp"
#include "kfp/profile.hpp"

namespace kfp {

// Moment matrices A_i(t) = int_0^t s^i a(s) ds together with
// P = A2 - A1 A0^{-1} A1 and M = t I - A0^{-1} A1.
struct KineticMatrices {
  double t = 0.0;
  Eigen::MatrixXd A0, A1, A2;
  Eigen::MatrixXd P;
  Eigen::MatrixXd M;
  double quadrature_error = 0.0;
};

// Exact for piecewise-constant profiles; adaptive Gauss-Legendre otherwise.
KineticMatrices assemble_matrices(const TimeMatrixProfile& profile, double t,
                                  double tol = 1e-10);

// Symmetric positive definite inverse via eigendecomposition; throws if the
// smallest eigenvalue is not positive.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what);

struct BoundSample {
  double t;
  int direction;
  double p_ratio;        // w.Pw / t^3
  double a_ratio[3];     // |A_i w| / t^{i+1}
  double m_ratio;        // |Mw| / t
};

struct BoundReport {
  std::vector<BoundSample> samples;
  double p_ratio_min = 0.0, p_ratio_max = 0.0;
  double m_ratio_max = 0.0;
  double a_ratio_min[3] = {0, 0, 0}, a_ratio_max[3] = {0, 0, 0};
  // log-log slope of w.P(t)w against t, one entry per direction
  std::vector<double> p_slopes;
  double lambda = 1.0;
  bool violation = false;  // p_ratio above lambda or not strictly positive
};

BoundReport verify_matrix_bounds(const TimeMatrixProfile& profile,
                                 const std::vector<double>& times,
                                 const std::vector<Eigen::VectorXd>& directions,
                                 Parallelism par = {});

struct DynamicsSample {
  double t;
  double fd_error_h;    // max entrywise |dP/dt - M^T a M| at step h
  double fd_error_h2;   // same at step h/2
  double min_eigenvalue;  // of M^T a M
};

struct DynamicsReport {
  std::vector<DynamicsSample> samples;
  double max_fd_error = 0.0;
  double min_eigenvalue = 0.0;
  bool psd_ok = true;        // min eigenvalue >= -1e-10
  bool richardson_ok = true;  // halving the step cuts the error ~4x
};

// Finite-difference check of P' = M^T a M. Times within the stencil width of
// a breakpoint are rejected.
DynamicsReport verify_p_dynamics(const TimeMatrixProfile& profile,
                                 const std::vector<double>& times,
                                 double h = 1e-4);

}  // namespace kfp
