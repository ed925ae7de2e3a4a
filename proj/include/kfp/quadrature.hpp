#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace kfp {

// Gauss-Legendre nodes/weights on [-1, 1], cached by order.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussLegendre& gauss_legendre(int n);

// Nodes/weights mapped to [a, b].
void gauss_legendre_on(int n, double a, double b, std::vector<double>& x,
                       std::vector<double>& w);

// Adaptive composite Gauss-Legendre for matrix-valued integrands: intervals
// are bisected until the GL(m) vs two-half-GL(m) discrepancy is below tol.
struct MatrixQuadResult {
  Eigen::MatrixXd value;
  double error_estimate = 0.0;
  long evaluations = 0;
};

MatrixQuadResult integrate_matrix_adaptive(
    const std::function<Eigen::MatrixXd(double)>& f, double a, double b,
    double tol, int order = 15, int max_depth = 40);

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kfp
