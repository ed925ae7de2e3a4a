#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "kfp/matrices.hpp"
#include "kfp/profile.hpp"

namespace kfp {

// Sparse polynomial in up to 8 variables; exponents are per-variable.
// Used to express derivatives of the Gaussian kernel as poly(x,v) * Gamma.
class MultiPoly {
 public:
  using Mono = std::array<std::uint8_t, 8>;

  explicit MultiPoly(int nvars = 0) : nvars_(nvars) {}
  static MultiPoly constant(int nvars, double c);
  static MultiPoly linear(int nvars, const Eigen::VectorXd& coef,
                          double c0 = 0.0);

  MultiPoly& operator+=(const MultiPoly& o);
  MultiPoly operator+(const MultiPoly& o) const;
  MultiPoly operator*(const MultiPoly& o) const;
  MultiPoly scaled(double s) const;
  MultiPoly derivative(int var) const;

  double eval(const double* u) const;
  int nvars() const { return nvars_; }
  std::size_t term_count() const { return terms_.size(); }
  const std::map<Mono, double>& terms() const { return terms_; }

 private:
  void add_term(const Mono& m, double c);
  int nvars_;
  std::map<Mono, double> terms_;
};

// Everything needed to evaluate Gamma_a and its derivatives at one time.
struct KernelContext {
  double t = 0.0;
  int d = 0;
  KineticMatrices km;
  Eigen::MatrixXd a;       // a(t)
  Eigen::MatrixXd a0_inv;
  Eigen::MatrixXd p_inv;
  Eigen::MatrixXd shift;   // W = t I - A1 A0^{-1}; kernel argument is x - W v
  double log_normalization = 0.0;
  Eigen::MatrixXd precision;  // H with Gamma = exp(log_norm - u.Hu/2), u=(x,v)
};

KernelContext make_kernel_context(const TimeMatrixProfile& profile, double t,
                                  double tol = 1e-10);

struct KernelEvaluation {
  double value = 0.0;
  double exponent_v = 0.0;        // v.A0^{-1}v / 4
  double exponent_x = 0.0;        // (x-Wv).P^{-1}(x-Wv) / 4
  double log_normalization = 0.0;
};

// Gamma_Id of the constant-identity coefficient; 0 for t <= 0.
double eval_kolmogorov(double t, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& v);

KernelEvaluation eval_kernel(const KernelContext& ctx,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& v);
KernelEvaluation eval_kernel(const TimeMatrixProfile& profile, double t,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& v);

// d/dt Gamma computed from the closed-form time derivative of the matrices
// (not through the equation). Exists for cross-checking the PDE identity.
double eval_kernel_dt_direct(const KernelContext& ctx,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& v);

// Time derivative of the precision data; used by second time derivatives and
// by eval_kernel_dt_direct.
struct KernelContextDt {
  Eigen::MatrixXd dprecision;
  double dlog_normalization = 0.0;
};
KernelContextDt kernel_context_dt(const KernelContext& ctx);

constexpr int kMaxDerivativeDepth = 5;  // |alpha| + 3|beta| + 2j

// dt^j dx^beta dv^alpha Gamma as polynomial * Gamma. Time derivatives reduce
// through dt Gamma = v.grad_x Gamma + Tr(a D_v^2 Gamma), valid a.e. in t.
class DerivativeKernel {
 public:
  DerivativeKernel(const TimeMatrixProfile& profile, double t, int j,
                   const std::vector<int>& alpha, const std::vector<int>& beta,
                   double tol = 1e-10);

  double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const;
  const KernelContext& context() const { return ctx_; }
  const MultiPoly& polynomial() const { return poly_; }

 private:
  KernelContext ctx_;
  MultiPoly poly_;
};

double eval_kernel_derivative(const TimeMatrixProfile& profile, double t,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& v, int j,
                              const std::vector<int>& alpha,
                              const std::vector<int>& beta);

}  // namespace kfp
