#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace kfp {

// Time-dependent diffusion coefficient a(t), uniformly elliptic:
// (1/lambda) I <= a(t) <= lambda I. Piecewise-constant profiles integrate
// exactly; smooth profiles go through adaptive quadrature.
class TimeMatrixProfile {
 public:
  enum class Kind { constant, piecewise, smooth, seeded };

  static TimeMatrixProfile constant(Eigen::MatrixXd a, double lambda);
  // matrices[k] applies on [breakpoints[k-1], breakpoints[k]) with the first
  // segment starting at -inf and the last extending to +inf.
  static TimeMatrixProfile piecewise(std::vector<double> breakpoints,
                                     std::vector<Eigen::MatrixXd> matrices,
                                     double lambda);
  // Smooth a(t); optional analytic da/dt used by second time derivatives.
  static TimeMatrixProfile smooth(
      std::function<Eigen::MatrixXd(double)> fn, int dim, double lambda,
      std::function<Eigen::MatrixXd(double)> dfn = nullptr);
  // Random piecewise profile: `segments` segments on [0, t_max], eigenvalues
  // log-uniform in [1/lambda, lambda], random orthogonal eigenbases (the
  // segment matrices generally do not commute).
  static TimeMatrixProfile seeded_random(std::uint64_t seed, int segments,
                                         int dim, double lambda,
                                         double t_max = 1.0);

  static TimeMatrixProfile from_json(const std::string& text);
  std::string to_json() const;

  Eigen::MatrixXd value(double t) const;
  Eigen::MatrixXd derivative(double t) const;  // da/dt where defined

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  bool exact_integrals() const { return kind_ != Kind::smooth; }
  bool constant_in_time() const;
  bool has_derivative() const { return kind_ != Kind::smooth || bool(dfn_); }

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Eigen::MatrixXd>& matrices() const { return matrices_; }

  // Distance from t to the nearest discontinuity (+inf when none).
  double breakpoint_distance(double t) const;

  // Exact closed-form segment integrals of s^i a(s) over [0, t], i = 0,1,2.
  // Only valid for piecewise-exact profiles.
  Eigen::MatrixXd moment_integral_exact(int i, double t) const;

 private:
  TimeMatrixProfile() = default;
  void validate() const;

  Kind kind_ = Kind::constant;
  int dim_ = 0;
  double lambda_ = 1.0;
  std::vector<double> breakpoints_;
  std::vector<Eigen::MatrixXd> matrices_;
  std::function<Eigen::MatrixXd(double)> fn_;
  std::function<Eigen::MatrixXd(double)> dfn_;
  // provenance for to_json round-trips of seeded profiles
  std::uint64_t seed_ = 0;
  int segments_ = 0;
  double t_max_ = 1.0;
};

}  // namespace kfp
