#pragma once

#include <string>
#include <vector>

#include "kfp/geometry.hpp"
#include "kfp/kernel.hpp"
#include "kfp/parallel.hpp"

namespace kfp {

// Weighted integral of a kernel derivative:
//   int |dt^j dx^beta dv^alpha Gamma| |x|^r |v|^s dx dv,
// optionally maximized pointwise over shifts (0, xi2, xi3) in Q_{t/2}.
struct MomentSpec {
  int j = 0;
  std::vector<int> alpha;
  std::vector<int> beta;
  double r = 0.0;
  double s = 0.0;
  bool shift_max = false;
  std::string id;

  double predicted_exponent() const;
};

struct QuadratureBudget {
  int nodes_per_panel = 8;
  int max_refinements = 2;
  double rel_tol = 1e-5;
  long max_evals = 400000000;
  int shift_samples = 64;
  double tail_sigmas = 12.0;
};

struct MomentResult {
  double value = 0.0;
  double error_estimate = 0.0;
  long evaluations = 0;
};

MomentResult moment_integral(const TimeMatrixProfile& profile, double t,
                             const MomentSpec& spec,
                             const QuadratureBudget& budget = {},
                             Parallelism par = {});

struct ScalingRow {
  std::string spec_id;
  double t;
  double value;
  double error_estimate;
};

struct ScalingFit {
  std::string spec_id;
  double slope = 0.0;
  double predicted = 0.0;
  double deviation = 0.0;
  bool flagged = false;  // |deviation| > 0.1
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  std::vector<ScalingFit> fits;
};

// Fits log(moment) against log(t); times must span at least two decades.
ScalingReport moment_scaling_scan(const TimeMatrixProfile& profile,
                                  const std::vector<MomentSpec>& specs,
                                  const std::vector<double>& times,
                                  const QuadratureBudget& budget = {},
                                  Parallelism par = {});

struct ChapmanKolmogorovPoint {
  double direct;       // Gamma(s+t, z)
  double convolved;    // quadrature of Gamma(t, ztilde^{-1} o z) Gamma(s, ztilde)
  double rel_error;
  bool skipped;        // both sides below 1e-30
};

struct ChapmanKolmogorovReport {
  std::vector<ChapmanKolmogorovPoint> points;
  double max_rel_error = 0.0;
};

// Semigroup check; only meaningful (and only accepted) for profiles that are
// constant in time.
ChapmanKolmogorovReport chapman_kolmogorov_check(
    const TimeMatrixProfile& profile, double s, double t,
    const std::vector<KineticPoint>& sample, int nodes_per_axis = 128,
    Parallelism par = {});

}  // namespace kfp
