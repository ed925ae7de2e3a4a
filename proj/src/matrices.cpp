#include "kfp/matrices.hpp"

#include <cmath>
#include <stdexcept>

#include "kfp/quadrature.hpp"

namespace kfp {

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error(std::string(what) +
                             ": matrix unexpectedly not positive definite");
  return es.eigenvectors() *
         es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

KineticMatrices assemble_matrices(const TimeMatrixProfile& profile, double t,
                                  double tol) {
  if (!(t > 0.0))
    throw std::invalid_argument("assemble_matrices: t must be > 0");
  KineticMatrices km;
  km.t = t;
  if (profile.exact_integrals()) {
    km.A0 = profile.moment_integral_exact(0, t);
    km.A1 = profile.moment_integral_exact(1, t);
    km.A2 = profile.moment_integral_exact(2, t);
  } else {
    for (int i = 0; i < 3; ++i) {
      auto integrand = [&profile, i](double s) -> Eigen::MatrixXd {
        return std::pow(s, i) * profile.value(s);
      };
      // absolute tolerance scaled to the magnitude t^{i+1} of A_i
      MatrixQuadResult r = integrate_matrix_adaptive(
          integrand, 0.0, t, tol * std::pow(t, i + 1));
      Eigen::MatrixXd* dst[3] = {&km.A0, &km.A1, &km.A2};
      *dst[i] = 0.5 * (r.value + r.value.transpose());
      km.quadrature_error += r.error_estimate;
    }
  }
  const Eigen::MatrixXd a0inv = spd_inverse(km.A0, "assemble_matrices(A0)");
  km.P = km.A2 - km.A1 * a0inv * km.A1;
  km.P = 0.5 * (km.P + km.P.transpose());
  km.M = t * Eigen::MatrixXd::Identity(profile.dim(), profile.dim()) -
         a0inv * km.A1;
  return km;
}

BoundReport verify_matrix_bounds(const TimeMatrixProfile& profile,
                                 const std::vector<double>& times,
                                 const std::vector<Eigen::VectorXd>& directions,
                                 Parallelism par) {
  if (times.empty() || directions.empty())
    throw std::invalid_argument("verify_matrix_bounds: empty times or directions");
  for (const auto& w : directions)
    if (std::abs(w.norm() - 1.0) > 1e-12)
      throw std::invalid_argument("verify_matrix_bounds: directions must be unit");

  const std::size_t nt = times.size();
  const std::size_t nw = directions.size();
  std::vector<KineticMatrices> km(nt);
  parallel_for(
      static_cast<std::int64_t>(nt),
      [&](std::int64_t i) { km[i] = assemble_matrices(profile, times[i]); },
      par);

  BoundReport rep;
  rep.lambda = profile.lambda();
  rep.samples.resize(nt * nw);
  parallel_for(
      static_cast<std::int64_t>(nt * nw),
      [&](std::int64_t idx) {
        const std::size_t it = static_cast<std::size_t>(idx) / nw;
        const std::size_t iw = static_cast<std::size_t>(idx) % nw;
        const double t = times[it];
        const Eigen::VectorXd& w = directions[iw];
        BoundSample s;
        s.t = t;
        s.direction = static_cast<int>(iw);
        s.p_ratio = w.dot(km[it].P * w) / (t * t * t);
        const Eigen::MatrixXd* As[3] = {&km[it].A0, &km[it].A1, &km[it].A2};
        for (int i = 0; i < 3; ++i)
          s.a_ratio[i] = (*As[i] * w).norm() / std::pow(t, i + 1);
        s.m_ratio = (km[it].M * w).norm() / t;
        rep.samples[idx] = s;
      },
      par);

  rep.p_ratio_min = rep.p_ratio_max = rep.samples[0].p_ratio;
  for (int i = 0; i < 3; ++i)
    rep.a_ratio_min[i] = rep.a_ratio_max[i] = rep.samples[0].a_ratio[i];
  for (const auto& s : rep.samples) {
    rep.p_ratio_min = std::min(rep.p_ratio_min, s.p_ratio);
    rep.p_ratio_max = std::max(rep.p_ratio_max, s.p_ratio);
    rep.m_ratio_max = std::max(rep.m_ratio_max, s.m_ratio);
    for (int i = 0; i < 3; ++i) {
      rep.a_ratio_min[i] = std::min(rep.a_ratio_min[i], s.a_ratio[i]);
      rep.a_ratio_max[i] = std::max(rep.a_ratio_max[i], s.a_ratio[i]);
    }
  }
  rep.violation = !(rep.p_ratio_min > 0.0) || rep.p_ratio_max > rep.lambda;

  if (nt >= 2) {
    std::vector<double> logt(nt);
    for (std::size_t i = 0; i < nt; ++i) logt[i] = std::log(times[i]);
    for (std::size_t iw = 0; iw < nw; ++iw) {
      std::vector<double> logp(nt);
      for (std::size_t it = 0; it < nt; ++it)
        logp[it] = std::log(directions[iw].dot(km[it].P * directions[iw]));
      rep.p_slopes.push_back(fit_slope(logt, logp));
    }
  }
  return rep;
}

DynamicsReport verify_p_dynamics(const TimeMatrixProfile& profile,
                                 const std::vector<double>& times, double h) {
  DynamicsReport rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (double t : times) {
    if (profile.breakpoint_distance(t) <= h)
      throw std::invalid_argument(
          "verify_p_dynamics: time too close to a coefficient breakpoint");
    DynamicsSample s;
    s.t = t;
    const KineticMatrices km = assemble_matrices(profile, t);
    const Eigen::MatrixXd a = profile.value(t);
    const Eigen::MatrixXd mam = km.M.transpose() * a * km.M;

    auto fd = [&](double step) {
      const Eigen::MatrixXd pp = assemble_matrices(profile, t + step).P;
      const Eigen::MatrixXd pm = assemble_matrices(profile, t - step).P;
      return ((pp - pm) / (2.0 * step) - mam).cwiseAbs().maxCoeff();
    };
    s.fd_error_h = fd(h);
    s.fd_error_h2 = fd(0.5 * h);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 *
                                                      (mam + mam.transpose()));
    s.min_eigenvalue = es.eigenvalues().minCoeff();
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, s.min_eigenvalue);
    rep.max_fd_error = std::max(rep.max_fd_error, s.fd_error_h);
    // O(h^2) scheme: halving h should cut the error ~4x; allow slack for the
    // roundoff floor by only flagging clearly non-converging samples.
    const double floor = 1e-11 * std::max(1.0, mam.cwiseAbs().maxCoeff());
    if (s.fd_error_h > floor && s.fd_error_h2 > 0.5 * s.fd_error_h)
      rep.richardson_ok = false;
    rep.samples.push_back(s);
  }
  rep.psd_ok = rep.min_eigenvalue >= -1e-10;
  return rep;
}

}  // namespace kfp
