#include "kfp/moments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kfp/detail/lean_gamma.hpp"
#include "kfp/quadrature.hpp"
#include "kfp/rng.hpp"

namespace kfp {

double MomentSpec::predicted_exponent() const {
  int na = 0, nb = 0;
  for (int k : alpha) na += k;
  for (int k : beta) nb += k;
  return -(2.0 * j + na + 3.0 * nb) / 2.0 + (3.0 * r + s) / 2.0;
}

namespace {

struct LeanKernel : detail::LeanGamma {
  detail::CompiledPoly poly;

  double derivative_abs(const double* x, const double* v) const {
    double u[8];
    for (int i = 0; i < d; ++i) {
      u[i] = x[i];
      u[d + i] = v[i];
    }
    return std::abs(poly.eval(u) * gamma(x, v));
  }
};

struct AxisNodes {
  std::vector<double> x;
  std::vector<double> w;
};

// Composite Gauss-Legendre panels graded by the Gaussian standard deviation;
// `margin` stretches the grading to absorb shift offsets.
AxisNodes sigma_panel_axis(double sigma, double margin, double tail_sigmas,
                           int nodes_per_panel) {
  static const double grade[] = {1, 2, 3, 4, 6, 8, 12};
  std::vector<double> edges;
  edges.push_back(0.0);
  for (double e : grade) {
    const double scaled = (e / 12.0) * tail_sigmas;
    edges.push_back(scaled * sigma + margin * e / 12.0);
  }
  AxisNodes out;
  std::vector<double> xs, ws;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    gauss_legendre_on(nodes_per_panel, edges[k], edges[k + 1], xs, ws);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out.x.push_back(xs[i]);
      out.w.push_back(ws[i]);
      out.x.push_back(-xs[i]);
      out.w.push_back(ws[i]);
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> ball_points(int count, int dim, double radius,
                                         int halton_offset) {
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd p(dim);
    if (dim == 1) {
      p(0) = radius * (2.0 * halton(i, halton_offset) - 1.0);
    } else if (dim == 2) {
      const double r = radius * std::sqrt(halton(i, halton_offset));
      const double th = 2.0 * M_PI * halton(i, halton_offset + 1);
      p << r * std::cos(th), r * std::sin(th);
    } else {
      const double r = radius * std::cbrt(halton(i, halton_offset));
      const double mu = 2.0 * halton(i, halton_offset + 1) - 1.0;
      const double ph = 2.0 * M_PI * halton(i, halton_offset + 2);
      const double sq = std::sqrt(std::max(0.0, 1.0 - mu * mu));
      p << r * sq * std::cos(ph), r * sq * std::sin(ph), r * mu;
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().maxCoeff();
}

struct TensorGrid {
  std::vector<AxisNodes> axes;

  std::int64_t size() const {
    std::int64_t n = 1;
    for (const auto& a : axes) n *= static_cast<std::int64_t>(a.x.size());
    return n;
  }
  void decode(std::int64_t idx, double* coord, double& weight) const {
    weight = 1.0;
    for (int k = static_cast<int>(axes.size()) - 1; k >= 0; --k) {
      const auto n = static_cast<std::int64_t>(axes[k].x.size());
      const auto i = idx % n;
      idx /= n;
      coord[k] = axes[k].x[static_cast<std::size_t>(i)];
      weight *= axes[k].w[static_cast<std::size_t>(i)];
    }
  }
};

}  // namespace

MomentResult moment_integral(const TimeMatrixProfile& profile, double t,
                             const MomentSpec& spec,
                             const QuadratureBudget& budget, Parallelism par) {
  if (!(t > 0.0))
    throw std::invalid_argument("moment_integral: t must be > 0");
  const int d = profile.dim();
  std::vector<int> alpha = spec.alpha.empty() ? std::vector<int>(d, 0) : spec.alpha;
  std::vector<int> beta = spec.beta.empty() ? std::vector<int>(d, 0) : spec.beta;
  const DerivativeKernel dk(profile, t, spec.j, alpha, beta);
  const KernelContext& ctx = dk.context();

  LeanKernel lean;
  lean.load(ctx);
  lean.poly = detail::compile(dk.polynomial());

  const double sigma_v = std::sqrt(2.0 * max_eigenvalue(ctx.km.A0));
  const double sigma_q = std::sqrt(2.0 * max_eigenvalue(ctx.km.P));

  // Derivative-free unweighted-in-x moments factor over the sheared
  // coordinates q = x - Wv and v; that turns a 2d-dimensional product grid
  // into two d-dimensional ones, which is what makes d = 2 affordable.
  const bool unit_poly = spec.j == 0 &&
                         std::all_of(alpha.begin(), alpha.end(),
                                     [](int k) { return k == 0; }) &&
                         std::all_of(beta.begin(), beta.end(),
                                     [](int k) { return k == 0; });
  if (unit_poly && spec.r == 0.0 && !spec.shift_max && d >= 2) {
    MomentResult result;
    double prev = 0.0;
    bool have_prev = false;
    for (int level = 0; level <= budget.max_refinements; ++level) {
      const int npp = budget.nodes_per_panel << level;
      TensorGrid qgrid, vgrid;
      for (int i = 0; i < d; ++i) {
        qgrid.axes.push_back(
            sigma_panel_axis(sigma_q, 0.0, budget.tail_sigmas, npp));
        vgrid.axes.push_back(
            sigma_panel_axis(sigma_v, 0.0, budget.tail_sigmas, npp));
      }
      const std::int64_t evals = qgrid.size() + vgrid.size();
      if (result.evaluations + evals > budget.max_evals)
        throw std::runtime_error(
            "moment_integral: evaluation budget exhausted before tolerance");
      const double iq = blocked_sum(
          qgrid.size(),
          [&](std::int64_t idx) {
            double q[3] = {0, 0, 0};
            double w;
            qgrid.decode(idx, q, w);
            double ex = 0.0;
            for (int i = 0; i < d; ++i)
              for (int k = 0; k < d; ++k)
                ex += q[i] * lean.p_inv[i * d + k] * q[k];
            return w * std::exp(-0.25 * ex);
          },
          par);
      const double iv = blocked_sum(
          vgrid.size(),
          [&](std::int64_t idx) {
            double v[3] = {0, 0, 0};
            double w;
            vgrid.decode(idx, v, w);
            double ev = 0.0, nv = 0.0;
            for (int i = 0; i < d; ++i) {
              nv += v[i] * v[i];
              for (int k = 0; k < d; ++k)
                ev += v[i] * lean.a0_inv[i * d + k] * v[k];
            }
            double f = std::exp(-0.25 * ev);
            if (spec.s != 0.0) f *= std::pow(std::sqrt(nv), spec.s);
            return w * f;
          },
          par);
      const double value = std::exp(lean.log_norm) * iq * iv;
      result.evaluations += evals;
      if (have_prev) {
        result.error_estimate = std::abs(value - prev);
        result.value = value;
        if (result.error_estimate <=
            budget.rel_tol * std::max(std::abs(value), 1e-300))
          return result;
      } else {
        result.value = value;
      }
      prev = value;
      have_prev = true;
    }
    return result;
  }

  const double shift_norm = ctx.shift.norm();
  double margin_v = 0.0, margin_q = 0.0;
  std::vector<Eigen::VectorXd> shifts_x, shifts_v;
  if (spec.shift_max) {
    const double r2 = std::pow(t / 2.0, 3);
    const double r3 = t / 2.0;
    margin_v = r3;
    margin_q = r2 + shift_norm * r3;
    shifts_x = ball_points(budget.shift_samples, d, r2, 0);
    shifts_v = ball_points(budget.shift_samples, d, r3, 3);
  }

  MomentResult result;
  double prev = 0.0;
  bool have_prev = false;
  for (int level = 0; level <= budget.max_refinements; ++level) {
    const int npp = budget.nodes_per_panel << level;
    TensorGrid grid;
    for (int i = 0; i < d; ++i)
      grid.axes.push_back(
          sigma_panel_axis(sigma_q, margin_q, budget.tail_sigmas, npp));
    for (int i = 0; i < d; ++i)
      grid.axes.push_back(
          sigma_panel_axis(sigma_v, margin_v, budget.tail_sigmas, npp));
    const std::int64_t n = grid.size();
    const std::int64_t evals =
        n * (spec.shift_max ? budget.shift_samples : 1);
    if (result.evaluations + evals > budget.max_evals) {
      if (have_prev && result.error_estimate <=
                           budget.rel_tol * std::max(std::abs(prev), 1e-300))
        break;
      throw std::runtime_error(
          "moment_integral: evaluation budget exhausted before tolerance");
    }

    const double value = blocked_sum(
        n,
        [&](std::int64_t idx) {
          double coord[6] = {0, 0, 0, 0, 0, 0};
          double w;
          grid.decode(idx, coord, w);
          double x[3] = {0, 0, 0}, v[3] = {0, 0, 0};
          for (int i = 0; i < d; ++i) {
            v[i] = coord[d + i];
            double xi = coord[i];
            for (int k = 0; k < d; ++k)
              xi += lean.shift[i * d + k] * v[k];
            x[i] = xi;
          }
          double f;
          if (!spec.shift_max) {
            f = lean.derivative_abs(x, v);
          } else {
            f = 0.0;
            double xs[3], vs[3];
            for (std::size_t m = 0; m < shifts_x.size(); ++m) {
              for (int i = 0; i < d; ++i) {
                xs[i] = x[i] + shifts_x[m](i);
                vs[i] = v[i] + shifts_v[m](i);
              }
              f = std::max(f, lean.derivative_abs(xs, vs));
            }
          }
          if (spec.r != 0.0 || spec.s != 0.0) {
            double nx = 0.0, nv = 0.0;
            for (int i = 0; i < d; ++i) {
              nx += x[i] * x[i];
              nv += v[i] * v[i];
            }
            if (spec.r != 0.0) f *= std::pow(std::sqrt(nx), spec.r);
            if (spec.s != 0.0) f *= std::pow(std::sqrt(nv), spec.s);
          }
          return w * f;
        },
        par);

    result.evaluations += evals;
    if (have_prev) {
      result.error_estimate = std::abs(value - prev);
      result.value = value;
      if (result.error_estimate <=
          budget.rel_tol * std::max(std::abs(value), 1e-300))
        return result;
    } else {
      result.value = value;
    }
    prev = value;
    have_prev = true;
  }
  return result;
}

ScalingReport moment_scaling_scan(const TimeMatrixProfile& profile,
                                  const std::vector<MomentSpec>& specs,
                                  const std::vector<double>& times,
                                  const QuadratureBudget& budget,
                                  Parallelism par) {
  if (times.size() < 2)
    throw std::invalid_argument("moment_scaling_scan: need >= 2 times");
  const double decades =
      std::log10(*std::max_element(times.begin(), times.end()) /
                 *std::min_element(times.begin(), times.end()));
  if (decades < 2.0 - 1e-9)
    throw std::invalid_argument(
        "moment_scaling_scan: times must span at least two decades");

  ScalingReport rep;
  for (const auto& spec : specs) {
    std::vector<double> logt, logv;
    for (double t : times) {
      const MomentResult r = moment_integral(profile, t, spec, budget, par);
      rep.rows.push_back({spec.id, t, r.value, r.error_estimate});
      logt.push_back(std::log(t));
      logv.push_back(std::log(std::max(r.value, 1e-300)));
    }
    ScalingFit fit;
    fit.spec_id = spec.id;
    fit.slope = fit_slope(logt, logv);
    fit.predicted = spec.predicted_exponent();
    fit.deviation = fit.slope - fit.predicted;
    fit.flagged = std::abs(fit.deviation) > 0.1;
    rep.fits.push_back(fit);
  }
  return rep;
}

ChapmanKolmogorovReport chapman_kolmogorov_check(
    const TimeMatrixProfile& profile, double s, double t,
    const std::vector<KineticPoint>& sample, int nodes_per_axis,
    Parallelism par) {
  if (!profile.constant_in_time())
    throw std::invalid_argument(
        "chapman_kolmogorov_check: profile must be constant in time");
  if (!(s > 0.0 && t > 0.0))
    throw std::invalid_argument("chapman_kolmogorov_check: s, t must be > 0");
  const int d = profile.dim();

  const KernelContext ctx_s = make_kernel_context(profile, s);
  const KernelContext ctx_t = make_kernel_context(profile, t);
  const KernelContext ctx_st = make_kernel_context(profile, s + t);

  // The integrand is an entire Gaussian, so a uniform midpoint grid over a
  // box sized to the product support converges spectrally in the node count.
  const double sx_s = std::sqrt(2.0 * max_eigenvalue(ctx_s.km.P));
  const double sx_t = std::sqrt(2.0 * max_eigenvalue(ctx_t.km.P));
  const double sv_s = std::sqrt(2.0 * max_eigenvalue(ctx_s.km.A0));
  const double sv_t = std::sqrt(2.0 * max_eigenvalue(ctx_t.km.A0));
  const double ws = ctx_s.shift.cwiseAbs().maxCoeff();
  const double wt = ctx_t.shift.cwiseAbs().maxCoeff();
  const double tail = 10.0;

  ChapmanKolmogorovReport rep;
  for (const auto& z : sample) {
    if (z.dim() != d)
      throw std::invalid_argument("chapman_kolmogorov_check: dim mismatch");
    const double direct = eval_kernel(ctx_st, z.x, z.v).value;

    // vtilde box: both Gamma_s(., vtilde) and Gamma_t(., z.v - vtilde) decay
    double vlo[3], vhi[3];
    bool empty = false;
    for (int i = 0; i < d; ++i) {
      vlo[i] = std::max(-tail * sv_s, z.v(i) - tail * sv_t);
      vhi[i] = std::min(tail * sv_s, z.v(i) + tail * sv_t);
      if (vlo[i] >= vhi[i]) empty = true;
    }
    // xtilde box: Gamma_s keeps xtilde near W_s vtilde; Gamma_t keeps it
    // near z.x - t vtilde - W_t (z.v - vtilde); both centers are affine in
    // vtilde, so their ranges over the vtilde box are intervals
    double xlo[3], xhi[3];
    for (int i = 0; i < d && !empty; ++i) {
      const double vmag = std::max(std::abs(vlo[i]), std::abs(vhi[i]));
      const double s_lo = -ws * vmag - tail * sx_s;
      const double s_hi = ws * vmag + tail * sx_s;
      const double span =
          (t + wt) * vmag + wt * std::abs(z.v(i)) + tail * sx_t;
      const double t_lo = z.x(i) - span;
      const double t_hi = z.x(i) + span;
      xlo[i] = std::max(s_lo, t_lo);
      xhi[i] = std::min(s_hi, t_hi);
      if (xlo[i] >= xhi[i]) empty = true;
    }

    double convolved = 0.0;
    if (!empty) {
      TensorGrid grid;
      for (int i = 0; i < d; ++i) {
        AxisNodes ax;
        const double h = (xhi[i] - xlo[i]) / nodes_per_axis;
        for (int k = 0; k < nodes_per_axis; ++k) {
          ax.x.push_back(xlo[i] + (k + 0.5) * h);
          ax.w.push_back(h);
        }
        grid.axes.push_back(std::move(ax));
      }
      for (int i = 0; i < d; ++i) {
        AxisNodes ax;
        const double h = (vhi[i] - vlo[i]) / nodes_per_axis;
        for (int k = 0; k < nodes_per_axis; ++k) {
          ax.x.push_back(vlo[i] + (k + 0.5) * h);
          ax.w.push_back(h);
        }
        grid.axes.push_back(std::move(ax));
      }
      convolved = blocked_sum(
          grid.size(),
          [&](std::int64_t idx) {
            double coord[6] = {0, 0, 0, 0, 0, 0};
            double w;
            grid.decode(idx, coord, w);
            Eigen::VectorXd xt(d), vt(d);
            for (int i = 0; i < d; ++i) {
              xt(i) = coord[i];
              vt(i) = coord[d + i];
            }
            const double gs = eval_kernel(ctx_s, xt, vt).value;
            if (gs == 0.0) return 0.0;
            const Eigen::VectorXd xarg = z.x - xt - t * vt;
            const Eigen::VectorXd varg = z.v - vt;
            return w * gs * eval_kernel(ctx_t, xarg, varg).value;
          },
          par);
    }

    ChapmanKolmogorovPoint pt;
    pt.direct = direct;
    pt.convolved = convolved;
    pt.skipped = std::abs(direct) < 1e-30 && std::abs(convolved) < 1e-30;
    pt.rel_error =
        pt.skipped ? 0.0
                   : std::abs(convolved - direct) /
                         std::max({std::abs(direct), std::abs(convolved),
                                   1e-300});
    rep.max_rel_error = std::max(rep.max_rel_error, pt.rel_error);
    rep.points.push_back(pt);
  }
  return rep;
}

}  // namespace kfp
