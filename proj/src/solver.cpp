#include "kfp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kfp/detail/lean_gamma.hpp"

namespace kfp {

CoefficientField CoefficientField::from_profile(
    const TimeMatrixProfile& profile) {
  CoefficientField cf;
  cf.dim = profile.dim();
  cf.lambda = profile.lambda();
  cf.a = [profile](double t, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return profile.value(t);
  };
  return cf;
}

namespace {

double max_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().maxCoeff();
}

void require_phase_slice(const GridField& f, int d, const char* who) {
  if (f.dx() != d || f.dv() != d)
    throw std::invalid_argument(std::string(who) + ": field/profile dimension mismatch");
  for (const auto& a : f.x_axes)
    if (!(a.step > 0.0) || a.n < 2)
      throw std::invalid_argument(std::string(who) + ": bad x axis");
  for (const auto& a : f.v_axes)
    if (!(a.step > 0.0) || a.n < 2)
      throw std::invalid_argument(std::string(who) + ": bad v axis");
  if (!f.finite())
    throw std::invalid_argument(std::string(who) + ": non-finite samples");
}

// Per-node quadrature weight of the source grid (trapezoid on truncated
// axes, uniform on periodic ones), including the cell volume.
std::vector<double> source_weights(const GridField& f) {
  const std::int64_t n = f.slice_size();
  double cell = 1.0;
  for (const auto& a : f.x_axes) cell *= a.step;
  for (const auto& a : f.v_axes) cell *= a.step;
  std::vector<double> w(static_cast<std::size_t>(n), cell);
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t rem = i;
    for (int k = f.dv() - 1; k >= 0; --k) {
      const int ik = static_cast<int>(rem % f.v_axes[k].n);
      rem /= f.v_axes[k].n;
      if (f.boundary_v == Boundary::truncated_decay &&
          (ik == 0 || ik == f.v_axes[k].n - 1))
        w[static_cast<std::size_t>(i)] *= 0.5;
    }
    for (int k = f.dx() - 1; k >= 0; --k) {
      const int ik = static_cast<int>(rem % f.x_axes[k].n);
      rem /= f.x_axes[k].n;
      if (f.boundary_x == Boundary::truncated_decay &&
          (ik == 0 || ik == f.x_axes[k].n - 1))
        w[static_cast<std::size_t>(i)] *= 0.5;
    }
  }
  return w;
}

void check_boundary_decay(const GridField& f, double tol, const char* who) {
  const double scale = std::max(1.0, f.max_abs(0));
  const std::int64_t n = f.slice_size();
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t rem = i;
    bool border = false;
    for (int k = f.dv() - 1; k >= 0; --k) {
      const int ik = static_cast<int>(rem % f.v_axes[k].n);
      rem /= f.v_axes[k].n;
      if (f.boundary_v == Boundary::truncated_decay &&
          (ik == 0 || ik == f.v_axes[k].n - 1))
        border = true;
    }
    for (int k = f.dx() - 1; k >= 0; --k) {
      const int ik = static_cast<int>(rem % f.x_axes[k].n);
      rem /= f.x_axes[k].n;
      if (f.boundary_x == Boundary::truncated_decay &&
          (ik == 0 || ik == f.x_axes[k].n - 1))
        border = true;
    }
    if (border && std::abs(f.data[static_cast<std::size_t>(i)]) > tol * scale)
      throw std::invalid_argument(
          std::string(who) + ": initial data does not decay at the truncated boundary");
  }
}

struct ImageWindow {
  double period = 0.0;  // 0: no images
  int width = 0;
};

// Galilean-shifted convolution of one slice against Gamma(t); periodic axes
// sum kernel images so constants stay exact steady states.
GridField convolve_with_kernel(const KernelContext& ctx, const GridField& src,
                               double advect_time,
                               const KernelSolveOptions& opts) {
  const int d = ctx.d;
  GridField out = src;
  out.time = Axis{1, 0.0, 0.0};
  out.data.assign(src.data.size() / static_cast<std::size_t>(src.time.n), 0.0);

  detail::LeanGamma lean;
  lean.load(ctx);
  const double sigma_q = std::sqrt(2.0 * max_eigenvalue(ctx.km.P));
  const double sigma_v = std::sqrt(2.0 * max_eigenvalue(ctx.km.A0));

  std::vector<ImageWindow> xwin(d), vwin(d);
  for (int i = 0; i < d; ++i) {
    if (src.boundary_x == Boundary::periodic) {
      xwin[i].period = src.x_axes[i].step * src.x_axes[i].n;
      xwin[i].width =
          std::min(6, static_cast<int>(std::ceil(12.0 * sigma_q / xwin[i].period)) + 1);
    }
    if (src.boundary_v == Boundary::periodic) {
      vwin[i].period = src.v_axes[i].step * src.v_axes[i].n;
      vwin[i].width =
          std::min(6, static_cast<int>(std::ceil(12.0 * sigma_v / vwin[i].period)) + 1);
    }
  }

  const std::vector<double> weights = source_weights(src);
  const std::int64_t nsrc = src.slice_size();
  const std::int64_t ndst = out.slice_size();

  // precomputed source coordinates
  std::vector<double> sx(static_cast<std::size_t>(nsrc) * d);
  std::vector<double> sv(static_cast<std::size_t>(nsrc) * d);
  for (std::int64_t j = 0; j < nsrc; ++j) {
    std::int64_t rem = j;
    for (int k = d - 1; k >= 0; --k) {
      sv[static_cast<std::size_t>(j) * d + k] =
          src.v_axes[k].coord(static_cast<int>(rem % src.v_axes[k].n));
      rem /= src.v_axes[k].n;
    }
    for (int k = d - 1; k >= 0; --k) {
      sx[static_cast<std::size_t>(j) * d + k] =
          src.x_axes[k].coord(static_cast<int>(rem % src.x_axes[k].n));
      rem /= src.x_axes[k].n;
    }
  }

  const Parallelism par = opts.serial ? Parallelism{1} : opts.par;
  parallel_for(
      ndst,
      [&](std::int64_t i) {
        double tx[3], tv[3];
        std::int64_t rem = i;
        for (int k = d - 1; k >= 0; --k) {
          tv[k] = out.v_axes[k].coord(static_cast<int>(rem % out.v_axes[k].n));
          rem /= out.v_axes[k].n;
        }
        for (int k = d - 1; k >= 0; --k) {
          tx[k] = out.x_axes[k].coord(static_cast<int>(rem % out.x_axes[k].n));
          rem /= out.x_axes[k].n;
        }
        double acc = 0.0;
        for (std::int64_t j = 0; j < nsrc; ++j) {
          const double fj = src.data[static_cast<std::size_t>(j)];
          if (fj == 0.0) continue;
          const double* xj = &sx[static_cast<std::size_t>(j) * d];
          const double* vj = &sv[static_cast<std::size_t>(j) * d];
          double dxv[3], dvv[3];
          for (int k = 0; k < d; ++k) {
            dxv[k] = tx[k] - xj[k] - advect_time * vj[k];
            dvv[k] = tv[k] - vj[k];
          }
          // image sums; windows are product over axes
          double kernel_sum = 0.0;
          int counters[6] = {0, 0, 0, 0, 0, 0};
          int spans[6];
          for (int k = 0; k < d; ++k) {
            spans[k] = xwin[k].period > 0 ? 2 * xwin[k].width + 1 : 1;
            spans[d + k] = vwin[k].period > 0 ? 2 * vwin[k].width + 1 : 1;
          }
          bool more = true;
          while (more) {
            double ax[3], av[3];
            for (int k = 0; k < d; ++k) {
              const int off = counters[k] - (spans[k] - 1) / 2;
              ax[k] = dxv[k] + (xwin[k].period > 0 ? off * xwin[k].period : 0.0);
              const int offv = counters[d + k] - (spans[d + k] - 1) / 2;
              av[k] = dvv[k] + (vwin[k].period > 0 ? offv * vwin[k].period : 0.0);
            }
            kernel_sum += lean.gamma(ax, av);
            int c = 0;
            while (c < 2 * d) {
              if (++counters[c] < spans[c]) break;
              counters[c] = 0;
              ++c;
            }
            more = c < 2 * d;
          }
          acc += weights[static_cast<std::size_t>(j)] * fj * kernel_sum;
        }
        out.data[static_cast<std::size_t>(i)] = acc;
      },
      par);
  return out;
}

}  // namespace

GridField solve_ivp_kernel(const TimeMatrixProfile& profile,
                           const GridField& f0, double t,
                           const KernelSolveOptions& opts) {
  if (!(t > 0.0)) throw std::invalid_argument("solve_ivp_kernel: t must be > 0");
  require_phase_slice(f0, profile.dim(), "solve_ivp_kernel");
  check_boundary_decay(f0, opts.boundary_decay_tol, "solve_ivp_kernel");

  const KernelContext ctx = make_kernel_context(profile, t);
  GridField out = convolve_with_kernel(ctx, f0, t, opts);
  out.time = Axis{1, f0.time.origin + t, 0.0};

  const bool truncated = f0.boundary_x == Boundary::truncated_decay ||
                         f0.boundary_v == Boundary::truncated_decay;
  if (truncated) {
    const double m0 = f0.mass(0);
    const double m1 = out.mass(0);
    if (std::abs(m1 - m0) > opts.mass_leak_tol * std::max(1.0, std::abs(m0))) {
      std::ostringstream msg;
      msg << "solve_ivp_kernel: boundary mass leakage " << (m1 - m0)
          << " exceeds tolerance " << opts.mass_leak_tol;
      throw std::runtime_error(msg.str());
    }
  }
  return out;
}

GridField solve_forced_kernel(const TimeMatrixProfile& profile,
                              const GridField& forcing, double t_end,
                              const KernelSolveOptions& opts) {
  if (!(t_end > 0.0))
    throw std::invalid_argument("solve_forced_kernel: t_end must be > 0");
  require_phase_slice(forcing, profile.dim(), "solve_forced_kernel");

  const int nsub = std::max(1, opts.duhamel_substeps);
  const double ds = t_end / nsub;

  GridField acc;
  for (int k = 0; k < nsub; ++k) {
    const double s = (k + 0.5) * ds;
    // forcing slice at time s (linear interpolation between stored slices)
    GridField gs = forcing;
    gs.time = Axis{1, s, 0.0};
    gs.data.resize(static_cast<std::size_t>(forcing.slice_size()));
    if (forcing.time.n == 1) {
      std::copy(forcing.data.begin(),
                forcing.data.begin() + forcing.slice_size(), gs.data.begin());
    } else {
      const double pos = (s - forcing.time.origin) / forcing.time.step;
      const int k0 = std::min(forcing.time.n - 2,
                              std::max(0, static_cast<int>(std::floor(pos))));
      const double w1 = std::min(1.0, std::max(0.0, pos - k0));
      const std::int64_t ss = forcing.slice_size();
      for (std::int64_t i = 0; i < ss; ++i)
        gs.data[static_cast<std::size_t>(i)] =
            (1.0 - w1) * forcing.data[static_cast<std::size_t>(k0 * ss + i)] +
            w1 * forcing.data[static_cast<std::size_t>((k0 + 1) * ss + i)];
    }
    const double tau = t_end - s;
    const KernelContext ctx = make_kernel_context(profile, tau);
    GridField contrib = convolve_with_kernel(ctx, gs, tau, opts);
    if (k == 0) {
      acc = contrib;
      for (auto& v : acc.data) v *= ds;
    } else {
      for (std::size_t i = 0; i < acc.data.size(); ++i)
        acc.data[i] += ds * contrib.data[i];
    }
  }
  acc.time = Axis{1, t_end, 0.0};
  return acc;
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

struct StencilGeometry {
  int d = 0;
  int nx[2] = {1, 1}, nv[2] = {1, 1};
  double dx[2] = {1, 1}, dv[2] = {1, 1};
  bool px = false, pv = false;  // periodic?
  std::int64_t n = 0;
  std::int64_t stride_x[2] = {0, 0}, stride_v[2] = {0, 0};

  static StencilGeometry from(const GridField& f) {
    StencilGeometry g;
    g.d = f.dx();
    g.px = f.boundary_x == Boundary::periodic;
    g.pv = f.boundary_v == Boundary::periodic;
    for (int k = 0; k < g.d; ++k) {
      g.nx[k] = f.x_axes[k].n;
      g.dx[k] = f.x_axes[k].step;
      g.nv[k] = f.v_axes[k].n;
      g.dv[k] = f.v_axes[k].step;
    }
    std::int64_t stride = 1;
    for (int k = g.d - 1; k >= 0; --k) {
      g.stride_v[k] = stride;
      stride *= g.nv[k];
    }
    for (int k = g.d - 1; k >= 0; --k) {
      g.stride_x[k] = stride;
      stride *= g.nx[k];
    }
    g.n = stride;
    return g;
  }

  void decode(std::int64_t i, int* ix, int* iv) const {
    for (int k = 0; k < d; ++k) {
      ix[k] = static_cast<int>(i / stride_x[k]);
      i %= stride_x[k];
    }
    for (int k = 0; k < d; ++k) {
      iv[k] = static_cast<int>(i / stride_v[k]);
      i %= stride_v[k];
    }
  }

  // value of the neighbor shifted along one x axis; truncated => ghost 0
  double shift_x(const double* f, std::int64_t i, int ix, int axis,
                 int off) const {
    int j = ix + off;
    if (j < 0 || j >= nx[axis]) {
      if (!px) return 0.0;
      j = (j + nx[axis]) % nx[axis];
    }
    return f[i + static_cast<std::int64_t>(j - ix) * stride_x[axis]];
  }
  double shift_v(const double* f, std::int64_t i, int iv, int axis,
                 int off) const {
    int j = iv + off;
    if (j < 0 || j >= nv[axis]) {
      if (!pv) return 0.0;
      j = (j + nv[axis]) % nv[axis];
    }
    return f[i + static_cast<std::int64_t>(j - iv) * stride_v[axis]];
  }
};

// Coefficient tables for one time level.
struct StencilTables {
  std::vector<double> a;  // d*d entries per node, row-major
  std::vector<double> c;
  std::vector<double> g;
  std::vector<double> b;  // d entries per node; empty when no drift
};

void fill_tables(const CoefficientField& coeffs, const GridField& proto,
                 double t, StencilTables& tab, Parallelism par) {
  const StencilGeometry geo = StencilGeometry::from(proto);
  const int d = geo.d;
  tab.a.resize(static_cast<std::size_t>(geo.n) * d * d);
  tab.c.assign(static_cast<std::size_t>(geo.n), 0.0);
  tab.g.assign(static_cast<std::size_t>(geo.n), 0.0);
  if (coeffs.b) tab.b.assign(static_cast<std::size_t>(geo.n) * d, 0.0);
  parallel_for(
      geo.n,
      [&](std::int64_t i) {
        int ix[2], iv[2];
        geo.decode(i, ix, iv);
        Eigen::VectorXd x(d), v(d);
        for (int k = 0; k < d; ++k) {
          x(k) = proto.x_axes[k].coord(ix[k]);
          v(k) = proto.v_axes[k].coord(iv[k]);
        }
        const Eigen::MatrixXd av = coeffs.a(t, x, v);
        for (int r = 0; r < d; ++r)
          for (int cc = 0; cc < d; ++cc)
            tab.a[(static_cast<std::size_t>(i) * d + r) * d + cc] = av(r, cc);
        if (coeffs.c) tab.c[static_cast<std::size_t>(i)] = coeffs.c(t, x, v);
        if (coeffs.g) tab.g[static_cast<std::size_t>(i)] = coeffs.g(t, x, v);
        if (coeffs.b) {
          const Eigen::VectorXd bv = coeffs.b(t, x, v);
          for (int k = 0; k < d; ++k)
            tab.b[static_cast<std::size_t>(i) * d + k] = bv(k);
        }
      },
      par);
}

double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

// Single-node right-hand side shared by both step implementations.
double node_rhs(const StencilGeometry& geo, const GridField& proto,
                const StencilTables& tab, const double* f, std::int64_t i,
                const int* ix, const int* iv, Transport transport) {
  const int d = geo.d;
  const double fi = f[i];
  double rhs = 0.0;
  for (int k = 0; k < d; ++k) {
    const double vk = proto.v_axes[k].coord(iv[k]);
    if (vk == 0.0) continue;
    if (transport == Transport::upwind1) {
      double grad;
      if (vk >= 0.0)
        grad = (fi - geo.shift_x(f, i, ix[k], k, -1)) / geo.dx[k];
      else
        grad = (geo.shift_x(f, i, ix[k], k, +1) - fi) / geo.dx[k];
      rhs -= vk * grad;
    } else {
      // minmod-limited linear reconstruction at the two cell faces
      const double fm2 = geo.shift_x(f, i, ix[k], k, -2);
      const double fm1 = geo.shift_x(f, i, ix[k], k, -1);
      const double fp1 = geo.shift_x(f, i, ix[k], k, +1);
      const double fp2 = geo.shift_x(f, i, ix[k], k, +2);
      double flux_hi, flux_lo;
      if (vk >= 0.0) {
        flux_hi = vk * (fi + 0.5 * minmod(fi - fm1, fp1 - fi));
        flux_lo = vk * (fm1 + 0.5 * minmod(fm1 - fm2, fi - fm1));
      } else {
        flux_hi = vk * (fp1 - 0.5 * minmod(fp1 - fi, fp2 - fp1));
        flux_lo = vk * (fi - 0.5 * minmod(fi - fm1, fp1 - fi));
      }
      rhs -= (flux_hi - flux_lo) / geo.dx[k];
    }
  }
  // diffusion: centered second differences, 4-point cross for mixed terms
  const double* anode = &tab.a[static_cast<std::size_t>(i) * d * d];
  for (int k = 0; k < d; ++k) {
    const double fp = geo.shift_v(f, i, iv[k], k, +1);
    const double fm = geo.shift_v(f, i, iv[k], k, -1);
    rhs += anode[k * d + k] * (fp - 2.0 * fi + fm) / (geo.dv[k] * geo.dv[k]);
  }
  for (int k = 0; k < d; ++k)
    for (int l = k + 1; l < d; ++l) {
      // f at (iv_k +- 1, iv_l +- 1)
      auto corner = [&](int sk, int sl) {
        int jk = iv[k] + sk, jl = iv[l] + sl;
        std::int64_t idx = i;
        if (jk < 0 || jk >= geo.nv[k]) {
          if (!geo.pv) return 0.0;
          jk = (jk + geo.nv[k]) % geo.nv[k];
        }
        if (jl < 0 || jl >= geo.nv[l]) {
          if (!geo.pv) return 0.0;
          jl = (jl + geo.nv[l]) % geo.nv[l];
        }
        idx += static_cast<std::int64_t>(jk - iv[k]) * geo.stride_v[k];
        idx += static_cast<std::int64_t>(jl - iv[l]) * geo.stride_v[l];
        return f[idx];
      };
      const double cross = (corner(+1, +1) - corner(+1, -1) - corner(-1, +1) +
                            corner(-1, -1)) /
                           (4.0 * geo.dv[k] * geo.dv[l]);
      rhs += 2.0 * anode[k * d + l] * cross;
    }
  rhs += tab.c[static_cast<std::size_t>(i)] * fi +
         tab.g[static_cast<std::size_t>(i)];
  if (!tab.b.empty()) {
    for (int k = 0; k < d; ++k) {
      const double fp = geo.shift_v(f, i, iv[k], k, +1);
      const double fm = geo.shift_v(f, i, iv[k], k, -1);
      rhs += tab.b[static_cast<std::size_t>(i) * d + k] * (fp - fm) /
             (2.0 * geo.dv[k]);
    }
  }
  return rhs;
}

// Reference step: plain sequential sweep, kept as the ground truth the
// OpenMP path is compared against.
void fd_step_reference(const StencilGeometry& geo, const GridField& proto,
                       const StencilTables& tab, const double* in, double* out,
                       double dt, Transport transport) {
  int ix[2], iv[2];
  for (std::int64_t i = 0; i < geo.n; ++i) {
    geo.decode(i, ix, iv);
    out[i] = in[i] + dt * node_rhs(geo, proto, tab, in, i, ix, iv, transport);
  }
}

void fd_step_parallel(const StencilGeometry& geo, const GridField& proto,
                      const StencilTables& tab, const double* in, double* out,
                      double dt, Transport transport, Parallelism par) {
  parallel_for(
      geo.n,
      [&](std::int64_t i) {
        int ix[2], iv[2];
        geo.decode(i, ix, iv);
        out[i] = in[i] + dt * node_rhs(geo, proto, tab, in, i, ix, iv, transport);
      },
      par);
}

}  // namespace

FdResult solve_fd(const CoefficientField& coeffs, const GridField& f0,
                  double t_end, const FdOptions& opts) {
  const int d = coeffs.dim;
  if (d < 1 || d > 2)
    throw std::invalid_argument("solve_fd: supported phase dimensions are 1 and 2");
  require_phase_slice(f0, d, "solve_fd");
  if (!(coeffs.lambda >= 1.0))
    throw std::invalid_argument("solve_fd: lambda certificate must be >= 1");
  const double t0 = f0.time.origin;
  if (!(t_end > t0)) throw std::invalid_argument("solve_fd: t_end must exceed start time");

  const StencilGeometry geo = StencilGeometry::from(f0);
  double dt_transport = std::numeric_limits<double>::infinity();
  for (int k = 0; k < d; ++k) {
    double vmax = 0.0;
    for (int i = 0; i < geo.nv[k]; ++i)
      vmax = std::max(vmax, std::abs(f0.v_axes[k].coord(i)));
    if (vmax > 0.0)
      dt_transport = std::min(dt_transport, geo.dx[k] / vmax);
  }
  double dv_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < d; ++k) dv_min = std::min(dv_min, geo.dv[k]);
  const double dt_diffusion =
      dv_min * dv_min / (2.0 * d * coeffs.lambda);
  double dt = opts.cfl_safety * std::min(dt_transport, dt_diffusion);
  if (!(dt > 0.0) || !(opts.cfl_safety > 0.0) || !(opts.cfl_safety < 1.0))
    throw std::invalid_argument("solve_fd: CFL violation (bad step or safety factor)");

  int steps = static_cast<int>(std::ceil((t_end - t0) / dt));
  const int save_every = opts.save_every > 0 ? opts.save_every : steps;
  steps = ((steps + save_every - 1) / save_every) * save_every;
  dt = (t_end - t0) / steps;

  FdResult res;
  res.dt = dt;
  res.steps = steps;
  res.trajectory = f0;
  res.trajectory.time = Axis{steps / save_every + 1, t0, dt * save_every};
  res.trajectory.data.resize(
      static_cast<std::size_t>(res.trajectory.size()));
  std::copy(f0.data.begin(), f0.data.begin() + geo.n,
            res.trajectory.data.begin());

  std::vector<double> cur(f0.data.begin(), f0.data.begin() + geo.n);
  std::vector<double> next(static_cast<std::size_t>(geo.n));
  StencilTables tab;
  const Parallelism par = opts.serial ? Parallelism{1} : opts.par;

  for (int step = 0; step < steps; ++step) {
    const double t = t0 + step * dt;
    fill_tables(coeffs, f0, t, tab, par);
    if (opts.serial)
      fd_step_reference(geo, f0, tab, cur.data(), next.data(), dt,
                        opts.transport);
    else
      fd_step_parallel(geo, f0, tab, cur.data(), next.data(), dt,
                       opts.transport, par);
    cur.swap(next);

    bool ok = true;
    for (std::int64_t i = 0; i < geo.n; ++i)
      if (!std::isfinite(cur[static_cast<std::size_t>(i)])) {
        ok = false;
        break;
      }
    if (!ok) {
      std::ostringstream msg;
      msg << "solve_fd: non-finite value at step " << step + 1 << " (t="
          << t + dt << ", dt=" << dt << ")";
      throw std::runtime_error(msg.str());
    }
    if ((step + 1) % save_every == 0) {
      const int slot = (step + 1) / save_every;
      std::copy(cur.begin(), cur.end(),
                res.trajectory.data.begin() +
                    static_cast<std::int64_t>(slot) * geo.n);
    }
  }

  res.final_slice = f0;
  res.final_slice.time = Axis{1, t_end, 0.0};
  res.final_slice.data.assign(cur.begin(), cur.end());
  return res;
}

ResidualReport residual_check(const GridField& trajectory,
                              const CoefficientField& coeffs) {
  if (trajectory.time.n < 3)
    throw std::invalid_argument("residual_check: need at least 3 time slices");
  const StencilGeometry geo = StencilGeometry::from(trajectory);
  const int d = geo.d;
  const double dt = trajectory.time.step;

  ResidualReport rep;
  StencilTables tab;
  double cell = 1.0;
  for (int k = 0; k < d; ++k) cell *= geo.dx[k] * geo.dv[k];

  for (int it = 1; it + 1 < trajectory.time.n; ++it) {
    const double t = trajectory.time.coord(it);
    fill_tables(coeffs, trajectory, t, tab, {});
    const double* fm = trajectory.data.data() + (it - 1) * geo.n;
    const double* fc = trajectory.data.data() + it * geo.n;
    const double* fp = trajectory.data.data() + (it + 1) * geo.n;

    double max_r = 0.0, l2 = 0.0;
    int ix[2], iv[2];
    for (std::int64_t i = 0; i < geo.n; ++i) {
      geo.decode(i, ix, iv);
      // skip nodes whose centered stencil would poke through a truncated edge
      bool margin = false;
      for (int k = 0; k < d; ++k) {
        if (!geo.px && (ix[k] == 0 || ix[k] == geo.nx[k] - 1)) margin = true;
        if (!geo.pv && (iv[k] == 0 || iv[k] == geo.nv[k] - 1)) margin = true;
      }
      if (margin) continue;

      double lhs = (fp[i] - fm[i]) / (2.0 * dt);
      for (int k = 0; k < d; ++k) {
        const double vk = trajectory.v_axes[k].coord(iv[k]);
        lhs += vk *
               (geo.shift_x(fc, i, ix[k], k, +1) -
                geo.shift_x(fc, i, ix[k], k, -1)) /
               (2.0 * geo.dx[k]);
      }
      const double* anode = &tab.a[static_cast<std::size_t>(i) * d * d];
      double diff = 0.0;
      for (int k = 0; k < d; ++k) {
        diff += anode[k * d + k] *
                (geo.shift_v(fc, i, iv[k], k, +1) - 2.0 * fc[i] +
                 geo.shift_v(fc, i, iv[k], k, -1)) /
                (geo.dv[k] * geo.dv[k]);
      }
      for (int k = 0; k < d; ++k)
        for (int l = k + 1; l < d; ++l) {
          auto corner = [&](int sk, int sl) {
            std::int64_t idx = i;
            int jk = iv[k] + sk, jl = iv[l] + sl;
            if (jk < 0 || jk >= geo.nv[k]) {
              if (!geo.pv) return 0.0;
              jk = (jk + geo.nv[k]) % geo.nv[k];
            }
            if (jl < 0 || jl >= geo.nv[l]) {
              if (!geo.pv) return 0.0;
              jl = (jl + geo.nv[l]) % geo.nv[l];
            }
            idx += static_cast<std::int64_t>(jk - iv[k]) * geo.stride_v[k];
            idx += static_cast<std::int64_t>(jl - iv[l]) * geo.stride_v[l];
            return fc[idx];
          };
          diff += 2.0 * anode[k * d + l] *
                  (corner(+1, +1) - corner(+1, -1) - corner(-1, +1) +
                   corner(-1, -1)) /
                  (4.0 * geo.dv[k] * geo.dv[l]);
        }
      const double resid = lhs - diff -
                           tab.c[static_cast<std::size_t>(i)] * fc[i] -
                           tab.g[static_cast<std::size_t>(i)];
      max_r = std::max(max_r, std::abs(resid));
      l2 += resid * resid * cell;
    }
    rep.max_per_slice.push_back(max_r);
    rep.l2_per_slice.push_back(std::sqrt(l2));
    rep.max_abs = std::max(rep.max_abs, max_r);
  }
  return rep;
}

GridField transport_derivative_field(const GridField& trajectory) {
  if (trajectory.time.n < 2)
    throw std::invalid_argument("transport_derivative_field: need >= 2 slices");
  const StencilGeometry geo = StencilGeometry::from(trajectory);
  const int d = geo.d;
  GridField out = trajectory;
  out.time = Axis{trajectory.time.n - 1, trajectory.time.origin,
                  trajectory.time.step};
  out.data.assign(static_cast<std::size_t>(out.size()), 0.0);
  const double dt = trajectory.time.step;

  int ix[2], iv[2];
  for (int it = 0; it + 1 < trajectory.time.n; ++it) {
    const double* fc = trajectory.data.data() + it * geo.n;
    const double* fp = trajectory.data.data() + (it + 1) * geo.n;
    double* dst = out.data.data() + it * geo.n;
    for (std::int64_t i = 0; i < geo.n; ++i) {
      geo.decode(i, ix, iv);
      double val = (fp[i] - fc[i]) / dt;
      for (int k = 0; k < d; ++k) {
        const double vk = trajectory.v_axes[k].coord(iv[k]);
        if (vk >= 0.0)
          val += vk * (fc[i] - geo.shift_x(fc, i, ix[k], k, -1)) / geo.dx[k];
        else
          val += vk * (geo.shift_x(fc, i, ix[k], k, +1) - fc[i]) / geo.dx[k];
      }
      dst[i] = val;
    }
  }
  return out;
}

}  // namespace kfp
