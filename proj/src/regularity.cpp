#include "kfp/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kfp/landau.hpp"
#include "kfp/profile.hpp"
#include "kfp/quadrature.hpp"
#include "kfp/rng.hpp"

namespace kfp {

namespace {

constexpr double kSeparationCap = 0.5;

struct SliceView {
  const GridField* f;
  int it;
  double t;
  std::vector<std::int64_t> members;       // in-region flat indices
  std::vector<std::uint8_t> member_mask;   // per slice node
};

void node_coords(const GridField& f, std::int64_t idx, double* x, double* v) {
  std::int64_t rem = idx;
  const int dv = f.dv();
  const int dx = f.dx();
  for (int k = dv - 1; k >= 0; --k) {
    v[k] = f.v_axes[k].coord(static_cast<int>(rem % f.v_axes[k].n));
    rem /= f.v_axes[k].n;
  }
  for (int k = dx - 1; k >= 0; --k) {
    x[k] = f.x_axes[k].coord(static_cast<int>(rem % f.x_axes[k].n));
    rem /= f.x_axes[k].n;
  }
}

bool region_contains(const KineticCylinder& region, const GridField& f,
                     double t, const double* x, const double* v) {
  const double r = region.radius;
  const double dt = t - region.center.t;
  if (!(dt > -r * r && dt <= 0.0)) return false;
  double sx = 0.0;
  for (int k = 0; k < f.dx(); ++k) {
    const double c =
        x[k] - region.center.x(k) - dt * region.center.v(k);
    sx += c * c;
  }
  if (f.dx() > 0 && !(std::sqrt(sx) < r * r * r)) return false;
  double sv = 0.0;
  for (int k = 0; k < f.dv(); ++k) {
    const double c = v[k] - region.center.v(k);
    sv += c * c;
  }
  return std::sqrt(sv) < r;
}

std::vector<SliceView> collect_slices(const GridField& f,
                                      const KineticCylinder& region) {
  if (f.dx() > 0 && region.center.dim() != std::max(f.dx(), f.dv()))
    throw std::invalid_argument("estimate_seminorm: region dimension mismatch");
  std::vector<SliceView> out;
  const std::int64_t n = f.slice_size();
  for (int it = 0; it < f.time.n; ++it) {
    SliceView sv;
    sv.f = &f;
    sv.it = it;
    sv.t = f.time.coord(it);
    sv.member_mask.assign(static_cast<std::size_t>(n), 0);
    double x[3] = {0, 0, 0}, v[3] = {0, 0, 0};
    for (std::int64_t i = 0; i < n; ++i) {
      node_coords(f, i, x, v);
      if (region_contains(region, f, sv.t, x, v)) {
        sv.member_mask[static_cast<std::size_t>(i)] = 1;
        sv.members.push_back(i);
      }
    }
    if (!sv.members.empty()) out.push_back(std::move(sv));
  }
  return out;
}

struct PairBest {
  double value = 0.0;
  std::int64_t ia = -1, ib = -1;
  int it = 0;
  std::int64_t pairs = 0;
};

// quotient of one admissible pair; returns -1 when the caps reject it
double pair_quotient(const SeminormSpec& spec, double df, double dxn,
                     double dvn) {
  if (!(dxn < kSeparationCap) || !(dvn < kSeparationCap)) return -1.0;
  if (dxn == 0.0 && dvn == 0.0) return -1.0;
  double den = 0.0;
  switch (spec.kind) {
    case SeminormSpec::Kind::holder_aniso:
      den = (dxn > 0 ? std::pow(dxn, spec.alpha / 3.0) : 0.0) +
            (dvn > 0 ? std::pow(dvn, spec.alpha) : 0.0);
      break;
    case SeminormSpec::Kind::log_holder:
      den = (dxn > 0 ? std::pow(dxn, spec.alpha / 3.0) : 0.0) +
            (dvn > 0 ? std::pow(std::log(1.0 / dvn), -spec.theta) : 0.0);
      break;
    case SeminormSpec::Kind::holder_x:
      if (dvn != 0.0 || dxn == 0.0) return -1.0;
      den = std::pow(dxn, spec.alpha);
      break;
    case SeminormSpec::Kind::holder_v:
      if (dxn != 0.0 || dvn == 0.0) return -1.0;
      den = std::pow(dvn, spec.alpha);
      break;
    case SeminormSpec::Kind::log_holder_v:
      if (dxn != 0.0 || dvn == 0.0) return -1.0;
      den = std::pow(std::log(1.0 / dvn), -spec.theta);
      break;
    case SeminormSpec::Kind::weighted_sup:
      return -1.0;
  }
  if (!(den > 0.0)) return -1.0;
  return std::abs(df) / den;
}

void consider(PairBest& best, const SeminormSpec& spec, const SliceView& sv,
              std::int64_t ia, std::int64_t ib) {
  const GridField& f = *sv.f;
  double xa[3], va[3], xb[3], vb[3];
  node_coords(f, ia, xa, va);
  node_coords(f, ib, xb, vb);
  double dx2 = 0.0, dv2 = 0.0;
  for (int k = 0; k < f.dx(); ++k) dx2 += (xa[k] - xb[k]) * (xa[k] - xb[k]);
  for (int k = 0; k < f.dv(); ++k) dv2 += (va[k] - vb[k]) * (va[k] - vb[k]);
  const std::int64_t off = static_cast<std::int64_t>(sv.it) * f.slice_size();
  const double df = f.data[static_cast<std::size_t>(off + ia)] -
                    f.data[static_cast<std::size_t>(off + ib)];
  const double q =
      pair_quotient(spec, df, std::sqrt(dx2), std::sqrt(dv2));
  if (q < 0.0) return;
  ++best.pairs;
  if (q > best.value || best.ia < 0) {
    best.value = q;
    best.ia = ia;
    best.ib = ib;
    best.it = sv.it;
  }
}

KineticPoint node_point(const GridField& f, int it, std::int64_t idx) {
  double x[3] = {0, 0, 0}, v[3] = {0, 0, 0};
  node_coords(f, idx, x, v);
  const int d = std::max(1, std::max(f.dx(), f.dv()));
  Eigen::VectorXd xv = Eigen::VectorXd::Zero(d), vv = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < f.dx(); ++k) xv(k) = x[k];
  for (int k = 0; k < f.dv(); ++k) vv(k) = v[k];
  return KineticPoint(f.time.coord(it), xv, vv);
}

}  // namespace

KineticCylinder whole_grid_region(const GridField& f) {
  double tmax = f.time.coord(f.time.n - 1);
  double tspan = std::max(1e-9, tmax - f.time.origin);
  double xmax = 0.0, vmax = 0.0;
  for (const auto& a : f.x_axes)
    xmax = std::max({xmax, std::abs(a.origin), std::abs(a.coord(a.n - 1))});
  for (const auto& a : f.v_axes)
    vmax = std::max({vmax, std::abs(a.origin), std::abs(a.coord(a.n - 1))});
  const double r = std::max({std::sqrt(tspan) * 1.01, std::cbrt(2.0 * xmax + 1.0),
                             vmax + 1.0, 1.0});
  const int d = std::max(1, std::max(f.dx(), f.dv()));
  KineticPoint center = KineticPoint::origin(d);
  center.t = tmax;
  return KineticCylinder(r, center);
}

SeminormEstimate estimate_seminorm(const GridField& f, const SeminormSpec& spec,
                                   const KineticCylinder& region,
                                   std::uint64_t seed, Parallelism par) {
  std::vector<SliceView> slices = collect_slices(f, region);
  if (slices.empty())
    throw std::invalid_argument("estimate_seminorm: region contains no grid nodes");

  if (spec.kind == SeminormSpec::Kind::weighted_sup) {
    SeminormEstimate est;
    bool found = false;
    for (const auto& sv : slices) {
      const std::int64_t off =
          static_cast<std::int64_t>(sv.it) * f.slice_size();
      for (std::int64_t i : sv.members) {
        double x[3], v[3];
        node_coords(f, i, x, v);
        double vv = 0.0;
        for (int k = 0; k < f.dv(); ++k) vv += v[k] * v[k];
        const double w = std::pow(1.0 + vv, 0.5 * spec.weight_n);
        const double val =
            w * std::abs(f.data[static_cast<std::size_t>(off + i)]);
        if (!found || val > est.value) {
          est.value = val;
          est.arg_a = est.arg_b = node_point(f, sv.it, i);
          found = true;
        }
        ++est.pairs;
      }
    }
    return est;
  }

  std::vector<PairBest> bests(slices.size());
  parallel_for(
      static_cast<std::int64_t>(slices.size()),
      [&](std::int64_t si) {
        const SliceView& sv = slices[static_cast<std::size_t>(si)];
        PairBest best;
        // all axis-aligned pairs (every lag along every axis)
        const int naxes = f.dx() + f.dv();
        for (int axis = 0; axis < naxes; ++axis) {
          std::int64_t stride = 1;
          int len;
          if (axis < f.dx()) {
            for (int k = f.dx() - 1; k > axis; --k) stride *= f.x_axes[k].n;
            for (int k = 0; k < f.dv(); ++k) stride *= f.v_axes[k].n;
            len = f.x_axes[axis].n;
          } else {
            const int va = axis - f.dx();
            for (int k = f.dv() - 1; k > va; --k) stride *= f.v_axes[k].n;
            len = f.v_axes[va].n;
          }
          for (std::int64_t i : sv.members) {
            const int pos =
                static_cast<int>((i / stride) % len);
            for (int lag = 1; pos + lag < len; ++lag) {
              const std::int64_t jdx = i + lag * stride;
              if (!sv.member_mask[static_cast<std::size_t>(jdx)]) continue;
              consider(best, spec, sv, i, jdx);
            }
          }
        }
        // seeded random extra pairs (mixed offsets)
        if (spec.kind == SeminormSpec::Kind::holder_aniso ||
            spec.kind == SeminormSpec::Kind::log_holder) {
          const std::int64_t m =
              static_cast<std::int64_t>(sv.members.size());
          if (m >= 2) {
            CounterRng rng(seed);
            const auto stream =
                CounterRng::stream("seminorm-pairs") ^ (0x9e37ull * sv.it);
            const std::int64_t count = spec.pair_cap;
            for (std::int64_t k = 0; k < count; ++k) {
              const auto ia = static_cast<std::int64_t>(
                  rng.uniform(stream, 2 * k) * m);
              const auto ib = static_cast<std::int64_t>(
                  rng.uniform(stream, 2 * k + 1) * m);
              if (ia == ib) continue;
              consider(best, spec, sv,
                       sv.members[static_cast<std::size_t>(ia)],
                       sv.members[static_cast<std::size_t>(ib)]);
            }
          }
        }
        bests[static_cast<std::size_t>(si)] = best;
      },
      par);

  SeminormEstimate est;
  std::int64_t total_pairs = 0;
  int found = -1;
  for (std::size_t si = 0; si < bests.size(); ++si) {
    total_pairs += bests[si].pairs;
    if (bests[si].ia < 0) continue;
    if (found < 0 || bests[si].value > est.value) {
      est.value = bests[si].value;
      est.arg_a = node_point(f, bests[si].it, bests[si].ia);
      est.arg_b = node_point(f, bests[si].it, bests[si].ib);
      found = static_cast<int>(si);
    }
  }
  est.pairs = total_pairs;
  if (found < 0)
    throw std::runtime_error(
        "estimate_seminorm: every candidate pair violates the separation caps");
  return est;
}

double sup_abs(const GridField& f, const KineticCylinder& region) {
  std::vector<SliceView> slices = collect_slices(f, region);
  if (slices.empty())
    throw std::invalid_argument("sup_abs: region contains no grid nodes");
  double m = 0.0;
  for (const auto& sv : slices) {
    const std::int64_t off = static_cast<std::int64_t>(sv.it) * f.slice_size();
    for (std::int64_t i : sv.members)
      m = std::max(m, std::abs(f.data[static_cast<std::size_t>(off + i)]));
  }
  return m;
}

GridField first_v_derivative(const GridField& f, int axis) {
  if (axis < 0 || axis >= f.dv())
    throw std::invalid_argument("first_v_derivative: bad axis");
  GridField out = f;
  out.v_axes[axis].n -= 2;
  out.v_axes[axis].origin += f.v_axes[axis].step;
  if (out.v_axes[axis].n < 1)
    throw std::invalid_argument("first_v_derivative: axis too short");
  out.allocate();
  const double inv = 1.0 / (2.0 * f.v_axes[axis].step);
  int ix[3] = {0, 0, 0}, iv[3] = {0, 0, 0};
  for (int it = 0; it < out.time.n; ++it) {
    const std::int64_t n = out.slice_size();
    for (std::int64_t i = 0; i < n; ++i) {
      std::int64_t rem = i;
      for (int k = out.dv() - 1; k >= 0; --k) {
        iv[k] = static_cast<int>(rem % out.v_axes[k].n);
        rem /= out.v_axes[k].n;
      }
      for (int k = out.dx() - 1; k >= 0; --k) {
        ix[k] = static_cast<int>(rem % out.x_axes[k].n);
        rem /= out.x_axes[k].n;
      }
      int src_iv[3];
      for (int k = 0; k < out.dv(); ++k)
        src_iv[k] = iv[k] + (k == axis ? 1 : 0);
      int up[3], dn[3];
      std::copy(src_iv, src_iv + 3, up);
      std::copy(src_iv, src_iv + 3, dn);
      ++up[axis];
      --dn[axis];
      out.data[static_cast<std::size_t>(out.index(it, ix, iv))] =
          (f.at(it, ix, up) - f.at(it, ix, dn)) * inv;
    }
  }
  return out;
}

GridField second_v_derivative(const GridField& f, int axis_i, int axis_j) {
  if (axis_i < 0 || axis_i >= f.dv() || axis_j < 0 || axis_j >= f.dv())
    throw std::invalid_argument("second_v_derivative: bad axis");
  GridField out = f;
  if (axis_i == axis_j) {
    out.v_axes[axis_i].n -= 2;
    out.v_axes[axis_i].origin += f.v_axes[axis_i].step;
  } else {
    out.v_axes[axis_i].n -= 2;
    out.v_axes[axis_i].origin += f.v_axes[axis_i].step;
    out.v_axes[axis_j].n -= 2;
    out.v_axes[axis_j].origin += f.v_axes[axis_j].step;
  }
  if (out.v_axes[axis_i].n < 1 || out.v_axes[axis_j].n < 1)
    throw std::invalid_argument("second_v_derivative: axis too short");
  out.allocate();

  int ix[3] = {0, 0, 0}, iv[3] = {0, 0, 0};
  for (int it = 0; it < out.time.n; ++it) {
    const std::int64_t n = out.slice_size();
    for (std::int64_t i = 0; i < n; ++i) {
      std::int64_t rem = i;
      for (int k = out.dv() - 1; k >= 0; --k) {
        iv[k] = static_cast<int>(rem % out.v_axes[k].n);
        rem /= out.v_axes[k].n;
      }
      for (int k = out.dx() - 1; k >= 0; --k) {
        ix[k] = static_cast<int>(rem % out.x_axes[k].n);
        rem /= out.x_axes[k].n;
      }
      int src[3];
      for (int k = 0; k < out.dv(); ++k) {
        src[k] = iv[k];
        if (k == axis_i) ++src[k];
        if (k == axis_j && axis_j != axis_i) ++src[k];
      }
      double val;
      if (axis_i == axis_j) {
        int up[3], dn[3];
        std::copy(src, src + 3, up);
        std::copy(src, src + 3, dn);
        ++up[axis_i];
        --dn[axis_i];
        const double h = f.v_axes[axis_i].step;
        val = (f.at(it, ix, up) - 2.0 * f.at(it, ix, src) + f.at(it, ix, dn)) /
              (h * h);
      } else {
        auto corner = [&](int si, int sj) {
          int c[3];
          std::copy(src, src + 3, c);
          c[axis_i] += si;
          c[axis_j] += sj;
          return f.at(it, ix, c);
        };
        val = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) /
              (4.0 * f.v_axes[axis_i].step * f.v_axes[axis_j].step);
      }
      out.data[static_cast<std::size_t>(out.index(it, ix, iv))] = val;
    }
  }
  return out;
}

namespace {

struct DerivedNorms {
  double s_u_aniso;
  double s_u_x;
  double s_du_aniso;
  double s_d2_aniso;
  double sup_u;
  double sup_du;
  double sup_d2;
  double s_u_log;  // only when requested
};

DerivedNorms derived_norms(const GridField& u, double alpha,
                           const KineticCylinder& region, std::uint64_t seed,
                           bool with_log, double theta) {
  DerivedNorms n{};
  SeminormSpec aniso{SeminormSpec::Kind::holder_aniso, alpha, 1.0, 0.0, 100000};
  SeminormSpec xsp{SeminormSpec::Kind::holder_x, (2.0 + alpha) / 3.0, 1.0, 0.0,
                   100000};
  n.s_u_aniso = estimate_seminorm(u, aniso, region, seed).value;
  n.s_u_x = u.dx() > 0 ? estimate_seminorm(u, xsp, region, seed).value : 0.0;
  n.sup_u = sup_abs(u, region);
  n.s_du_aniso = 0.0;
  n.sup_du = 0.0;
  for (int k = 0; k < u.dv(); ++k) {
    const GridField du = first_v_derivative(u, k);
    n.s_du_aniso =
        std::max(n.s_du_aniso, estimate_seminorm(du, aniso, region, seed).value);
    n.sup_du = std::max(n.sup_du, sup_abs(du, region));
  }
  n.s_d2_aniso = 0.0;
  n.sup_d2 = 0.0;
  for (int k = 0; k < u.dv(); ++k)
    for (int l = k; l < u.dv(); ++l) {
      const GridField d2 = second_v_derivative(u, k, l);
      n.s_d2_aniso = std::max(n.s_d2_aniso,
                              estimate_seminorm(d2, aniso, region, seed).value);
      n.sup_d2 = std::max(n.sup_d2, sup_abs(d2, region));
    }
  if (with_log) {
    SeminormSpec logsp{u.dx() > 0 ? SeminormSpec::Kind::log_holder
                                  : SeminormSpec::Kind::log_holder_v,
                       alpha, theta, 0.0, 100000};
    n.s_u_log = estimate_seminorm(u, logsp, region, seed).value;
  }
  return n;
}

double safe_ratio(double lhs, double rhs) {
  if (rhs > 0.0) return lhs / rhs;
  return lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

InterpolationReport check_interpolation(const GridField& u, double alpha,
                                        const std::vector<double>& eps_list,
                                        const KineticCylinder& region,
                                        std::uint64_t seed) {
  if (region.radius < 0.5 - 1e-12)
    throw std::invalid_argument("check_interpolation: region radius must be >= 1/2");
  const DerivedNorms n = derived_norms(u, alpha, region, seed, false, 0.0);
  InterpolationReport rep;
  for (double eps : eps_list) {
    if (!(eps > 0.0))
      throw std::invalid_argument("check_interpolation: eps must be > 0");
    InterpolationRow row;
    row.eps = eps;
    const double bracket = n.s_u_x + n.s_d2_aniso;
    row.lhs[0] = n.s_u_aniso;
    row.rhs[0] = eps * eps * bracket + std::pow(eps, -alpha) * n.sup_u;
    row.lhs[1] = n.s_du_aniso;
    row.rhs[1] = eps * bracket + std::pow(eps, -alpha - 1.0) * n.sup_u;
    row.lhs[2] = n.sup_du;
    row.rhs[2] =
        std::pow(eps, alpha + 1.0) * n.s_d2_aniso + n.sup_u / eps;
    row.lhs[3] = n.sup_d2;
    row.rhs[3] =
        std::pow(eps, alpha) * n.s_d2_aniso + n.sup_u / (eps * eps);
    for (int i = 0; i < 4; ++i) {
      row.constant[i] = safe_ratio(row.lhs[i], row.rhs[i]);
      rep.max_constant = std::max(rep.max_constant, row.constant[i]);
    }
    rep.rows.push_back(row);
  }
  return rep;
}

LogInterpolationReport check_log_interpolation(
    const GridField& u, double alpha, double theta,
    const std::vector<double>& eps_list, const KineticCylinder& region,
    std::uint64_t seed) {
  const DerivedNorms n = derived_norms(u, alpha, region, seed, true, theta);
  LogInterpolationReport rep;
  for (double eps : eps_list) {
    if (!(eps > 0.0 && eps < region.radius))
      throw std::invalid_argument(
          "check_log_interpolation: eps must lie in (0, r)");
    LogInterpolationRow row;
    row.eps = eps;
    row.lhs = n.sup_d2;
    row.rhs = std::pow(std::log(1.0 / eps), theta) / (eps * eps) * n.s_u_log +
              std::pow(eps, alpha) * (n.s_d2_aniso + n.s_u_x);
    row.constant = safe_ratio(row.lhs, row.rhs);
    rep.max_constant = std::max(rep.max_constant, row.constant);
    rep.rows.push_back(row);
  }
  return rep;
}

WeightInterpolationReport check_weight_interpolation(const GridField& phi,
                                                     double k, double theta,
                                                     double mu,
                                                     std::uint64_t seed) {
  if (phi.dx() != 0)
    throw std::invalid_argument(
        "check_weight_interpolation: phi must be a function of v only");
  if (!(mu > 0.0 && mu < 1.0))
    throw std::invalid_argument("check_weight_interpolation: mu in (0,1)");
  const KineticCylinder region = whole_grid_region(phi);

  GridField weighted = phi;
  {
    const std::int64_t n = phi.slice_size();
    double x[3], v[3];
    for (std::int64_t i = 0; i < n; ++i) {
      node_coords(phi, i, x, v);
      double vv = 0.0;
      for (int a = 0; a < phi.dv(); ++a) vv += v[a] * v[a];
      weighted.data[static_cast<std::size_t>(i)] *=
          std::pow(1.0 + vv, 0.5 * (1.0 - mu) * k);
    }
  }

  SeminormSpec lhs_spec{SeminormSpec::Kind::log_holder_v, 0.5, theta * mu, 0.0,
                        200000};
  SeminormSpec phi_log{SeminormSpec::Kind::log_holder_v, 0.5, theta, 0.0,
                       200000};
  SeminormSpec wk{SeminormSpec::Kind::weighted_sup, 0.5, 1.0, k, 0};
  SeminormSpec wlow{SeminormSpec::Kind::weighted_sup, 0.5, 1.0,
                    std::max(0.0, (1.0 - mu) * k - 1.0), 0};

  WeightInterpolationReport rep;
  rep.lhs = estimate_seminorm(weighted, lhs_spec, region, seed).value;
  const double nk = estimate_seminorm(phi, wk, region, seed).value;
  const double slog = estimate_seminorm(phi, phi_log, region, seed).value;
  const double nlow = estimate_seminorm(phi, wlow, region, seed).value;
  double divergent = std::numeric_limits<double>::infinity();
  if (!(nk < divergent))
    throw std::runtime_error("check_weight_interpolation: divergent weighted sup");
  rep.rhs = std::pow(nk, 1.0 - mu) * std::pow(slog, mu) + nlow;
  rep.constant = safe_ratio(rep.lhs, rep.rhs);
  return rep;
}

// ---------------------------------------------------------------------------
// Schauder sweep

SchauderReport schauder_experiment(const SchauderConfig& config) {
  const double alpha = config.alpha;
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("schauder_experiment: alpha in (0,1)");
  const double amp = config.coeff_amplitude;
  if (!(amp > 0.0 && amp < 1.0))
    throw std::invalid_argument("schauder_experiment: amplitude in (0,1)");

  SchauderReport rep;
  const CounterRng rng(config.seed);

  GridField f0;
  f0.time = Axis{1, -1.0, 0.0};
  f0.x_axes = {Axis{config.nx, -1.0, 2.0 / config.nx}};
  f0.v_axes = {Axis{config.nv, -2.0, 4.0 / (config.nv - 1)}};
  f0.boundary_x = Boundary::periodic;
  f0.boundary_v = Boundary::truncated_decay;
  f0.allocate();

  const double pi = 3.14159265358979323846;
  auto phi_xv = [pi](double x, double v) {
    return std::sin(pi * x) * std::cos(pi * v / 2.0);
  };
  auto g_xv = [pi](double x, double v) {
    return std::cos(pi * x) * std::exp(-v * v);
  };

  for (int l_segments : config.l_values) {
    if (l_segments < 1)
      throw std::invalid_argument("schauder_experiment: L must be >= 1");
    // random sign per segment; sup_t |chi| = 1, so the (x,v)-seminorm of the
    // coefficient does not move with L
    std::vector<double> signs(static_cast<std::size_t>(l_segments));
    const auto stream =
        CounterRng::stream("schauder-signs") ^ (0x51ull * l_segments);
    for (int kk = 0; kk < l_segments; ++kk)
      signs[static_cast<std::size_t>(kk)] =
          rng.uniform(stream, kk) < 0.5 ? -1.0 : 1.0;
    auto chi = [&signs, l_segments](double t) {
      int idx = static_cast<int>((t + 1.0) * l_segments);
      idx = std::min(std::max(idx, 0), l_segments - 1);
      return signs[static_cast<std::size_t>(idx)];
    };

    CoefficientField coeffs;
    coeffs.dim = 1;
    coeffs.lambda = 1.0 / (1.0 - amp);
    coeffs.a = [&phi_xv, &chi, amp](double t, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& v) {
      Eigen::MatrixXd m(1, 1);
      m(0, 0) = 1.0 + amp * phi_xv(x(0), v(0)) * chi(t);
      return m;
    };
    coeffs.g = [&g_xv](double, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& v) { return g_xv(x(0), v(0)); };

    FdOptions fdopt;
    fdopt.cfl_safety = config.cfl_safety;
    fdopt.par = config.par;
    // predicted step count (same CFL arithmetic as the solver) so the saved
    // slices line up across L values
    {
      const double dv = f0.v_axes[0].step;
      const double dx = f0.x_axes[0].step;
      const double dt = config.cfl_safety *
                        std::min(dx / 2.0, dv * dv / (2.0 * coeffs.lambda));
      const int steps = static_cast<int>(std::ceil(1.0 / dt));
      fdopt.save_every = std::max(1, steps / config.saved_slices);
    }
    FdResult sol = solve_fd(coeffs, f0, 0.0, fdopt);

    const KineticCylinder q1(1.0, KineticPoint::origin(1));
    const KineticCylinder qhalf(0.5, KineticPoint::origin(1));

    const GridField d2f = second_v_derivative(sol.trajectory, 0, 0);
    SeminormSpec xsp{SeminormSpec::Kind::holder_x, (2.0 + alpha) / 3.0, 1.0,
                     0.0, 100000};
    SeminormSpec aniso{SeminormSpec::Kind::holder_aniso, alpha, 1.0, 0.0,
                       100000};
    const double lhs =
        estimate_seminorm(sol.trajectory, xsp, qhalf, config.seed).value +
        estimate_seminorm(d2f, aniso, qhalf, config.seed).value;

    // coefficient and forcing fields sampled like the trajectory
    GridField a_field = sol.trajectory;
    GridField g_field = sol.trajectory;
    {
      const std::int64_t n = a_field.slice_size();
      for (int it = 0; it < a_field.time.n; ++it) {
        const double t = a_field.time.coord(it);
        for (std::int64_t i = 0; i < n; ++i) {
          double x[3], v[3];
          node_coords(a_field, i, x, v);
          const std::size_t idx =
              static_cast<std::size_t>(it * n + i);
          a_field.data[idx] = 1.0 + amp * phi_xv(x[0], v[0]) * chi(t);
          g_field.data[idx] = g_xv(x[0], v[0]);
        }
      }
    }
    const double a_semi =
        estimate_seminorm(a_field, aniso, q1, config.seed).value;
    const double g_semi =
        estimate_seminorm(g_field, aniso, q1, config.seed).value;
    const double sup_f = sup_abs(sol.trajectory, q1);
    const double rhs =
        (1.0 + std::pow(a_semi, 1.0 + 2.0 / alpha)) * sup_f +
        (1.0 + a_semi) * g_semi;

    SchauderRow row;
    row.l_segments = l_segments;
    row.lhs = lhs;
    row.rhs = rhs;
    row.rho = safe_ratio(lhs, rhs);
    row.coeff_seminorm = a_semi;
    row.g_seminorm = g_semi;
    row.sup_f = sup_f;
    rep.rows.push_back(row);
  }

  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  for (const auto& row : rep.rows) {
    rmin = std::min(rmin, row.rho);
    rmax = std::max(rmax, row.rho);
  }
  rep.rho_max_over_min = rmin > 0.0 ? rmax / rmin : 0.0;
  return rep;
}

LogHolderScalingReport check_logholder_scaling(const GridField& f,
                                               const KineticPoint& z0,
                                               double theta, double gamma,
                                               std::uint64_t seed) {
  const double t0 = z0.t;
  if (!(t0 > 0.0 && t0 < 0.5))
    throw std::invalid_argument(
        "check_logholder_scaling: t0 must lie in (0, 1/2)");
  const ScalingFrame frame = make_scaling_frame(z0, gamma);

  // sample f_{z0} on Q_1
  const int nt = std::max(2, std::min(6, f.time.n));
  const int nx = 7, nv = 17;
  Axis taxis{nt, -1.0, 1.0 / (nt - 1)};
  std::vector<Axis> xa(3, Axis{nx, -1.0, 2.0 / (nx - 1)});
  std::vector<Axis> va(3, Axis{nv, -1.0, 2.0 / (nv - 1)});
  const GridField fz0 = rescale_field(f, frame, taxis, xa, va);

  SeminormSpec half{SeminormSpec::Kind::log_holder_v, 0.5, theta / 2.0, 0.0,
                    200000};
  SeminormSpec full{SeminormSpec::Kind::log_holder_v, 0.5, theta, 0.0, 200000};

  LogHolderScalingReport rep;
  KineticPoint q1_center = KineticPoint::origin(3);
  rep.lhs = estimate_seminorm(fz0, half, KineticCylinder(1.0, q1_center), seed)
                .value;
  // smallest cylinder containing the image of Q_1 under the frame map
  const double rho = std::sqrt(t0 / 2.0);
  rep.rhs =
      estimate_seminorm(f, full, KineticCylinder(rho, z0), seed).value *
      std::pow(std::log(1.0 / t0), -theta / 2.0);
  rep.constant = safe_ratio(rep.lhs, rep.rhs);
  return rep;
}

}  // namespace kfp
