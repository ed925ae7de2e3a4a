#include "kfp/kernel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kfp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

// ---------------------------------------------------------------------------
// MultiPoly

MultiPoly MultiPoly::constant(int nvars, double c) {
  MultiPoly p(nvars);
  if (c != 0.0) p.terms_[Mono{}] = c;
  return p;
}

MultiPoly MultiPoly::linear(int nvars, const Eigen::VectorXd& coef,
                            double c0) {
  MultiPoly p(nvars);
  if (c0 != 0.0) p.terms_[Mono{}] = c0;
  for (int i = 0; i < nvars; ++i) {
    if (coef(i) == 0.0) continue;
    Mono m{};
    m[i] = 1;
    p.terms_[m] = coef(i);
  }
  return p;
}

void MultiPoly::add_term(const Mono& m, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

MultiPoly& MultiPoly::operator+=(const MultiPoly& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

MultiPoly MultiPoly::operator+(const MultiPoly& o) const {
  MultiPoly r = *this;
  r += o;
  return r;
}

MultiPoly MultiPoly::operator*(const MultiPoly& o) const {
  MultiPoly r(nvars_);
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : o.terms_) {
      Mono m{};
      for (int i = 0; i < 8; ++i)
        m[i] = static_cast<std::uint8_t>(ma[i] + mb[i]);
      r.add_term(m, ca * cb);
    }
  }
  return r;
}

MultiPoly MultiPoly::scaled(double s) const {
  MultiPoly r(nvars_);
  if (s == 0.0) return r;
  for (const auto& [m, c] : terms_) r.terms_[m] = c * s;
  return r;
}

MultiPoly MultiPoly::derivative(int var) const {
  MultiPoly r(nvars_);
  for (const auto& [m, c] : terms_) {
    if (m[var] == 0) continue;
    Mono dm = m;
    dm[var] -= 1;
    r.add_term(dm, c * m[var]);
  }
  return r;
}

double MultiPoly::eval(const double* u) const {
  double acc = 0.0;
  for (const auto& [m, c] : terms_) {
    double term = c;
    for (int i = 0; i < nvars_; ++i)
      for (int k = 0; k < m[i]; ++k) term *= u[i];
    acc += term;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Kernel context and pointwise evaluation

KernelContext make_kernel_context(const TimeMatrixProfile& profile, double t,
                                  double tol) {
  if (!(t > 0.0))
    throw std::invalid_argument("make_kernel_context: t must be > 0");
  KernelContext ctx;
  ctx.t = t;
  ctx.d = profile.dim();
  ctx.km = assemble_matrices(profile, t, tol);
  ctx.a = profile.value(t);
  ctx.a0_inv = spd_inverse(ctx.km.A0, "kernel(A0)");
  ctx.p_inv = spd_inverse(ctx.km.P, "kernel(P)");
  // The kernel argument is q = x - v t + A1 A0^{-1} v = x - M^T v.
  ctx.shift = ctx.km.M.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es0(ctx.km.A0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esp(ctx.km.P);
  double logdet = 0.0;
  for (int i = 0; i < ctx.d; ++i)
    logdet += std::log(es0.eigenvalues()(i)) + std::log(esp.eigenvalues()(i));
  ctx.log_normalization = -ctx.d * std::log(4.0 * kPi) - 0.5 * logdet;

  const int d = ctx.d;
  Eigen::MatrixXd h(2 * d, 2 * d);
  const Eigen::MatrixXd pw = ctx.p_inv * ctx.shift;
  h.topLeftCorner(d, d) = ctx.p_inv;
  h.topRightCorner(d, d) = -pw;
  h.bottomLeftCorner(d, d) = -pw.transpose();
  h.bottomRightCorner(d, d) = ctx.a0_inv + ctx.shift.transpose() * pw;
  ctx.precision = 0.5 * (h + h.transpose()) * 0.5;
  return ctx;
}

double eval_kolmogorov(double t, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& v) {
  if (x.size() != v.size())
    throw std::invalid_argument("eval_kolmogorov: dimension mismatch");
  if (!(t > 0.0)) return 0.0;
  const int d = static_cast<int>(x.size());
  const double norm = std::pow(std::sqrt(3.0) / (2.0 * kPi * t * t), d);
  const double ex = 3.0 * (x - 0.5 * t * v).squaredNorm() / (t * t * t);
  const double ev = v.squaredNorm() / (4.0 * t);
  return norm * std::exp(-ex - ev);
}

KernelEvaluation eval_kernel(const KernelContext& ctx,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& v) {
  KernelEvaluation ev;
  ev.log_normalization = ctx.log_normalization;
  ev.exponent_v = 0.25 * v.dot(ctx.a0_inv * v);
  const Eigen::VectorXd q = x - ctx.shift * v;
  ev.exponent_x = 0.25 * q.dot(ctx.p_inv * q);
  ev.value = std::exp(ev.log_normalization - ev.exponent_v - ev.exponent_x);
  return ev;
}

KernelEvaluation eval_kernel(const TimeMatrixProfile& profile, double t,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& v) {
  if (x.size() != v.size() || x.size() != profile.dim())
    throw std::invalid_argument("eval_kernel: dimension mismatch");
  if (!(t > 0.0)) {
    KernelEvaluation zero;
    zero.log_normalization = -std::numeric_limits<double>::infinity();
    return zero;
  }
  return eval_kernel(make_kernel_context(profile, t), x, v);
}

KernelContextDt kernel_context_dt(const KernelContext& ctx) {
  const int d = ctx.d;
  const Eigen::MatrixXd& a = ctx.a;
  const Eigen::MatrixXd da0inv = -ctx.a0_inv * a * ctx.a0_inv;
  const Eigen::MatrixXd dp = ctx.km.M.transpose() * a * ctx.km.M;
  const Eigen::MatrixXd dpinv = -ctx.p_inv * dp * ctx.p_inv;
  const Eigen::MatrixXd dshift =
      Eigen::MatrixXd::Identity(d, d) - ctx.shift * a * ctx.a0_inv;

  KernelContextDt out;
  Eigen::MatrixXd h(2 * d, 2 * d);
  const Eigen::MatrixXd top_right =
      -(dpinv * ctx.shift + ctx.p_inv * dshift);
  h.topLeftCorner(d, d) = dpinv;
  h.topRightCorner(d, d) = top_right;
  h.bottomLeftCorner(d, d) = top_right.transpose();
  h.bottomRightCorner(d, d) =
      da0inv + dshift.transpose() * ctx.p_inv * ctx.shift +
      ctx.shift.transpose() * dpinv * ctx.shift +
      ctx.shift.transpose() * ctx.p_inv * dshift;
  out.dprecision = 0.5 * (h + h.transpose()) * 0.5;
  out.dlog_normalization =
      -0.5 * ((ctx.a0_inv * a).trace() + (ctx.p_inv * dp).trace());
  return out;
}

double eval_kernel_dt_direct(const KernelContext& ctx,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& v) {
  const KernelContextDt dt = kernel_context_dt(ctx);
  const int d = ctx.d;
  Eigen::VectorXd u(2 * d);
  u << x, v;
  const double lambda1 =
      dt.dlog_normalization - 0.5 * u.dot(dt.dprecision * u);
  return lambda1 * eval_kernel(ctx, x, v).value;
}

// ---------------------------------------------------------------------------
// Analytic derivatives

namespace {

// (H u)_i as a linear polynomial
MultiPoly precision_row(const Eigen::MatrixXd& h, int i) {
  return MultiPoly::linear(static_cast<int>(h.rows()), h.row(i).transpose());
}

// p -> d_i p - (H u)_i p, the log-derivative chain rule for poly * Gamma
MultiPoly gaussian_step(const MultiPoly& p, int var,
                        const Eigen::MatrixXd& h) {
  return p.derivative(var) + precision_row(h, var).scaled(-1.0) * p;
}

// Polynomial of (-v.grad_x + Tr(a D_v^2)) Gamma / Gamma, which equals
// dt Gamma / Gamma a.e. in t
MultiPoly transport_diffusion_poly(const KernelContext& ctx) {
  const int d = ctx.d;
  const int n = 2 * d;
  const Eigen::MatrixXd& h = ctx.precision;
  MultiPoly s = MultiPoly::constant(n, 0.0);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd vk = Eigen::VectorXd::Zero(n);
    vk(d + k) = 1.0;
    // -v_k dx_k Gamma contributes +v_k (Hu)_{x_k}
    s += MultiPoly::linear(n, vk) * precision_row(h, k);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (ctx.a(i, j) == 0.0) continue;
      MultiPoly term = MultiPoly::constant(n, -h(d + i, d + j));
      term += precision_row(h, d + i) * precision_row(h, d + j);
      s += term.scaled(ctx.a(i, j));
    }
  }
  return s;
}

// d/dt of the polynomial above with the coefficient derivative da supplied
MultiPoly transport_diffusion_poly_dt(const KernelContext& ctx,
                                      const KernelContextDt& dt,
                                      const Eigen::MatrixXd& da) {
  const int d = ctx.d;
  const int n = 2 * d;
  const Eigen::MatrixXd& h = ctx.precision;
  const Eigen::MatrixXd& dh = dt.dprecision;
  MultiPoly s = MultiPoly::constant(n, 0.0);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd vk = Eigen::VectorXd::Zero(n);
    vk(d + k) = 1.0;
    s += MultiPoly::linear(n, vk) * precision_row(dh, k);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (da(i, j) != 0.0) {
        MultiPoly term = MultiPoly::constant(n, -h(d + i, d + j));
        term += precision_row(h, d + i) * precision_row(h, d + j);
        s += term.scaled(da(i, j));
      }
      if (ctx.a(i, j) != 0.0) {
        MultiPoly term = MultiPoly::constant(n, -dh(d + i, d + j));
        term += precision_row(dh, d + i) * precision_row(h, d + j);
        term += precision_row(h, d + i) * precision_row(dh, d + j);
        s += term.scaled(ctx.a(i, j));
      }
    }
  }
  return s;
}

int multi_order(const std::vector<int>& idx) {
  int n = 0;
  for (int k : idx) {
    if (k < 0) throw std::invalid_argument("multi-index entries must be >= 0");
    n += k;
  }
  return n;
}

}  // namespace

DerivativeKernel::DerivativeKernel(const TimeMatrixProfile& profile, double t,
                                   int j, const std::vector<int>& alpha,
                                   const std::vector<int>& beta, double tol)
    : ctx_(make_kernel_context(profile, t, tol)) {
  const int d = ctx_.d;
  if (static_cast<int>(alpha.size()) != d || static_cast<int>(beta.size()) != d)
    throw std::invalid_argument("DerivativeKernel: multi-index dimension mismatch");
  if (j < 0 || j > 2)
    throw std::invalid_argument("DerivativeKernel: j must be 0, 1, or 2");
  const int depth = multi_order(alpha) + 3 * multi_order(beta) + 2 * j;
  if (depth > kMaxDerivativeDepth)
    throw std::invalid_argument("DerivativeKernel: unsupported derivative depth");
  if (j >= 1 && profile.breakpoint_distance(t) < 1e-12)
    throw std::invalid_argument(
        "DerivativeKernel: a(t) is discontinuous at t; time derivative undefined");
  if (j == 2 && !profile.has_derivative())
    throw std::invalid_argument(
        "DerivativeKernel: second time derivative needs da/dt");

  MultiPoly p = MultiPoly::constant(2 * d, 1.0);
  if (j >= 1) {
    const MultiPoly s1 = transport_diffusion_poly(ctx_);
    if (j == 1) {
      p = s1;
    } else {
      const KernelContextDt dt = kernel_context_dt(ctx_);
      const Eigen::MatrixXd da = profile.derivative(t);
      p = transport_diffusion_poly_dt(ctx_, dt, da) + s1 * s1;
    }
  }
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < alpha[i]; ++k)
      p = gaussian_step(p, d + i, ctx_.precision);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < beta[i]; ++k)
      p = gaussian_step(p, i, ctx_.precision);
  poly_ = p;
}

double DerivativeKernel::operator()(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& v) const {
  const int d = ctx_.d;
  double u[8];
  for (int i = 0; i < d; ++i) {
    u[i] = x(i);
    u[d + i] = v(i);
  }
  return poly_.eval(u) * eval_kernel(ctx_, x, v).value;
}

double eval_kernel_derivative(const TimeMatrixProfile& profile, double t,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& v, int j,
                              const std::vector<int>& alpha,
                              const std::vector<int>& beta) {
  if (!(t > 0.0))
    throw std::invalid_argument("eval_kernel_derivative: t must be > 0");
  return DerivativeKernel(profile, t, j, alpha, beta)(x, v);
}

}  // namespace kfp
