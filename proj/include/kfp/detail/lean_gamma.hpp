#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kfp/kernel.hpp"

namespace kfp::detail {

// Flattened polynomial for tight inner loops.
struct CompiledPoly {
  int nvars = 0;
  std::vector<std::array<std::uint8_t, 8>> mono;
  std::vector<double> coef;

  double eval(const double* u) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < coef.size(); ++k) {
      double term = coef[k];
      const auto& m = mono[k];
      for (int i = 0; i < nvars; ++i)
        for (int e = 0; e < m[i]; ++e) term *= u[i];
      acc += term;
    }
    return acc;
  }
};

inline CompiledPoly compile(const MultiPoly& p) {
  CompiledPoly c;
  c.nvars = p.nvars();
  for (const auto& [m, coef] : p.terms()) {
    c.mono.push_back(m);
    c.coef.push_back(coef);
  }
  return c;
}

// Raw-array kernel evaluation; exponents above the cutoff short-circuit to 0.
struct LeanGamma {
  int d = 0;
  double log_norm = 0.0;
  double a0_inv[9] = {0};
  double p_inv[9] = {0};
  double shift[9] = {0};

  void load(const KernelContext& ctx) {
    d = ctx.d;
    log_norm = ctx.log_normalization;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        a0_inv[i * d + j] = ctx.a0_inv(i, j);
        p_inv[i * d + j] = ctx.p_inv(i, j);
        shift[i * d + j] = ctx.shift(i, j);
      }
  }

  double gamma(const double* x, const double* v) const {
    double q[3];
    for (int i = 0; i < d; ++i) {
      double s = x[i];
      for (int j = 0; j < d; ++j) s -= shift[i * d + j] * v[j];
      q[i] = s;
    }
    double e = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        e += v[i] * a0_inv[i * d + j] * v[j];
        e += q[i] * p_inv[i * d + j] * q[j];
      }
    e *= 0.25;
    const double arg = log_norm - e;
    if (arg < -700.0) return 0.0;
    return std::exp(arg);
  }
};

}  // namespace kfp::detail
