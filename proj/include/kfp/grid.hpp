#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kfp/geometry.hpp"

namespace kfp {

struct Axis {
  int n = 1;
  double origin = 0.0;
  double step = 0.0;

  double coord(int i) const { return origin + step * i; }
  double length() const { return step * (n - 1); }
};

enum class Boundary : std::uint8_t { periodic = 0, truncated_decay = 1 };

// Dense samples over (time) x (x grid) x (v grid), row-major with time
// outermost. Single-slice fields use time.n == 1. Zero x-axes are allowed
// for functions of v alone.
struct GridField {
  Axis time;
  std::vector<Axis> x_axes;
  std::vector<Axis> v_axes;
  Boundary boundary_x = Boundary::periodic;
  Boundary boundary_v = Boundary::truncated_decay;
  std::vector<double> data;

  int dx() const { return static_cast<int>(x_axes.size()); }
  int dv() const { return static_cast<int>(v_axes.size()); }

  std::int64_t slice_size() const;
  std::int64_t size() const { return time.n * slice_size(); }
  void allocate() { data.assign(static_cast<std::size_t>(size()), 0.0); }

  // flattened index of (it, ix[], iv[])
  std::int64_t index(int it, const int* ix, const int* iv) const;
  double& at(int it, const int* ix, const int* iv);
  double at(int it, const int* ix, const int* iv) const;

  // multilinear interpolation in (x, v) on one time slice; throws when the
  // point falls outside the grid by more than `tol` cells
  double interpolate(int it, const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                     double tol = 1e-9) const;

  bool finite() const;

  // trapezoid mass of one slice: sum over nodes of f * cell volume with
  // half-weighted borders on truncated axes (periodic axes weight all nodes)
  double mass(int it) const;

  double max_abs(int it) const;
};

GridField make_slice(const std::vector<Axis>& x_axes,
                     const std::vector<Axis>& v_axes);

// flat binary container; little-endian, magic "KFP1"
void write_kfp1(const GridField& f, const std::string& path);
GridField read_kfp1(const std::string& path);

// CSV export of one time slice (columns x..., v..., value)
void write_slice_csv(const GridField& f, int it, const std::string& path);

}  // namespace kfp
