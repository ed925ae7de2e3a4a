#include "kfp/grid.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kfp {

std::int64_t GridField::slice_size() const {
  std::int64_t n = 1;
  for (const auto& a : x_axes) n *= a.n;
  for (const auto& a : v_axes) n *= a.n;
  return n;
}

std::int64_t GridField::index(int it, const int* ix, const int* iv) const {
  std::int64_t idx = it;
  for (std::size_t k = 0; k < x_axes.size(); ++k) idx = idx * x_axes[k].n + ix[k];
  for (std::size_t k = 0; k < v_axes.size(); ++k) idx = idx * v_axes[k].n + iv[k];
  return idx;
}

double& GridField::at(int it, const int* ix, const int* iv) {
  return data[static_cast<std::size_t>(index(it, ix, iv))];
}

double GridField::at(int it, const int* ix, const int* iv) const {
  return data[static_cast<std::size_t>(index(it, ix, iv))];
}

namespace {

// base index + fraction for one axis; throws if off-grid beyond tol cells
void locate(const Axis& a, double value, double tol, int& i0, double& frac) {
  const double s = (value - a.origin) / a.step;
  if (s < -tol || s > a.n - 1 + tol)
    throw std::out_of_range("GridField::interpolate: point off the grid");
  double c = std::min(std::max(s, 0.0), static_cast<double>(a.n - 1));
  i0 = static_cast<int>(std::floor(c));
  if (i0 >= a.n - 1) i0 = a.n - 2;
  if (a.n == 1) {
    i0 = 0;
    frac = 0.0;
    return;
  }
  frac = c - i0;
}

}  // namespace

double GridField::interpolate(int it, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& v, double tol) const {
  const int nd = dx() + dv();
  if (x.size() != dx() || v.size() != dv())
    throw std::invalid_argument("GridField::interpolate: dimension mismatch");
  int base[6];
  double frac[6];
  for (int k = 0; k < dx(); ++k) locate(x_axes[k], x(k), tol, base[k], frac[k]);
  for (int k = 0; k < dv(); ++k)
    locate(v_axes[k], v(k), tol, base[dx() + k], frac[dx() + k]);

  double acc = 0.0;
  for (int corner = 0; corner < (1 << nd); ++corner) {
    double w = 1.0;
    int ix[3] = {0, 0, 0}, iv[3] = {0, 0, 0};
    for (int k = 0; k < nd; ++k) {
      const bool hi = (corner >> k) & 1;
      const int axis_n = k < dx() ? x_axes[k].n : v_axes[k - dx()].n;
      int idx = base[k] + (hi ? 1 : 0);
      if (axis_n == 1) idx = 0;
      w *= hi ? frac[k] : 1.0 - frac[k];
      if (k < dx()) ix[k] = idx; else iv[k - dx()] = idx;
    }
    if (w != 0.0) acc += w * at(it, ix, iv);
  }
  return acc;
}

bool GridField::finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

double GridField::mass(int it) const {
  const std::int64_t n = slice_size();
  double cell = 1.0;
  for (const auto& a : x_axes) cell *= a.step;
  for (const auto& a : v_axes) cell *= a.step;
  const std::int64_t off = static_cast<std::int64_t>(it) * n;
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double w = 1.0;
    std::int64_t rem = i;
    // border weights on truncated axes (trapezoid rule); periodic axes are
    // uniform because the first node duplicates the wrap point
    for (int k = dv() - 1; k >= 0; --k) {
      const int ik = static_cast<int>(rem % v_axes[k].n);
      rem /= v_axes[k].n;
      if (boundary_v == Boundary::truncated_decay &&
          (ik == 0 || ik == v_axes[k].n - 1))
        w *= 0.5;
    }
    for (int k = dx() - 1; k >= 0; --k) {
      const int ik = static_cast<int>(rem % x_axes[k].n);
      rem /= x_axes[k].n;
      if (boundary_x == Boundary::truncated_decay &&
          (ik == 0 || ik == x_axes[k].n - 1))
        w *= 0.5;
    }
    acc += w * data[static_cast<std::size_t>(off + i)];
  }
  return acc * cell;
}

double GridField::max_abs(int it) const {
  const std::int64_t n = slice_size();
  const std::int64_t off = static_cast<std::int64_t>(it) * n;
  double m = 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    m = std::max(m, std::abs(data[static_cast<std::size_t>(off + i)]));
  return m;
}

GridField make_slice(const std::vector<Axis>& x_axes,
                     const std::vector<Axis>& v_axes) {
  GridField f;
  f.time = Axis{1, 0.0, 0.0};
  f.x_axes = x_axes;
  f.v_axes = v_axes;
  f.allocate();
  return f;
}

namespace {

template <class T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("read_kfp1: truncated file");
  return v;
}

}  // namespace

void write_kfp1(const GridField& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_kfp1: cannot open " + path);
  os.write("KFP1", 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.dx()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.dv()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.time.n));
  for (const auto& a : f.x_axes) put<std::uint32_t>(os, static_cast<std::uint32_t>(a.n));
  for (const auto& a : f.v_axes) put<std::uint32_t>(os, static_cast<std::uint32_t>(a.n));
  put<double>(os, f.time.step);
  for (const auto& a : f.x_axes) put<double>(os, a.step);
  for (const auto& a : f.v_axes) put<double>(os, a.step);
  put<double>(os, f.time.origin);
  for (const auto& a : f.x_axes) put<double>(os, a.origin);
  for (const auto& a : f.v_axes) put<double>(os, a.origin);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(f.boundary_x));
  put<std::uint8_t>(os, static_cast<std::uint8_t>(f.boundary_v));
  os.write(reinterpret_cast<const char*>(f.data.data()),
           static_cast<std::streamsize>(f.data.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write_kfp1: write failed for " + path);
}

GridField read_kfp1(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_kfp1: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "KFP1", 4) != 0)
    throw std::runtime_error("read_kfp1: bad magic");
  GridField f;
  const auto dx = get<std::uint32_t>(is);
  const auto dv = get<std::uint32_t>(is);
  f.time.n = static_cast<int>(get<std::uint32_t>(is));
  f.x_axes.resize(dx);
  f.v_axes.resize(dv);
  for (auto& a : f.x_axes) a.n = static_cast<int>(get<std::uint32_t>(is));
  for (auto& a : f.v_axes) a.n = static_cast<int>(get<std::uint32_t>(is));
  f.time.step = get<double>(is);
  for (auto& a : f.x_axes) a.step = get<double>(is);
  for (auto& a : f.v_axes) a.step = get<double>(is);
  f.time.origin = get<double>(is);
  for (auto& a : f.x_axes) a.origin = get<double>(is);
  for (auto& a : f.v_axes) a.origin = get<double>(is);
  f.boundary_x = static_cast<Boundary>(get<std::uint8_t>(is));
  f.boundary_v = static_cast<Boundary>(get<std::uint8_t>(is));
  f.data.resize(static_cast<std::size_t>(f.size()));
  is.read(reinterpret_cast<char*>(f.data.data()),
          static_cast<std::streamsize>(f.data.size() * sizeof(double)));
  if (!is) throw std::runtime_error("read_kfp1: truncated samples");
  return f;
}

void write_slice_csv(const GridField& f, int it, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_slice_csv: cannot open " + path);
  for (int k = 0; k < f.dx(); ++k) os << "x" << k << ",";
  for (int k = 0; k < f.dv(); ++k) os << "v" << k << ",";
  os << "value\n";
  const std::int64_t n = f.slice_size();
  char buf[32];
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t rem = i;
    int iv[3] = {0, 0, 0}, ix[3] = {0, 0, 0};
    for (int k = f.dv() - 1; k >= 0; --k) {
      iv[k] = static_cast<int>(rem % f.v_axes[k].n);
      rem /= f.v_axes[k].n;
    }
    for (int k = f.dx() - 1; k >= 0; --k) {
      ix[k] = static_cast<int>(rem % f.x_axes[k].n);
      rem /= f.x_axes[k].n;
    }
    for (int k = 0; k < f.dx(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", f.x_axes[k].coord(ix[k]));
      os << buf << ",";
    }
    for (int k = 0; k < f.dv(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", f.v_axes[k].coord(iv[k]));
      os << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", f.at(it, ix, iv));
    os << buf << "\n";
  }
}

}  // namespace kfp
