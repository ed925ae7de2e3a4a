#pragma once

#include <Eigen/Dense>

namespace kfp {

// A phase-space event z = (t, x, v). x and v share the dimension d.
struct KineticPoint {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd v;

  KineticPoint() = default;
  KineticPoint(double t_, Eigen::VectorXd x_, Eigen::VectorXd v_);

  int dim() const { return static_cast<int>(x.size()); }

  static KineticPoint origin(int d);
};

bool operator==(const KineticPoint& a, const KineticPoint& b);

// Galilean group product a o b = (a.t + b.t, a.x + b.x + b.t * a.v, a.v + b.v).
KineticPoint compose(const KineticPoint& a, const KineticPoint& b);

// a^{-1} o b = (b.t - a.t, b.x - a.x - (b.t - a.t) a.v, b.v - a.v).
KineticPoint invert_into(const KineticPoint& a, const KineticPoint& b);

// Kinetic dilation z_r = (r^2 t, r^3 x, r v), r > 0.
KineticPoint kinetic_scale(const KineticPoint& z, double r);

// Q_r(z0): time in (t0 - r^2, t0], slanted x-ball of radius r^3, v-ball of
// radius r. All spatial balls open, time interval half-open.
struct KineticCylinder {
  double radius;
  KineticPoint center;

  KineticCylinder(double r, KineticPoint z0);
  explicit KineticCylinder(double r, int d = 1);

  bool contains(const KineticPoint& z) const;
};

}  // namespace kfp
