#include "kfp/geometry.hpp"

#include <stdexcept>

namespace kfp {

KineticPoint::KineticPoint(double t_, Eigen::VectorXd x_, Eigen::VectorXd v_)
    : t(t_), x(std::move(x_)), v(std::move(v_)) {
  if (x.size() != v.size() || x.size() < 1)
    throw std::invalid_argument("KineticPoint: x and v must share dimension d >= 1");
}

KineticPoint KineticPoint::origin(int d) {
  return KineticPoint(0.0, Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d));
}

bool operator==(const KineticPoint& a, const KineticPoint& b) {
  return a.t == b.t && a.x == b.x && a.v == b.v;
}

namespace {
void check_dims(const KineticPoint& a, const KineticPoint& b,
                const char* who) {
  if (a.dim() != b.dim())
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}
}  // namespace

KineticPoint compose(const KineticPoint& a, const KineticPoint& b) {
  check_dims(a, b, "compose");
  return KineticPoint(a.t + b.t, a.x + b.x + b.t * a.v, a.v + b.v);
}

KineticPoint invert_into(const KineticPoint& a, const KineticPoint& b) {
  check_dims(a, b, "invert_into");
  const double dt = b.t - a.t;
  return KineticPoint(dt, b.x - a.x - dt * a.v, b.v - a.v);
}

KineticPoint kinetic_scale(const KineticPoint& z, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("kinetic_scale: r must be > 0");
  return KineticPoint(r * r * z.t, r * r * r * z.x, r * z.v);
}

KineticCylinder::KineticCylinder(double r, KineticPoint z0)
    : radius(r), center(std::move(z0)) {
  if (!(r > 0.0)) throw std::invalid_argument("KineticCylinder: radius must be > 0");
}

KineticCylinder::KineticCylinder(double r, int d)
    : KineticCylinder(r, KineticPoint::origin(d)) {}

bool KineticCylinder::contains(const KineticPoint& z) const {
  check_dims(center, z, "KineticCylinder::contains");
  const double r = radius;
  const double dt = z.t - center.t;
  if (!(dt > -r * r && dt <= 0.0)) return false;
  const Eigen::VectorXd slant = z.x - center.x - dt * center.v;
  if (!(slant.norm() < r * r * r)) return false;
  return (z.v - center.v).norm() < r;
}

}  // namespace kfp
