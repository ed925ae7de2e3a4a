#include "kfp/profile.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "kfp/rng.hpp"

namespace kfp {

using nlohmann::json;

namespace {

void check_spd_window(const Eigen::MatrixXd& m, double lambda,
                      const char* what) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(what) + ": matrix not square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument(std::string(what) +
                                ": matrix not symmetric to 1e-12");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo >= 1.0 / lambda - 1e-12 && hi <= lambda + 1e-12))
    throw std::invalid_argument(
        std::string(what) + ": eigenvalues violate the ellipticity window");
}

Eigen::MatrixXd parse_matrix(const json& j) {
  if (j.is_number()) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = j.get<double>();
    return m;
  }
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("profile JSON: matrix must be number or array");
  if (j[0].is_number()) {  // flat vector -> diagonal
    const int d = static_cast<int>(j.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) m(i, i) = j[i].get<double>();
    return m;
  }
  const int d = static_cast<int>(j.size());
  Eigen::MatrixXd m(d, d);
  for (int r = 0; r < d; ++r) {
    if (static_cast<int>(j[r].size()) != d)
      throw std::invalid_argument("profile JSON: ragged matrix");
    for (int c = 0; c < d; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

void TimeMatrixProfile::validate() const {
  if (lambda_ < 1.0)
    throw std::invalid_argument("TimeMatrixProfile: lambda must be >= 1");
  if (dim_ < 1) throw std::invalid_argument("TimeMatrixProfile: dim must be >= 1");
  for (const auto& m : matrices_) check_spd_window(m, lambda_, "TimeMatrixProfile");
  if (!breakpoints_.empty()) {
    if (!std::is_sorted(breakpoints_.begin(), breakpoints_.end()))
      throw std::invalid_argument("TimeMatrixProfile: breakpoints not increasing");
    if (matrices_.size() != breakpoints_.size() + 1)
      throw std::invalid_argument(
          "TimeMatrixProfile: need one matrix per segment (breakpoints+1)");
  }
}

TimeMatrixProfile TimeMatrixProfile::constant(Eigen::MatrixXd a, double lambda) {
  TimeMatrixProfile p;
  p.kind_ = Kind::constant;
  p.dim_ = static_cast<int>(a.rows());
  p.lambda_ = lambda;
  p.matrices_.push_back(std::move(a));
  p.validate();
  return p;
}

TimeMatrixProfile TimeMatrixProfile::piecewise(
    std::vector<double> breakpoints, std::vector<Eigen::MatrixXd> matrices,
    double lambda) {
  if (matrices.empty())
    throw std::invalid_argument("TimeMatrixProfile::piecewise: no matrices");
  TimeMatrixProfile p;
  p.kind_ = breakpoints.empty() ? Kind::constant : Kind::piecewise;
  p.dim_ = static_cast<int>(matrices[0].rows());
  p.lambda_ = lambda;
  p.breakpoints_ = std::move(breakpoints);
  p.matrices_ = std::move(matrices);
  p.validate();
  return p;
}

TimeMatrixProfile TimeMatrixProfile::smooth(
    std::function<Eigen::MatrixXd(double)> fn, int dim, double lambda,
    std::function<Eigen::MatrixXd(double)> dfn) {
  if (!fn) throw std::invalid_argument("TimeMatrixProfile::smooth: null callable");
  TimeMatrixProfile p;
  p.kind_ = Kind::smooth;
  p.dim_ = dim;
  p.lambda_ = lambda;
  p.fn_ = std::move(fn);
  p.dfn_ = std::move(dfn);
  p.validate();
  return p;
}

TimeMatrixProfile TimeMatrixProfile::seeded_random(std::uint64_t seed,
                                                   int segments, int dim,
                                                   double lambda,
                                                   double t_max) {
  if (segments < 1)
    throw std::invalid_argument("seeded_random: segments must be >= 1");
  CounterRng rng(seed);
  const auto bp_stream = CounterRng::stream("profile-breakpoints");
  const auto eig_stream = CounterRng::stream("profile-eigenvalues");
  const auto rot_stream = CounterRng::stream("profile-rotations");

  // breakpoints log-uniform over five decades below t_max: the profile is
  // rough at every scale a scan visits, not just near t_max
  std::vector<double> bps;
  for (int k = 0; k + 1 < segments; ++k)
    bps.push_back(t_max *
                  std::pow(10.0, rng.uniform(bp_stream, k, -5.0, 0.0)));
  std::sort(bps.begin(), bps.end());

  const double log_lo = std::log(1.0 / lambda) * 0.999;
  const double log_hi = std::log(lambda) * 0.999;
  std::vector<Eigen::MatrixXd> mats;
  for (int k = 0; k < segments; ++k) {
    Eigen::VectorXd eig(dim);
    for (int i = 0; i < dim; ++i)
      eig(i) = std::exp(rng.uniform(eig_stream, k * dim + i, log_lo, log_hi));
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(dim, dim);
    if (dim > 1) {
      Eigen::MatrixXd g(dim, dim);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
          g(r, c) = rng.normal(rot_stream, (k * dim + r) * dim + c);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
      q = qr.householderQ();
    }
    Eigen::MatrixXd m = q * eig.asDiagonal() * q.transpose();
    m = 0.5 * (m + m.transpose());  // kill roundoff asymmetry
    mats.push_back(std::move(m));
  }

  TimeMatrixProfile p = piecewise(std::move(bps), std::move(mats), lambda);
  p.kind_ = segments == 1 ? Kind::constant : Kind::seeded;
  p.seed_ = seed;
  p.segments_ = segments;
  p.t_max_ = t_max;
  return p;
}

Eigen::MatrixXd TimeMatrixProfile::value(double t) const {
  if (kind_ == Kind::smooth) return fn_(t);
  if (breakpoints_.empty()) return matrices_[0];
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  return matrices_[static_cast<std::size_t>(it - breakpoints_.begin())];
}

Eigen::MatrixXd TimeMatrixProfile::derivative(double t) const {
  if (kind_ != Kind::smooth) return Eigen::MatrixXd::Zero(dim_, dim_);
  if (!dfn_)
    throw std::runtime_error(
        "TimeMatrixProfile::derivative: smooth profile lacks da/dt");
  return dfn_(t);
}

bool TimeMatrixProfile::constant_in_time() const {
  return kind_ == Kind::constant ||
         (kind_ != Kind::smooth && breakpoints_.empty());
}

double TimeMatrixProfile::breakpoint_distance(double t) const {
  if (breakpoints_.empty())
    return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (double b : breakpoints_) best = std::min(best, std::abs(t - b));
  return best;
}

Eigen::MatrixXd TimeMatrixProfile::moment_integral_exact(int i,
                                                         double t) const {
  if (kind_ == Kind::smooth)
    throw std::logic_error("moment_integral_exact: profile is not piecewise");
  if (i < 0 || i > 2)
    throw std::invalid_argument("moment_integral_exact: i must be 0, 1, or 2");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim_, dim_);
  auto prim = [i](double s) { return std::pow(s, i + 1) / (i + 1.0); };
  double lo = 0.0;
  for (std::size_t k = 0; k <= breakpoints_.size(); ++k) {
    const double hi =
        k < breakpoints_.size() ? std::min(breakpoints_[k], t) : t;
    if (hi > lo) acc += (prim(hi) - prim(lo)) * matrices_[k];
    if (k < breakpoints_.size()) {
      if (breakpoints_[k] >= t) break;
      lo = std::max(lo, breakpoints_[k]);
    }
  }
  return acc;
}

TimeMatrixProfile TimeMatrixProfile::from_json(const std::string& text) {
  json j = json::parse(text);
  const std::string kind = j.at("kind").get<std::string>();
  const double lambda = j.value("lambda", 1.0);
  if (kind == "constant") {
    return constant(parse_matrix(j.at("matrix")), lambda);
  }
  if (kind == "piecewise") {
    std::vector<double> bps = j.at("breakpoints").get<std::vector<double>>();
    std::vector<Eigen::MatrixXd> mats;
    for (const auto& mj : j.at("matrices")) mats.push_back(parse_matrix(mj));
    return piecewise(std::move(bps), std::move(mats), lambda);
  }
  if (kind == "seeded") {
    return seeded_random(j.at("seed").get<std::uint64_t>(),
                         j.at("segments").get<int>(), j.value("dim", 1),
                         lambda, j.value("t_max", 1.0));
  }
  throw std::invalid_argument("profile JSON: unknown kind '" + kind + "'");
}

std::string TimeMatrixProfile::to_json() const {
  json j;
  j["lambda"] = lambda_;
  switch (kind_) {
    case Kind::constant:
      j["kind"] = "constant";
      j["matrix"] = matrix_to_json(matrices_[0]);
      break;
    case Kind::piecewise:
      j["kind"] = "piecewise";
      j["breakpoints"] = breakpoints_;
      {
        json mats = json::array();
        for (const auto& m : matrices_) mats.push_back(matrix_to_json(m));
        j["matrices"] = mats;
      }
      break;
    case Kind::seeded:
      j["kind"] = "seeded";
      j["seed"] = seed_;
      j["segments"] = segments_;
      j["dim"] = dim_;
      j["t_max"] = t_max_;
      break;
    case Kind::smooth:
      throw std::logic_error("to_json: smooth profiles are not serializable");
  }
  return j.dump();
}

}  // namespace kfp
