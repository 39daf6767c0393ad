#include "slimmatch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "slimmatch/errors.hpp"

namespace slimmatch {

double norm(Point2 p) { return std::hypot(p.x, p.y); }

namespace {

Eigen::Matrix3d normalized(const Eigen::Matrix3d& m) {
  if (std::abs(m(2, 2)) > 0.0) return m / m(2, 2);
  return m;
}

}  // namespace

Homography::Homography() : m_(Eigen::Matrix3d::Identity()) {}

Homography::Homography(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw GeometryError("homography has non-finite entries");
  m_ = normalized(m);
  if (std::abs(m_.determinant()) <= 1e-12) {
    throw GeometryError("homography is singular (|det| <= 1e-12)");
  }
}

Homography Homography::from_values(std::span<const double> values) {
  if (values.size() != 9) throw GeometryError("homography needs 9 values");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = values[static_cast<std::size_t>(r * 3 + c)];
  return Homography(m);
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::scaling(double s) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = s;
  m(1, 1) = s;
  return Homography(m);
}

std::array<double, 9> Homography::values() const {
  std::array<double, 9> v{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v[static_cast<std::size_t>(r * 3 + c)] = m_(r, c);
  return v;
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

Homography operator*(const Homography& a, const Homography& b) { return Homography(a.m_ * b.m_); }

Point2 Homography::apply(Point2 p) const {
  const Eigen::Vector3d q = m_ * Eigen::Vector3d(p.x, p.y, 1.0);
  if (std::abs(q.z()) <= 1e-12) throw GeometryError("point maps to infinity");
  return {q.x() / q.z(), q.y() / q.z()};
}

Point2 homography_apply(const Homography& h, Point2 p) { return h.apply(p); }

namespace {

// Similarity that moves the centroid to the origin and the mean distance to sqrt(2).
Eigen::Matrix3d hartley_transform(std::span<const Point2> pts) {
  double cx = 0, cy = 0;
  for (auto p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0;
  for (auto p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  if (mean_dist <= 1e-15) throw GeometryError("homography_dlt: all points coincide");
  const double s = std::numbers::sqrt2 / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

bool collinear(Point2 a, Point2 b, Point2 c) {
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double scale = std::max({norm(b - a) * norm(c - a), 1e-300});
  return std::abs(cross) / scale < 1e-10;
}

}  // namespace

Homography homography_dlt(std::span<const std::pair<Point2, Point2>> pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) throw GeometryError("homography_dlt: need at least 4 correspondences");
  std::vector<Point2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = pairs[i].first;
    dst[i] = pairs[i].second;
  }
  if (n == 4) {
    for (const auto* pts : {&src, &dst}) {
      const auto& p = *pts;
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b)
          for (std::size_t c = b + 1; c < 4; ++c)
            if (collinear(p[a], p[b], p[c])) {
              throw GeometryError("homography_dlt: degenerate configuration (collinear points)");
            }
    }
  }
  const Eigen::Matrix3d ts = hartley_transform(src);
  const Eigen::Matrix3d td = hartley_transform(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d q = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    const Eigen::Index r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(r + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Rank < 8 leaves at least two (near-)zero singular values.
  if (sv.size() < 8 || sv(7) <= 1e-10 * sv(0)) {
    throw GeometryError("homography_dlt: degenerate configuration (rank < 8)");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography(td.inverse() * hn * ts);
}

double homography_distance(const Homography& a, const Homography& b) {
  Eigen::Matrix3d ma = a.matrix() / a.matrix().norm();
  Eigen::Matrix3d mb = b.matrix() / b.matrix().norm();
  if ((ma.array() * mb.array()).sum() < 0) mb = -mb;
  return (ma - mb).cwiseAbs().maxCoeff();
}

namespace {

double clamped_acos_deg(double v) {
  return std::acos(std::clamp(v, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

void require_rotation(const Eigen::Matrix3d& r, const char* name) {
  const double err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= 1e-6)) {
    throw GeometryError(std::string("pose_error: ") + name + " is not orthonormal");
  }
}

}  // namespace

PoseDelta pose_error(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                     const Eigen::Matrix3d& r_est, const Eigen::Vector3d& t_est) {
  require_rotation(r, "R");
  require_rotation(r_est, "R_est");
  const double nt = t.norm(), ne = t_est.norm();
  if (nt <= 0.0 || ne <= 0.0) throw GeometryError("pose_error: zero-norm translation");
  PoseDelta d;
  d.translation_deg = clamped_acos_deg(t_est.dot(t) / (ne * nt));
  d.rotation_deg = clamped_acos_deg(((r_est.transpose() * r).trace() - 1.0) / 2.0);
  return d;
}

Eigen::Matrix3d rotation_about_axis(const Eigen::Vector3d& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

}  // namespace slimmatch
