#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace slimmatch {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
double norm(Point2 p);

// Planar projective transform in pixel-index coordinates. Stored normalized so
// the bottom-right entry is 1 whenever it is non-zero. Construction rejects
// matrices with |det| <= 1e-12.
class Homography {
 public:
  Homography();  // identity
  explicit Homography(const Eigen::Matrix3d& m);
  // Nine row-major values.
  static Homography from_values(std::span<const double> values);
  static Homography translation(double tx, double ty);
  static Homography scaling(double s);

  const Eigen::Matrix3d& matrix() const { return m_; }
  std::array<double, 9> values() const;
  Homography inverse() const;
  // (a * b)(p) == a(b(p))
  friend Homography operator*(const Homography& a, const Homography& b);

  // Throws GeometryError when the point maps to infinity.
  Point2 apply(Point2 p) const;

 private:
  Eigen::Matrix3d m_;
};

Point2 homography_apply(const Homography& h, Point2 p);

// Hartley-normalized DLT over >= 4 correspondences (first maps to second).
// Throws GeometryError on degenerate input.
Homography homography_dlt(std::span<const std::pair<Point2, Point2>> pairs);

// Max-abs difference of two homographies after scaling both to unit
// Frobenius norm with matching sign.
double homography_distance(const Homography& a, const Homography& b);

struct PoseDelta {
  double rotation_deg = 0.0;
  double translation_deg = 0.0;
  double max_deg() const { return rotation_deg > translation_deg ? rotation_deg : translation_deg; }
};

// Angular rotation and translation-direction errors between a reference pose
// (R, t) and an estimate (R_est, t_est). R matrices must be orthonormal to 1e-6.
PoseDelta pose_error(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                     const Eigen::Matrix3d& r_est, const Eigen::Vector3d& t_est);

Eigen::Matrix3d rotation_about_axis(const Eigen::Vector3d& axis, double angle_rad);

}  // namespace slimmatch
