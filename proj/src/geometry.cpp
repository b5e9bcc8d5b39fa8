#include "dualfluoro/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "dualfluoro/errors.hpp"

namespace dualfluoro {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

double wrap_degrees(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r > 180.0) r -= 360.0;
  if (r <= -180.0) r += 360.0;
  return r;
}

RigidPose RigidPose::normalized() const {
  RigidPose out = *this;
  for (int i = 0; i < 3; ++i) out.theta[i] = wrap_degrees(theta[i]);
  return out;
}

Mat3 RigidPose::rotation() const { return rotation_from_euler_deg(theta); }

Mat3 rotation_from_euler_deg(const Vec3& theta) {
  const Eigen::AngleAxisd rx(theta.x() * kDeg, Vec3::UnitX());
  const Eigen::AngleAxisd ry(theta.y() * kDeg, Vec3::UnitY());
  const Eigen::AngleAxisd rz(theta.z() * kDeg, Vec3::UnitZ());
  return (rx * ry * rz).toRotationMatrix();
}

Vec3 euler_deg_from_rotation(const Mat3& r) {
  // R = Rx(a) Ry(b) Rz(c):
  //   R(0,2) = sin b, R(0,0) = cos b cos c, R(0,1) = -cos b sin c,
  //   R(1,2) = -sin a cos b, R(2,2) = cos a cos b.
  const double sb = std::clamp(r(0, 2), -1.0, 1.0);
  const double cb = std::hypot(r(0, 0), r(0, 1));
  double a = 0.0, b = std::atan2(sb, cb), c = 0.0;
  if (cb > 1e-12) {
    a = std::atan2(-r(1, 2), r(2, 2));
    c = std::atan2(-r(0, 1), r(0, 0));
  } else {
    // Gimbal lock: only a ± c is determined; take c = 0.
    a = std::atan2(r(2, 1), r(1, 1));
  }
  return Vec3(wrap_degrees(a / kDeg), wrap_degrees(b / kDeg), wrap_degrees(c / kDeg));
}

Mat4 pose_to_matrix(const RigidPose& pose) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = pose.rotation();
  m.topRightCorner<3, 1>() = pose.tau;
  return m;
}

RigidPose matrix_to_pose(const Mat4& m) {
  RigidPose p;
  p.theta = euler_deg_from_rotation(m.topLeftCorner<3, 3>());
  p.tau = m.topRightCorner<3, 1>();
  return p;
}

RigidPose compose(const RigidPose& a, const RigidPose& b) {
  return matrix_to_pose(pose_to_matrix(a) * pose_to_matrix(b));
}

RigidPose inverse(const RigidPose& pose) {
  const Mat3 rt = pose.rotation().transpose();
  RigidPose out;
  out.theta = euler_deg_from_rotation(rt);
  out.tau = -(rt * pose.tau);
  return out;
}

FluoroscopeGeometry::FluoroscopeGeometry(const Vec3& source, const Vec3& intensifier_center,
                                         const Vec3& axis_u, const Vec3& axis_v, double half_width,
                                         double half_height, double pixel_pitch)
    : source_(source),
      center_(intensifier_center),
      axis_u_(axis_u),
      axis_v_(axis_v),
      half_width_(half_width),
      half_height_(half_height),
      pixel_pitch_(pixel_pitch) {
  constexpr double tol = 1e-9;
  if (std::abs(axis_u.norm() - 1.0) > tol || std::abs(axis_v.norm() - 1.0) > tol)
    throw Error(ErrorCode::InvalidArgument, "intensifier axes must be unit vectors");
  if (std::abs(axis_u.dot(axis_v)) > tol)
    throw Error(ErrorCode::InvalidArgument, "intensifier axes must be orthogonal");
  if (!(half_width > 0.0) || !(half_height > 0.0) || !(pixel_pitch > 0.0))
    throw Error(ErrorCode::InvalidArgument, "intensifier extents and pixel pitch must be positive");
  if (!(std::abs(normal().dot(source - intensifier_center)) > tol))
    throw Error(ErrorCode::InvalidArgument, "source lies on the intensifier plane");
}

int FluoroscopeGeometry::image_width() const {
  return static_cast<int>(std::lround(2.0 * half_width_ / pixel_pitch_));
}

int FluoroscopeGeometry::image_height() const {
  return static_cast<int>(std::lround(2.0 * half_height_ / pixel_pitch_));
}

Vec2 FluoroscopeGeometry::pixel_to_mm(const Vec2& px) const {
  const Vec2 c(0.5 * (image_width() + 1), 0.5 * (image_height() + 1));
  return (px - c) * pixel_pitch_;
}

Vec2 FluoroscopeGeometry::mm_to_pixel(const Vec2& uv) const {
  const Vec2 c(0.5 * (image_width() + 1), 0.5 * (image_height() + 1));
  return uv / pixel_pitch_ + c;
}

FluoroscopeGeometry FluoroscopeGeometry::transformed(const Mat3& r, const Vec3& t) const {
  FluoroscopeGeometry g = *this;
  g.source_ = r * source_ + t;
  g.center_ = r * center_ + t;
  g.axis_u_ = r * axis_u_;
  g.axis_v_ = r * axis_v_;
  return g;
}

ProjectedPoint project_point(const FluoroscopeGeometry& geom, const Vec3& p) {
  const Vec3 dir = p - geom.source();
  if (dir.norm() == 0.0) throw Error(ErrorCode::DegenerateRay, "point coincides with the source");
  const Vec3 n = geom.normal();
  const double denom = n.dot(dir);
  const double num = n.dot(geom.intensifier_center() - geom.source());
  if (std::abs(denom) <= 1e-12 * dir.norm())
    throw Error(ErrorCode::DegenerateRay, "ray is parallel to the intensifier plane");
  const double t = num / denom;
  if (!(t > 0.0)) throw Error(ErrorCode::DegenerateRay, "point lies behind the source");
  ProjectedPoint out;
  out.landing = geom.source() + t * dir;
  const Vec3 rel = out.landing - geom.intensifier_center();
  out.uv = Vec2(rel.dot(geom.axis_u()), rel.dot(geom.axis_v()));
  return out;
}

bool is_visible(const FluoroscopeGeometry& geom, const Vec2& uv) {
  return std::abs(uv.x()) <= geom.half_width() && std::abs(uv.y()) <= geom.half_height();
}

RigidPose intensifier_pose(const FluoroscopeGeometry& geom) {
  Mat3 r;
  r.col(0) = geom.axis_u();
  r.col(1) = geom.axis_v();
  r.col(2) = geom.normal();
  RigidPose p;
  p.theta = euler_deg_from_rotation(r);
  p.tau = geom.intensifier_center();
  return p;
}

DualFluoroSystem::DualFluoroSystem(const FluoroscopeGeometry& f1, const FluoroscopeGeometry& f2) {
  Mat3 frame;
  frame.col(0) = f1.axis_u();
  frame.col(1) = f1.axis_v();
  frame.col(2) = f1.normal();
  const Mat3 r = frame.transpose();
  const Vec3 t = -(r * f1.intensifier_center());
  f1_ = f1.transformed(r, t);
  f2_ = f2.transformed(r, t);
}

Vec3 system_center(const DualFluoroSystem& system) {
  return 0.25 * (system.f1().source() + system.f1().intensifier_center() + system.f2().source() +
                 system.f2().intensifier_center());
}

}  // namespace dualfluoro
