#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dualfluoro {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Wraps an angle in degrees into (-180, 180].
double wrap_degrees(double deg);

/// Six-DOF rigid pose. Angles are degrees, applied as extrinsic rotations
/// about z, then y, then x, so R = Rx(theta.x) * Ry(theta.y) * Rz(theta.z).
/// tau is the translation (mm) of the model origin in the target frame.
struct RigidPose {
  Vec3 theta = Vec3::Zero();
  Vec3 tau = Vec3::Zero();

  static RigidPose identity() { return {}; }

  /// Angles wrapped into (-180, 180].
  RigidPose normalized() const;

  Mat3 rotation() const;
  Vec3 apply(const Vec3& p) const { return rotation() * p + tau; }
};

Mat3 rotation_from_euler_deg(const Vec3& theta);

/// Inverse of rotation_from_euler_deg. At gimbal lock (|theta.y| = 90) the
/// z angle is set to zero and x absorbs the remaining rotation.
Vec3 euler_deg_from_rotation(const Mat3& r);

/// T(tau) * Rx * Ry * Rz acting on column points.
Mat4 pose_to_matrix(const RigidPose& pose);
RigidPose matrix_to_pose(const Mat4& m);

/// a ∘ b: apply b first, then a.
RigidPose compose(const RigidPose& a, const RigidPose& b);
RigidPose inverse(const RigidPose& pose);

/// Point-source fluoroscope: X-ray source and a flat rectangular intensifier.
/// Intensifier coordinates (u, v) are mm along axis_u / axis_v from the center.
class FluoroscopeGeometry {
 public:
  FluoroscopeGeometry() = default;
  /// Throws InvalidArgument unless the axes are orthonormal (to 1e-9), the
  /// extents and pitch are positive, and the source is off the plane.
  FluoroscopeGeometry(const Vec3& source, const Vec3& intensifier_center, const Vec3& axis_u,
                      const Vec3& axis_v, double half_width, double half_height, double pixel_pitch);

  const Vec3& source() const { return source_; }
  const Vec3& intensifier_center() const { return center_; }
  const Vec3& axis_u() const { return axis_u_; }
  const Vec3& axis_v() const { return axis_v_; }
  /// axis_u × axis_v.
  Vec3 normal() const { return axis_u_.cross(axis_v_); }
  double half_width() const { return half_width_; }
  double half_height() const { return half_height_; }
  double pixel_pitch() const { return pixel_pitch_; }

  /// Intensifier image size in whole pixels.
  int image_width() const;
  int image_height() const;

  /// 3D point on the intensifier plane for in-plane coordinates (mm).
  Vec3 plane_point(const Vec2& uv) const { return center_ + uv.x() * axis_u_ + uv.y() * axis_v_; }

  /// 1-based pixel-center coordinates <-> intensifier mm. Column grows along
  /// axis_u and row along axis_v; the image center maps to (0, 0).
  Vec2 pixel_to_mm(const Vec2& px) const;
  Vec2 mm_to_pixel(const Vec2& uv) const;

  /// Same geometry moved by a rigid transform.
  FluoroscopeGeometry transformed(const Mat3& r, const Vec3& t) const;

 private:
  Vec3 source_ = Vec3(0, 0, 1);
  Vec3 center_ = Vec3::Zero();
  Vec3 axis_u_ = Vec3::UnitX();
  Vec3 axis_v_ = Vec3::UnitY();
  double half_width_ = 1.0;
  double half_height_ = 1.0;
  double pixel_pitch_ = 1.0;
};

struct ProjectedPoint {
  Vec2 uv;       // intensifier coordinates, mm
  Vec3 landing;  // 3D point on the intensifier plane
};

/// Central projection of p from the source onto the intensifier plane.
/// Throws DegenerateRay when p is the source, the ray is parallel to the
/// plane, or p lies behind the source (the plane is not ahead of the ray).
ProjectedPoint project_point(const FluoroscopeGeometry& geom, const Vec3& p);

/// Closed field of view: |u| <= half_width and |v| <= half_height.
bool is_visible(const FluoroscopeGeometry& geom, const Vec2& uv);

/// Two fluoroscopes expressed in a global frame whose origin is the F1
/// intensifier center and whose axes are F1's (axis_u, axis_v, normal).
class DualFluoroSystem {
 public:
  DualFluoroSystem() = default;
  /// Re-expresses both geometries in the F1-anchored frame.
  DualFluoroSystem(const FluoroscopeGeometry& f1, const FluoroscopeGeometry& f2);

  const FluoroscopeGeometry& f1() const { return f1_; }
  const FluoroscopeGeometry& f2() const { return f2_; }
  const FluoroscopeGeometry& view(int i) const { return i == 0 ? f1_ : f2_; }

 private:
  FluoroscopeGeometry f1_;
  FluoroscopeGeometry f2_;
};

/// Mean of both sources and both intensifier centers; the registration start.
Vec3 system_center(const DualFluoroSystem& system);

/// F2's intensifier frame as a pose in the global frame: rotation columns are
/// (axis_u, axis_v, normal), translation is the intensifier center.
RigidPose intensifier_pose(const FluoroscopeGeometry& geom);

}  // namespace dualfluoro
