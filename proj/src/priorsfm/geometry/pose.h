#ifndef PRIORSFM_GEOMETRY_POSE_H_
#define PRIORSFM_GEOMETRY_POSE_H_

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace priorsfm {

// Rigid world-to-camera transform: x_cam = R(q) * x_world + t. The quaternion
// is kept normalized (within 1e-9) after every construction and update.
struct PoseSE3 {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  PoseSE3() = default;
  PoseSE3(const Eigen::Quaterniond& q_in, const Eigen::Vector3d& t_in);
  PoseSE3(const Eigen::Matrix3d& r, const Eigen::Vector3d& t_in);

  static PoseSE3 Identity() { return PoseSE3(); }

  Eigen::Matrix3d R() const { return q.toRotationMatrix(); }

  // 3x4 matrix [R | t].
  Eigen::Matrix<double, 3, 4> Matrix() const;

  Eigen::Vector3d Apply(const Eigen::Vector3d& x_world) const {
    return q * x_world + t;
  }

  // Camera center in world coordinates: -R^T t.
  Eigen::Vector3d Center() const { return q.conjugate() * (-t); }

  PoseSE3 Inverse() const;

  // Composition: (a * b) maps x through b first, then a.
  PoseSE3 operator*(const PoseSE3& other) const;

  // Left-multiplicative update by a small rotation delta (axis-angle, radians)
  // and translation delta: R <- exp([dr]x) R, t <- t + dt. Used by the
  // optimizers; renormalizes the quaternion.
  void Retract(const Eigen::Vector3d& dr, const Eigen::Vector3d& dt);
};

// Rotation angle of the relative rotation between two poses, in radians.
double RotationAngleBetween(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

// Angle between two direction vectors in radians, robust near 0 and pi.
// Returns 0 if either vector is numerically zero.
double AngleBetweenDirections(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

}  // namespace priorsfm

#endif  // PRIORSFM_GEOMETRY_POSE_H_
