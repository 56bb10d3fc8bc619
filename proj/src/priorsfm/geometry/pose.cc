#include "priorsfm/geometry/pose.h"

#include <algorithm>
#include <cmath>

namespace priorsfm {

PoseSE3::PoseSE3(const Eigen::Quaterniond& q_in, const Eigen::Vector3d& t_in)
    : q(q_in.normalized()), t(t_in) {}

PoseSE3::PoseSE3(const Eigen::Matrix3d& r, const Eigen::Vector3d& t_in)
    : q(Eigen::Quaterniond(r).normalized()), t(t_in) {}

Eigen::Matrix<double, 3, 4> PoseSE3::Matrix() const {
  Eigen::Matrix<double, 3, 4> m;
  m.leftCols<3>() = R();
  m.col(3) = t;
  return m;
}

PoseSE3 PoseSE3::Inverse() const {
  const Eigen::Quaterniond q_inv = q.conjugate();
  return PoseSE3(q_inv, q_inv * (-t));
}

PoseSE3 PoseSE3::operator*(const PoseSE3& other) const {
  return PoseSE3(q * other.q, q * other.t + t);
}

void PoseSE3::Retract(const Eigen::Vector3d& dr, const Eigen::Vector3d& dt) {
  const double angle = dr.norm();
  Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
  if (angle > 0.0) {
    dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, dr / angle));
  }
  q = (dq * q).normalized();
  t += dt;
}

double RotationAngleBetween(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  // Hemisphere-align for the double cover, then use
  // tan(angle/4) = |a - b| / |a + b|: exact at 0 and pi, and conditioned
  // where acos of the dot product loses half the digits.
  const Eigen::Vector4d pa = a.coeffs();
  const Eigen::Vector4d pb = a.dot(b) >= 0.0 ? b.coeffs() : (-b.coeffs()).eval();
  return 4.0 * std::atan2((pa - pb).norm(), (pa + pb).norm());
}

double AngleBetweenDirections(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    return 0.0;
  }
  // atan2 of cross/dot is stable for both tiny and near-pi angles.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace priorsfm
