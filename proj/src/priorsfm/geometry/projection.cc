#include "priorsfm/geometry/projection.h"

#include <cmath>

#include "priorsfm/util/errors.h"

namespace priorsfm {

Eigen::Vector2d Project(const CameraIntrinsics& intrinsics, const PoseSE3& pose,
                        const Eigen::Vector3d& x_world) {
  const Eigen::Vector3d x_cam = pose.Apply(x_world);
  if (!(x_cam.z() > 0.0)) {
    throw CheiralityError("projection of a point at or behind the camera");
  }
  return intrinsics.PixelFromCamera(x_cam);
}

double CameraDepth(const PoseSE3& pose, const Eigen::Vector3d& x_world) {
  return pose.Apply(x_world).z();
}

Eigen::Vector3d Lift(const CameraIntrinsics& intrinsics, const PoseSE3& pose,
                     const Eigen::Vector2d& px, double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw InvalidDepthError("lift requires a positive finite depth");
  }
  const Eigen::Vector3d x_cam = intrinsics.Ray(px) * depth;
  return pose.Inverse().Apply(x_cam);
}

double PointDepthVariance(const PoseSE3& pose, const Eigen::Matrix3d& covariance) {
  const Eigen::Vector3d r3 = pose.R().row(2).transpose();
  return r3.dot(covariance * r3);
}

}  // namespace priorsfm
