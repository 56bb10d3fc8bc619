#ifndef PRIORSFM_GEOMETRY_INTRINSICS_H_
#define PRIORSFM_GEOMETRY_INTRINSICS_H_

#include <Eigen/Core>

namespace priorsfm {

// Pinhole camera without distortion. Pixel (u, v) at depth d corresponds to
// the camera-frame point ((u - cx) d / fx, (v - cy) d / fy, d); the camera
// looks down +z.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Eigen::Matrix3d K() const {
    Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
    k(0, 0) = fx;
    k(1, 1) = fy;
    k(0, 2) = cx;
    k(1, 2) = cy;
    return k;
  }

  // Unit-depth ray direction through a pixel, in the camera frame.
  Eigen::Vector3d Ray(const Eigen::Vector2d& px) const {
    return {(px.x() - cx) / fx, (px.y() - cy) / fy, 1.0};
  }

  // Perspective division of a camera-frame point onto the image plane.
  // The caller is responsible for checking that p.z() > 0.
  Eigen::Vector2d PixelFromCamera(const Eigen::Vector3d& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }

  bool InBounds(const Eigen::Vector2d& px) const {
    return px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= width - 1.0 &&
           px.y() <= height - 1.0;
  }
};

}  // namespace priorsfm

#endif  // PRIORSFM_GEOMETRY_INTRINSICS_H_
