#ifndef PRIORSFM_ESTIMATION_ABSOLUTE_POSE_H_
#define PRIORSFM_ESTIMATION_ABSOLUTE_POSE_H_

#include <vector>

#include <Eigen/Core>

#include "priorsfm/estimation/ransac.h"
#include "priorsfm/geometry/intrinsics.h"

namespace priorsfm {

// A 2D-3D match for absolute pose estimation. depth_variance carries the
// uncertainty of the 3D point along its viewing ray (0 = treat as exact);
// uncertain points get proportionally less weight during refinement.
struct Observation2D3D {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double depth_variance = 0.0;
};

struct AbsolutePoseOptions {
  // Reprojection inlier threshold, pixels.
  double max_error_px = 8.0;
  double confidence = 0.9999;
  int max_iterations = 10000;
  int min_inliers = 12;
};

// Robust absolute (world-to-camera) pose: P3P minimal solver inside RANSAC
// with reprojection scoring, then damped Gauss-Newton refinement on the
// consensus set. Points projecting behind the camera are outliers. Throws
// InsufficientMatches below 4 observations; an unmet min_inliers leaves
// success false.
RansacResult EstimateAbsolutePose(const CameraIntrinsics& cam,
                                  const std::vector<Observation2D3D>& observations,
                                  const AbsolutePoseOptions& options, Rng& rng);

}  // namespace priorsfm

#endif  // PRIORSFM_ESTIMATION_ABSOLUTE_POSE_H_
