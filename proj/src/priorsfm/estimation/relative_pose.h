#ifndef PRIORSFM_ESTIMATION_RELATIVE_POSE_H_
#define PRIORSFM_ESTIMATION_RELATIVE_POSE_H_

#include <vector>

#include <Eigen/Core>

#include "priorsfm/estimation/ransac.h"
#include "priorsfm/geometry/intrinsics.h"

namespace priorsfm {

struct RelativePoseOptions {
  // Sampson distance inlier threshold, pixels.
  double max_sampson_px = 4.0;
  double confidence = 0.9999;
  int max_iterations = 10000;
  int min_inliers = 15;
  // Median triangulation angle over inliers below which the pair is not
  // considered a stable two-view geometry.
  double min_parallax_deg = 1.5;
};

struct RelativePoseReport {
  // pose = T_ba (x_b = R x_a + t) with unit-norm translation.
  RansacResult ransac;
  // Median triangulation angle over cheirality-positive inliers, degrees.
  double median_parallax_deg = 0.0;
  // Inlier count and parallax both above their thresholds.
  bool stable = false;
  // Every decomposition candidate of the best model failed cheirality.
  bool degenerate = false;
};

// Robust relative pose from 2D-2D pixel correspondences: RANSAC over the
// eight-point essential matrix with Sampson scoring, final re-fit on the
// consensus set, cheirality-based decomposition, and a parallax report.
// Throws InsufficientMatches below 8 correspondences.
RelativePoseReport EstimateRelativePose(const CameraIntrinsics& cam_a,
                                        const CameraIntrinsics& cam_b,
                                        const std::vector<Eigen::Vector2d>& pixels_a,
                                        const std::vector<Eigen::Vector2d>& pixels_b,
                                        const RelativePoseOptions& options,
                                        Rng& rng);

}  // namespace priorsfm

#endif  // PRIORSFM_ESTIMATION_RELATIVE_POSE_H_
