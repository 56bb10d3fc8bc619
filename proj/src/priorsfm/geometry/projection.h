#ifndef PRIORSFM_GEOMETRY_PROJECTION_H_
#define PRIORSFM_GEOMETRY_PROJECTION_H_

#include <Eigen/Core>

#include "priorsfm/geometry/intrinsics.h"
#include "priorsfm/geometry/pose.h"

namespace priorsfm {

// Projects a world point into an image. Throws CheiralityError when the point
// lies at or behind the camera plane (camera depth <= 0).
Eigen::Vector2d Project(const CameraIntrinsics& intrinsics, const PoseSE3& pose,
                        const Eigen::Vector3d& x_world);

// Depth of a world point along the camera's optical axis: (R x + t).z().
// Negative values mean the point is behind the camera.
double CameraDepth(const PoseSE3& pose, const Eigen::Vector3d& x_world);

// Back-projects a pixel at a given depth into world coordinates. Throws
// InvalidDepthError for non-positive or non-finite depth.
Eigen::Vector3d Lift(const CameraIntrinsics& intrinsics, const PoseSE3& pose,
                     const Eigen::Vector2d& px, double depth);

// Variance of a world point's camera depth under the point's positional
// covariance: r3 Sigma r3^T with r3 the third row of the rotation. The pose
// itself is treated as certain.
double PointDepthVariance(const PoseSE3& pose, const Eigen::Matrix3d& covariance);

}  // namespace priorsfm

#endif  // PRIORSFM_GEOMETRY_PROJECTION_H_
