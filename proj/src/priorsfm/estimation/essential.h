#ifndef PRIORSFM_ESTIMATION_ESSENTIAL_H_
#define PRIORSFM_ESTIMATION_ESSENTIAL_H_

#include <vector>

#include <Eigen/Core>

#include "priorsfm/geometry/pose.h"

namespace priorsfm {

// Eight-point essential matrix from unit-depth camera-frame correspondences
// satisfying xb^T E xa = 0. Hartley-normalizes internally and projects the
// linear solution onto the essential manifold (singular values 1, 1, 0).
// Returns false when the system is rank-deficient.
bool EssentialEightPoint(const std::vector<Eigen::Vector2d>& xa,
                         const std::vector<Eigen::Vector2d>& xb,
                         Eigen::Matrix3d* essential);

// Squared Sampson distance of a pixel correspondence under the fundamental
// matrix f (first-order geometric error, in squared pixels).
double SampsonSquaredPx(const Eigen::Matrix3d& f, const Eigen::Vector2d& ua,
                        const Eigen::Vector2d& ub);

// F = Kb^-T E Ka^-1, mapping pixel coordinates to pixel-space epipolar lines.
Eigen::Matrix3d FundamentalFromEssential(const Eigen::Matrix3d& essential,
                                         const Eigen::Matrix3d& ka,
                                         const Eigen::Matrix3d& kb);

// Picks the (R, t) decomposition of E with the most inlier points passing the
// cheirality test in both views; t is unit-norm, x_b = R x_a + t. Returns the
// number of points in front of both cameras for the winning candidate (0 means
// every candidate failed and pose_ba is untouched).
int DecomposeEssential(const Eigen::Matrix3d& essential,
                       const std::vector<Eigen::Vector2d>& xa,
                       const std::vector<Eigen::Vector2d>& xb,
                       const std::vector<char>& inlier_mask, PoseSE3* pose_ba);

}  // namespace priorsfm

#endif  // PRIORSFM_ESTIMATION_ESSENTIAL_H_
