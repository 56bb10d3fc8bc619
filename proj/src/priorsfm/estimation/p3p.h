#ifndef PRIORSFM_ESTIMATION_P3P_H_
#define PRIORSFM_ESTIMATION_P3P_H_

#include <array>
#include <vector>

#include <Eigen/Core>

#include "priorsfm/geometry/pose.h"

namespace priorsfm {

// Minimal absolute-pose solver (Kneip's intermediate-frame formulation).
// Takes three world points and the matching unit bearing vectors in the
// camera frame and returns up to four world-to-camera pose candidates.
// Degenerate inputs (collinear world points, near-parallel bearings) yield an
// empty list.
std::vector<PoseSE3> SolveP3P(const std::array<Eigen::Vector3d, 3>& world,
                              const std::array<Eigen::Vector3d, 3>& bearings);

}  // namespace priorsfm

#endif  // PRIORSFM_ESTIMATION_P3P_H_
