#ifndef PRIORSFM_ESTIMATION_RANSAC_H_
#define PRIORSFM_ESTIMATION_RANSAC_H_

#include <vector>

#include "priorsfm/geometry/pose.h"
#include "priorsfm/util/rng.h"

namespace priorsfm {

// Outcome of a robust pose estimate. The mask always has one entry per input
// correspondence and num_inliers equals its popcount; success additionally
// requires num_inliers to reach the configured minimum.
struct RansacResult {
  PoseSE3 pose;
  std::vector<char> inlier_mask;
  int num_inliers = 0;
  int iterations = 0;
  bool success = false;
};

// Iterations needed to draw at least one all-inlier sample with the given
// confidence, assuming the current inlier ratio. Clamped to [1, hard_cap].
int AdaptiveIterationBound(double confidence, double inlier_ratio,
                           int sample_size, int hard_cap);

// Draws `count` distinct indices from [0, n) by rejection, so the sequence
// depends only on the generator state and not on the platform.
std::vector<int> SampleDistinct(Rng& rng, int n, int count);

}  // namespace priorsfm

#endif  // PRIORSFM_ESTIMATION_RANSAC_H_
