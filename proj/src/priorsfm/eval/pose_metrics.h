#ifndef PRIORSFM_EVAL_POSE_METRICS_H_
#define PRIORSFM_EVAL_POSE_METRICS_H_

#include <map>
#include <vector>

#include "priorsfm/geometry/pose.h"

namespace priorsfm {

// Relative-pose error of one reference pair. Pairs where either image is
// absent from the estimate carry an infinite error: they count against
// recall but can never enter it.
struct PosePairError {
  int image_a = 0;
  int image_b = 0;
  double error_deg = 0.0;
};

struct PoseAccuracyReport {
  // One entry per unordered reference pair, ascending (image_a, image_b).
  std::vector<PosePairError> pair_errors;
  // Images present in both sets.
  int num_common = 0;
  std::vector<double> thresholds_deg;
  // Area under the recall curve on [0, threshold], normalized to [0, 1];
  // parallel to thresholds_deg.
  std::vector<double> auc;
};

// Fraction of pairs with error <= threshold_deg.
double RecallAt(const std::vector<PosePairError>& pair_errors,
                double threshold_deg);

// Exact integral of the piecewise-constant recall curve over
// [0, threshold_deg], normalized to [0, 1]. Infinite errors contribute
// nothing but stay in the denominator. Throws ValidationError for a
// non-positive threshold.
double AreaUnderRecall(const std::vector<PosePairError>& pair_errors,
                       double threshold_deg);

// Compares two pose sets pair by pair. For every unordered pair of
// reference images, the error is the maximum of the relative-rotation angle
// and the angle between relative-translation directions, in degrees.
// Relative poses cancel any global similarity transform, so the comparison
// is gauge-free. When either set's baseline for a pair is below 1e-6 of
// that set's camera-span, the translation direction is undefined and its
// error term is 0. Throws NoCommonImagesError when fewer than two images
// appear in both sets.
PoseAccuracyReport EvaluatePoses(const std::map<int, PoseSE3>& reference,
                                 const std::map<int, PoseSE3>& estimate,
                                 const std::vector<double>& thresholds_deg);

}  // namespace priorsfm

#endif  // PRIORSFM_EVAL_POSE_METRICS_H_
