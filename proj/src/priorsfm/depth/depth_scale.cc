#include "priorsfm/depth/depth_scale.h"

#include "priorsfm/util/errors.h"
#include "priorsfm/util/stats.h"

namespace priorsfm {

double ScaleDepth(const Raster& depth,
                  const std::vector<DepthScaleObservation>& observations) {
  std::vector<double> ratios;
  ratios.reserve(observations.size());
  for (const DepthScaleObservation& obs : observations) {
    if (!(obs.scene_depth > 0.0)) {
      continue;
    }
    const auto prior = depth.TryInterpolateScalar(obs.pixel);
    if (!prior.has_value() || !(*prior > 0.0)) {
      continue;
    }
    ratios.push_back(obs.scene_depth / *prior);
  }
  if (ratios.empty()) {
    throw NoValidObservationsError(
        "depth scaling: no keypoint lands on valid prior depth");
  }
  return Median(ratios);
}

}  // namespace priorsfm
