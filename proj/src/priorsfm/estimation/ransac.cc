#include "priorsfm/estimation/ransac.h"

#include <algorithm>
#include <cmath>

namespace priorsfm {

int AdaptiveIterationBound(double confidence, double inlier_ratio,
                           int sample_size, int hard_cap) {
  if (inlier_ratio <= 0.0) {
    return hard_cap;
  }
  const double p_good = std::pow(std::min(inlier_ratio, 1.0), sample_size);
  if (p_good >= 1.0) {
    return 1;
  }
  const double denom = std::log1p(-p_good);
  if (denom >= 0.0) {
    return hard_cap;
  }
  const double bound = std::log1p(-confidence) / denom;
  if (!(bound < static_cast<double>(hard_cap))) {
    return hard_cap;
  }
  return std::max(1, static_cast<int>(std::ceil(bound)));
}

std::vector<int> SampleDistinct(Rng& rng, int n, int count) {
  std::vector<int> sample;
  sample.reserve(count);
  while (static_cast<int>(sample.size()) < count) {
    const int idx = rng.UniformInt(0, n - 1);
    if (std::find(sample.begin(), sample.end(), idx) == sample.end()) {
      sample.push_back(idx);
    }
  }
  return sample;
}

}  // namespace priorsfm
