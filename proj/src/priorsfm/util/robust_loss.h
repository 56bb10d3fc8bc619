#ifndef PRIORSFM_UTIL_ROBUST_LOSS_H_
#define PRIORSFM_UTIL_ROBUST_LOSS_H_

#include <algorithm>
#include <cmath>

namespace priorsfm {

// Robust losses used by the refinement objectives. Each loss maps the squared
// whitened residual s = ||r/sigma||^2 to a cost, and supplies the matching
// IRLS weight d(cost)/d(s) so that reweighted least squares descends the
// robustified objective.

// Plain squared loss cut off at a fixed squared threshold. Residuals beyond
// the cutoff contribute a constant cost and zero gradient, which excludes
// them from the normal equations entirely.
struct TruncatedL2Loss {
  double max_squared = 25.0;

  double Cost(double s) const { return std::min(s, max_squared); }
  double Weight(double s) const { return s <= max_squared ? 1.0 : 0.0; }
};

// Cauchy (Lorentzian) loss with scale c: cost = c^2 log(1 + s / c^2).
struct CauchyLoss {
  double scale = 1.0;

  double Cost(double s) const {
    const double c2 = scale * scale;
    return c2 * std::log1p(s / c2);
  }
  double Weight(double s) const {
    const double c2 = scale * scale;
    return 1.0 / (1.0 + s / c2);
  }
};

// Huber-style smooth-L1 on the squared residual, additionally truncated:
// quadratic up to transition^2, linear in ||r|| up to the truncation, and
// constant beyond it.
struct TruncatedSmoothL1Loss {
  double transition = 2.0;      // residual norm where quadratic turns linear
  double max_squared = 16.0;    // squared norm beyond which cost is constant

  double Cost(double s) const {
    const double t2 = transition * transition;
    const double s_cap = std::min(s, max_squared);
    if (s_cap <= t2) {
      return s_cap;
    }
    return 2.0 * transition * std::sqrt(s_cap) - t2;
  }
  double Weight(double s) const {
    if (s > max_squared) {
      return 0.0;
    }
    const double t2 = transition * transition;
    if (s <= t2) {
      return 1.0;
    }
    return transition / std::sqrt(s);
  }
};

}  // namespace priorsfm

#endif  // PRIORSFM_UTIL_ROBUST_LOSS_H_
