#ifndef PRIORSFM_UTIL_STATS_H_
#define PRIORSFM_UTIL_STATS_H_

#include <algorithm>
#include <cmath>
#include <vector>

namespace priorsfm {

// Median of a copy of `values`; the even-count convention is the average of
// the two central order statistics. Callers guarantee non-emptiness.
inline double Median(std::vector<double> values) {
  const size_t n = values.size();
  const size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (n % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

inline double Mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (const double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

inline double Rmse(const std::vector<double>& errors) {
  double sum = 0.0;
  for (const double e : errors) sum += e * e;
  return errors.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(errors.size()));
}

constexpr double kPi = 3.1415926535897932384626433832795;

inline double DegToRad(double deg) { return deg * kPi / 180.0; }
inline double RadToDeg(double rad) { return rad * 180.0 / kPi; }

}  // namespace priorsfm

#endif  // PRIORSFM_UTIL_STATS_H_
