#include "priorsfm/geometry/raster.h"

#include <cmath>

#include "priorsfm/util/errors.h"

namespace priorsfm {

Raster::Raster(int width, int height, int channels, float fill)
    : width_(width),
      height_(height),
      channels_(channels),
      data_(static_cast<size_t>(width) * height * channels, fill) {}

bool Raster::IsValid(int u, int v) const {
  for (int c = 0; c < channels_; ++c) {
    if (!std::isfinite(at(u, v, c))) {
      return false;
    }
  }
  return true;
}

void Raster::SetInvalid(int u, int v) {
  for (int c = 0; c < channels_; ++c) {
    at(u, v, c) = std::numeric_limits<float>::quiet_NaN();
  }
}

size_t Raster::NumValid() const {
  size_t count = 0;
  for (int v = 0; v < height_; ++v) {
    for (int u = 0; u < width_; ++u) {
      if (IsValid(u, v)) ++count;
    }
  }
  return count;
}

std::optional<BilinearFootprint> Raster::FootprintAt(
    const Eigen::Vector2d& px) const {
  const double x = px.x();
  const double y = px.y();
  if (!(x >= 0.0 && y >= 0.0 && x <= width_ - 1.0 && y <= height_ - 1.0)) {
    return std::nullopt;
  }

  // The footprint is the enclosing unit cell; a coordinate exactly on the far
  // edge is anchored one cell in so all four neighbors exist. Every neighbor
  // of the footprint participates in the validity check, even with zero blend
  // weight.
  int u0 = width_ > 1 ? static_cast<int>(std::floor(x)) : 0;
  int v0 = height_ > 1 ? static_cast<int>(std::floor(y)) : 0;
  if (u0 > width_ - 2) u0 = width_ > 1 ? width_ - 2 : 0;
  if (v0 > height_ - 2) v0 = height_ > 1 ? height_ - 2 : 0;
  const double fu = x - u0;
  const double fv = y - v0;

  BilinearFootprint footprint;
  footprint.cell_u[0] = u0;
  footprint.cell_u[1] = u0 + 1 < width_ ? u0 + 1 : u0;
  footprint.cell_v[0] = v0;
  footprint.cell_v[1] = v0 + 1 < height_ ? v0 + 1 : v0;
  footprint.weight_u[0] = 1.0 - fu;
  footprint.weight_u[1] = fu;
  footprint.weight_v[0] = 1.0 - fv;
  footprint.weight_v[1] = fv;
  return footprint;
}

Raster::SampleStatus Raster::Gather(const Eigen::Vector2d& px, int cell_u[2],
                                    int cell_v[2], double weight_u[2],
                                    double weight_v[2]) const {
  const std::optional<BilinearFootprint> footprint = FootprintAt(px);
  if (!footprint.has_value()) {
    return SampleStatus::kOutOfBounds;
  }
  for (int i = 0; i < 2; ++i) {
    cell_u[i] = footprint->cell_u[i];
    cell_v[i] = footprint->cell_v[i];
    weight_u[i] = footprint->weight_u[i];
    weight_v[i] = footprint->weight_v[i];
  }
  return SampleStatus::kOk;
}

Raster::SampleStatus Raster::SampleChannel(const Eigen::Vector2d& px, int channel,
                                           double* value) const {
  int cu[2], cv[2];
  double wu[2], wv[2];
  const SampleStatus status = Gather(px, cu, cv, wu, wv);
  if (status != SampleStatus::kOk) {
    return status;
  }
  double sum = 0.0;
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      if (!IsValid(cu[i], cv[j])) {
        return SampleStatus::kInvalidNeighbor;
      }
      sum += wu[i] * wv[j] * at(cu[i], cv[j], channel);
    }
  }
  *value = sum;
  return SampleStatus::kOk;
}

Raster::SampleStatus Raster::SampleVector3(const Eigen::Vector2d& px,
                                           Eigen::Vector3d* value) const {
  int cu[2], cv[2];
  double wu[2], wv[2];
  const SampleStatus status = Gather(px, cu, cv, wu, wv);
  if (status != SampleStatus::kOk) {
    return status;
  }
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      if (!IsValid(cu[i], cv[j])) {
        return SampleStatus::kInvalidNeighbor;
      }
      const double w = wu[i] * wv[j];
      for (int c = 0; c < 3; ++c) {
        sum[c] += w * at(cu[i], cv[j], c);
      }
    }
  }
  const double norm = sum.norm();
  if (norm < 1e-12) {
    // Opposing directions cancelled out; there is no meaningful blend.
    return SampleStatus::kInvalidNeighbor;
  }
  *value = sum / norm;
  return SampleStatus::kOk;
}

double Raster::InterpolateScalar(const Eigen::Vector2d& px, int channel) const {
  double value = 0.0;
  switch (SampleChannel(px, channel, &value)) {
    case SampleStatus::kOk:
      return value;
    case SampleStatus::kOutOfBounds:
      throw OutOfBoundsError("interpolation position outside raster domain");
    case SampleStatus::kInvalidNeighbor:
    default:
      throw InvalidNeighborError("interpolation touched an invalid raster cell");
  }
}

Eigen::Vector3d Raster::InterpolateNormal(const Eigen::Vector2d& px) const {
  Eigen::Vector3d value;
  switch (SampleVector3(px, &value)) {
    case SampleStatus::kOk:
      return value;
    case SampleStatus::kOutOfBounds:
      throw OutOfBoundsError("interpolation position outside raster domain");
    case SampleStatus::kInvalidNeighbor:
    default:
      throw InvalidNeighborError("interpolation touched an invalid raster cell");
  }
}

std::optional<double> Raster::TryInterpolateScalar(const Eigen::Vector2d& px,
                                                   int channel) const {
  double value = 0.0;
  if (SampleChannel(px, channel, &value) != SampleStatus::kOk) {
    return std::nullopt;
  }
  return value;
}

std::optional<Eigen::Vector3d> Raster::TryInterpolateNormal(
    const Eigen::Vector2d& px) const {
  Eigen::Vector3d value;
  if (SampleVector3(px, &value) != SampleStatus::kOk) {
    return std::nullopt;
  }
  return value;
}

}  // namespace priorsfm
