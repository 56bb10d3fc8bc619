#ifndef PRIORSFM_GEOMETRY_RASTER_H_
#define PRIORSFM_GEOMETRY_RASTER_H_

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace priorsfm {

// Participating cells and blend weights of one bilinear lookup: the enclosing
// unit cell, with coordinates on the far edge anchored one cell in so all four
// neighbors exist.
struct BilinearFootprint {
  int cell_u[2];
  int cell_v[2];
  double weight_u[2];
  double weight_v[2];
};

// Dense float32 image grid with interleaved channels, row-major storage, and
// NaN marking invalid pixels. Depth maps and uncertainty maps are 1-channel;
// normal maps are 3-channel.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels,
         float fill = std::numeric_limits<float>::quiet_NaN());

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  float at(int u, int v, int c = 0) const {
    return data_[(static_cast<size_t>(v) * width_ + u) * channels_ + c];
  }
  float& at(int u, int v, int c = 0) {
    return data_[(static_cast<size_t>(v) * width_ + u) * channels_ + c];
  }

  // A pixel is valid when every channel is finite.
  bool IsValid(int u, int v) const;

  void SetInvalid(int u, int v);

  size_t NumValid() const;

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  // Bilinear interpolation of one channel at a subpixel position. All four
  // cells of the enclosing footprint must be valid, including zero-weight
  // ones. Throws OutOfBoundsError outside [0, width-1] x [0, height-1] and
  // InvalidNeighborError when a footprint cell is invalid.
  double InterpolateScalar(const Eigen::Vector2d& px, int channel = 0) const;

  // Bilinear interpolation of a 3-channel direction map, renormalized to unit
  // length after blending. Same error contract as InterpolateScalar.
  Eigen::Vector3d InterpolateNormal(const Eigen::Vector2d& px) const;

  // Non-throwing variants for the hot paths, where invalid pixels are an
  // expected case to be skipped rather than a contract violation.
  std::optional<double> TryInterpolateScalar(const Eigen::Vector2d& px,
                                             int channel = 0) const;
  std::optional<Eigen::Vector3d> TryInterpolateNormal(const Eigen::Vector2d& px) const;

  // The bilinear footprint at a position, or nullopt outside the raster.
  // Exposes the sampling geometry for interpolation schemes beyond plain
  // channel blending (e.g. interpolating a transform of the cell values).
  std::optional<BilinearFootprint> FootprintAt(const Eigen::Vector2d& px) const;

 private:
  enum class SampleStatus { kOk, kOutOfBounds, kInvalidNeighbor };

  // Gathers the participating cells and weights of a bilinear lookup.
  SampleStatus Gather(const Eigen::Vector2d& px, int cell_u[2], int cell_v[2],
                      double weight_u[2], double weight_v[2]) const;

  SampleStatus SampleChannel(const Eigen::Vector2d& px, int channel,
                             double* value) const;
  SampleStatus SampleVector3(const Eigen::Vector2d& px, Eigen::Vector3d* value) const;

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

}  // namespace priorsfm

#endif  // PRIORSFM_GEOMETRY_RASTER_H_
