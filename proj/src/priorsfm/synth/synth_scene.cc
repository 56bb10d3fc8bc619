#include "priorsfm/synth/synth_scene.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <Eigen/Geometry>

#include "priorsfm/geometry/projection.h"
#include "priorsfm/io/scene_io.h"
#include "priorsfm/scene/reconstruction.h"
#include "priorsfm/util/errors.h"
#include "priorsfm/util/rng.h"
#include "priorsfm/util/stats.h"

namespace priorsfm {

namespace {

constexpr int kImageSize = 48;
constexpr double kFocal = 60.0;
// Mirrored duplicates get ids in a disjoint range so keypoint enumeration
// stays dense per image while the alias map stays trivial to audit.
constexpr int kMirrorIdBase = 100000;

struct SurfaceRect {
  Eigen::Vector3d origin;
  Eigen::Vector3d edge_u;
  Eigen::Vector3d edge_v;

  Eigen::Vector3d Normal() const {
    return edge_u.cross(edge_v).normalized();
  }
};

struct SurfaceSample {
  int id = 0;
  int surface = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  // Samples with equal canonical ids produce matches; a mirrored duplicate
  // aliases its source sample.
  int canonical = 0;
};

struct ViewSpec {
  int image_id = 0;
  PoseSE3 pose;
};

struct NoiseModel {
  double keypoint_sigma_px = 0.0;
  double depth_noise_frac = 0.0;
  double depth_bias_amp = 0.0;
  double normal_sigma_deg = 0.0;
  double outlier_fraction = 0.0;
  double reported_depth_frac = 0.01;
  double reported_normal_sigma_deg = 0.5;
};

CameraIntrinsics DefaultIntrinsics() {
  CameraIntrinsics cam;
  cam.fx = kFocal;
  cam.fy = kFocal;
  cam.cx = (kImageSize - 1) / 2.0;
  cam.cy = (kImageSize - 1) / 2.0;
  cam.width = kImageSize;
  cam.height = kImageSize;
  return cam;
}

// Ray-rectangle intersection parameter along dir (origin + t * dir), or
// +inf on a miss. The caller interprets t in whatever unit dir carries.
double RayRectHit(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                  const SurfaceRect& rect) {
  const double kMiss = std::numeric_limits<double>::infinity();
  const Eigen::Vector3d normal = rect.edge_u.cross(rect.edge_v);
  const double denom = normal.dot(dir);
  if (std::abs(denom) < 1e-12) {
    return kMiss;
  }
  const double t = normal.dot(rect.origin - origin) / denom;
  if (t <= 1e-9) {
    return kMiss;
  }
  const Eigen::Vector3d local = origin + t * dir - rect.origin;
  const double a = local.dot(rect.edge_u) / rect.edge_u.squaredNorm();
  const double b = local.dot(rect.edge_v) / rect.edge_v.squaredNorm();
  if (a < -1e-9 || a > 1.0 + 1e-9 || b < -1e-9 || b > 1.0 + 1e-9) {
    return kMiss;
  }
  return t;
}

// Jittered grid of samples over a rectangle. Jitter is drawn here so that
// clean and noisy variants of one (preset, seed) share sample positions.
void AddRectSamples(int surface, const SurfaceRect& rect, int nu, int nv,
                    Rng* rng, std::vector<SurfaceSample>* samples,
                    int* next_id) {
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      const double ju = rng->Uniform(-0.3, 0.3);
      const double jv = rng->Uniform(-0.3, 0.3);
      SurfaceSample sample;
      sample.id = (*next_id)++;
      sample.canonical = sample.id;
      sample.surface = surface;
      sample.position = rect.origin +
                        ((i + 0.5 + ju) / nu) * rect.edge_u +
                        ((j + 0.5 + jv) / nv) * rect.edge_v;
      samples->push_back(sample);
    }
  }
}

bool SampleVisible(const CameraIntrinsics& cam, const PoseSE3& pose,
                   const Eigen::Vector3d& position,
                   const std::vector<SurfaceRect>& surfaces,
                   Eigen::Vector2d* pixel) {
  const Eigen::Vector3d in_cam = pose.Apply(position);
  if (in_cam.z() <= 1e-9) {
    return false;
  }
  *pixel = cam.PixelFromCamera(in_cam);
  if (!cam.InBounds(*pixel)) {
    return false;
  }
  // Occluded when any surface cuts the segment camera -> sample. The
  // sample's own surface registers at t = 1 and is excluded by the margin.
  const Eigen::Vector3d center = pose.Center();
  const Eigen::Vector3d dir = position - center;
  for (const SurfaceRect& rect : surfaces) {
    const double t = RayRectHit(center, dir, rect);
    if (t < 1.0 - 1e-6) {
      return false;
    }
  }
  return true;
}

// Ray-casts the analytic depth (camera-z convention) and camera-facing
// normal rasters for one view.
void CastRasters(const CameraIntrinsics& cam, const PoseSE3& pose,
                 const std::vector<SurfaceRect>& surfaces, Raster* depth,
                 Raster* normals) {
  const Eigen::Matrix3d rotation = pose.q.toRotationMatrix();
  const Eigen::Vector3d center = pose.Center();
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      // Ray() has unit camera depth, so the hit parameter along the
      // world-frame direction is the camera-z depth directly.
      const Eigen::Vector3d dir =
          rotation.transpose() * cam.Ray(Eigen::Vector2d(u, v));
      double best_t = std::numeric_limits<double>::infinity();
      int best_surface = -1;
      for (size_t s = 0; s < surfaces.size(); ++s) {
        const double t = RayRectHit(center, dir, surfaces[s]);
        if (t < best_t) {
          best_t = t;
          best_surface = static_cast<int>(s);
        }
      }
      if (best_surface < 0) {
        depth->SetInvalid(u, v);
        normals->SetInvalid(u, v);
        continue;
      }
      depth->at(u, v) = static_cast<float>(best_t);
      Eigen::Vector3d n_cam = rotation * surfaces[best_surface].Normal();
      if (n_cam.z() > 0.0) {
        n_cam = -n_cam;
      }
      normals->at(u, v, 0) = static_cast<float>(n_cam.x());
      normals->at(u, v, 1) = static_cast<float>(n_cam.y());
      normals->at(u, v, 2) = static_cast<float>(n_cam.z());
    }
  }
}

// Applies the noise model in a fixed draw order: keypoints, then the depth
// bias phase, then per-pixel depth noise, then per-pixel normal noise.
void PerturbImage(const NoiseModel& noise, Rng* rng, SynthImage* image) {
  const int width = image->intrinsics.width;
  const int height = image->intrinsics.height;
  if (noise.keypoint_sigma_px > 0.0) {
    for (SynthKeypoint& keypoint : image->keypoints) {
      keypoint.pixel.x() += rng->Gaussian(0.0, noise.keypoint_sigma_px);
      keypoint.pixel.y() += rng->Gaussian(0.0, noise.keypoint_sigma_px);
      keypoint.pixel.x() = std::clamp(keypoint.pixel.x(), 0.0, width - 1.0);
      keypoint.pixel.y() = std::clamp(keypoint.pixel.y(), 0.0, height - 1.0);
    }
  }

  image->depth_prior = image->depth_true;
  const double bias_phase =
      noise.depth_bias_amp > 0.0 ? rng->Uniform(0.0, 2.0 * kPi) : 0.0;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (!image->depth_true.IsValid(u, v)) {
        continue;
      }
      double factor = 1.0;
      if (noise.depth_bias_amp > 0.0) {
        factor += noise.depth_bias_amp *
                  std::sin(2.0 * kPi *
                               (1.3 * u / width + 0.7 * v / height) +
                           bias_phase);
      }
      if (noise.depth_noise_frac > 0.0) {
        factor *= 1.0 + rng->Gaussian(0.0, noise.depth_noise_frac);
      }
      factor = std::clamp(factor, 0.5, 1.5);
      image->depth_prior.at(u, v) =
          static_cast<float>(image->depth_true.at(u, v) * factor);
    }
  }

  if (noise.normal_sigma_deg > 0.0) {
    const double sigma_rad = DegToRad(noise.normal_sigma_deg);
    for (int v = 0; v < height; ++v) {
      for (int u = 0; u < width; ++u) {
        if (!image->normals.IsValid(u, v)) {
          continue;
        }
        const double angle = rng->Gaussian(0.0, sigma_rad);
        const double phi = rng->Uniform(0.0, 2.0 * kPi);
        const Eigen::Vector3d n(image->normals.at(u, v, 0),
                                image->normals.at(u, v, 1),
                                image->normals.at(u, v, 2));
        // Rotation axis in the tangent plane of n.
        const Eigen::Vector3d e1 =
            n.unitOrthogonal();
        const Eigen::Vector3d e2 = n.cross(e1);
        const Eigen::Vector3d axis = std::cos(phi) * e1 + std::sin(phi) * e2;
        const Eigen::Vector3d perturbed =
            Eigen::AngleAxisd(angle, axis) * n;
        if (perturbed.z() >= -1e-6) {
          continue;  // keep the camera-facing invariant
        }
        image->normals.at(u, v, 0) = static_cast<float>(perturbed.x());
        image->normals.at(u, v, 1) = static_cast<float>(perturbed.y());
        image->normals.at(u, v, 2) = static_cast<float>(perturbed.z());
      }
    }
  }

  image->depth_sigma = Raster(width, height, 1);
  image->normal_sigma = Raster(width, height, 1);
  const float angular =
      static_cast<float>(DegToRad(noise.reported_normal_sigma_deg));
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (!image->depth_prior.IsValid(u, v)) {
        continue;
      }
      image->depth_sigma.at(u, v) = static_cast<float>(
          noise.reported_depth_frac * image->depth_prior.at(u, v));
      image->normal_sigma.at(u, v) = angular;
    }
  }
}

SynthScene Generate(const std::vector<SurfaceRect>& surfaces,
                    const std::vector<SurfaceSample>& samples,
                    const std::vector<ViewSpec>& views,
                    const NoiseModel& noise, Rng* rng) {
  SynthScene scene;
  const CameraIntrinsics cam = DefaultIntrinsics();
  for (const SurfaceSample& sample : samples) {
    scene.samples[sample.id] = sample.position;
  }

  for (const ViewSpec& view : views) {
    SynthImage image;
    image.intrinsics = cam;
    image.pose = view.pose;
    image.depth_true = Raster(cam.width, cam.height, 1);
    image.normals = Raster(cam.width, cam.height, 3);
    CastRasters(cam, view.pose, surfaces, &image.depth_true, &image.normals);
    for (const SurfaceSample& sample : samples) {
      Eigen::Vector2d pixel;
      if (!SampleVisible(cam, view.pose, sample.position, surfaces, &pixel)) {
        continue;
      }
      SynthKeypoint keypoint;
      keypoint.pixel = pixel;
      keypoint.sample = sample.id;
      image.keypoints.push_back(keypoint);
      scene.keypoint_samples[view.image_id].push_back(sample.id);
    }
    scene.images[view.image_id] = std::move(image);
  }

  for (auto& [image_id, image] : scene.images) {
    PerturbImage(noise, rng, &image);
  }

  // Matches join keypoints with equal canonical sample ids.
  std::map<int, int> canonical_of;
  for (const SurfaceSample& sample : samples) {
    canonical_of[sample.id] = sample.canonical;
  }
  std::map<int, std::map<int, int>> keypoint_by_canonical;
  for (const auto& [image_id, image] : scene.images) {
    for (size_t k = 0; k < image.keypoints.size(); ++k) {
      keypoint_by_canonical[image_id][canonical_of.at(
          image.keypoints[k].sample)] = static_cast<int>(k);
    }
  }
  for (auto it_a = scene.images.begin(); it_a != scene.images.end(); ++it_a) {
    for (auto it_b = std::next(it_a); it_b != scene.images.end(); ++it_b) {
      const std::map<int, int>& by_canon_a =
          keypoint_by_canonical[it_a->first];
      const std::map<int, int>& by_canon_b =
          keypoint_by_canonical[it_b->first];
      PairMatches pair;
      pair.image_a = it_a->first;
      pair.image_b = it_b->first;
      for (const auto& [canonical, idx_a] : by_canon_a) {
        const auto match = by_canon_b.find(canonical);
        if (match == by_canon_b.end()) {
          continue;
        }
        pair.entries.push_back({idx_a, match->second, 1.0});
      }
      if (pair.entries.size() < 8) {
        continue;
      }
      if (noise.outlier_fraction > 0.0) {
        const int num_outliers = static_cast<int>(
            noise.outlier_fraction * static_cast<double>(pair.entries.size()));
        const int nk_a = static_cast<int>(it_a->second.keypoints.size());
        const int nk_b = static_cast<int>(it_b->second.keypoints.size());
        for (int k = 0; k < num_outliers; ++k) {
          const int idx_a = rng->UniformInt(0, nk_a - 1);
          const int idx_b = rng->UniformInt(0, nk_b - 1);
          if (canonical_of.at(it_a->second.keypoints[idx_a].sample) ==
              canonical_of.at(it_b->second.keypoints[idx_b].sample)) {
            continue;
          }
          pair.entries.push_back({idx_a, idx_b, 0.8});
        }
      }
      scene.matches.push_back(std::move(pair));
    }
  }
  return scene;
}

PoseSE3 LookOutward(double angle_rad, double radius) {
  const Eigen::Vector3d dir(std::sin(angle_rad), 0.0, std::cos(angle_rad));
  Eigen::Matrix3d rotation;
  rotation.row(1) = Eigen::Vector3d::UnitY();
  rotation.row(2) = dir;
  rotation.row(0) = rotation.row(1).cross(rotation.row(2));
  const Eigen::Vector3d center = radius * dir;
  return PoseSE3(rotation, -rotation * center);
}

PoseSE3 AxisAlignedAt(const Eigen::Vector3d& center) {
  return PoseSE3(Eigen::Matrix3d::Identity(), -center);
}

NoiseModel CleanNoise() {
  return NoiseModel{};
}

NoiseModel NoisyNoise(double outlier_fraction) {
  NoiseModel noise;
  noise.keypoint_sigma_px = 0.5;
  noise.depth_noise_frac = 0.03;
  noise.depth_bias_amp = 0.02;
  noise.normal_sigma_deg = 3.0;
  noise.outlier_fraction = outlier_fraction;
  noise.reported_depth_frac = 0.03;
  noise.reported_normal_sigma_deg = 3.0;
  return noise;
}

// Ten cameras on an inward circle of a box room, looking outward at the
// walls: every neighborhood of views shares most of its frustum.
SynthScene BuildOrbit(const NoiseModel& noise, Rng* rng) {
  std::vector<SurfaceRect> surfaces = {
      {{5.0, -3.0, -5.0}, {0.0, 0.0, 10.0}, {0.0, 6.0, 0.0}},
      {{-5.0, -3.0, -5.0}, {0.0, 0.0, 10.0}, {0.0, 6.0, 0.0}},
      {{-5.0, -3.0, 5.0}, {10.0, 0.0, 0.0}, {0.0, 6.0, 0.0}},
      {{-5.0, -3.0, -5.0}, {10.0, 0.0, 0.0}, {0.0, 6.0, 0.0}},
  };
  std::vector<SurfaceSample> samples;
  int next_id = 0;
  for (size_t s = 0; s < surfaces.size(); ++s) {
    AddRectSamples(static_cast<int>(s), surfaces[s], 30, 18, rng, &samples,
                   &next_id);
  }
  std::vector<ViewSpec> views;
  for (int i = 0; i < 10; ++i) {
    views.push_back({i, LookOutward(2.0 * kPi * i / 10.0, 1.2)});
  }
  return Generate(surfaces, samples, views, noise, rng);
}

// Eight cameras strafing along a wall, spaced so consecutive frusta
// overlap but views two apart share nothing: every track has length two.
SynthScene BuildChain(const NoiseModel& noise, Rng* rng) {
  const double spacing = 2.8;
  std::vector<SurfaceRect> surfaces = {
      {{-2.1, -2.1, 5.0}, {7.0 * spacing + 4.2, 0.0, 0.0}, {0.0, 4.2, 0.0}},
  };
  std::vector<SurfaceSample> samples;
  int next_id = 0;
  AddRectSamples(0, surfaces[0], 86, 15, rng, &samples, &next_id);
  std::vector<ViewSpec> views;
  for (int i = 0; i < 8; ++i) {
    views.push_back({i, AxisAlignedAt({spacing * i, 0.0, 0.0})});
  }
  return Generate(surfaces, samples, views, noise, rng);
}

// Eight cameras dollying toward a frontal plane with a span so small that
// every pair's median triangulation angle stays under the stability gate.
SynthScene BuildForward(const NoiseModel& noise, Rng* rng) {
  std::vector<SurfaceRect> surfaces = {
      {{-2.25, -2.25, 5.0}, {4.5, 0.0, 0.0}, {0.0, 4.5, 0.0}},
  };
  std::vector<SurfaceSample> samples;
  int next_id = 0;
  AddRectSamples(0, surfaces[0], 34, 34, rng, &samples, &next_id);
  std::vector<ViewSpec> views;
  for (int i = 0; i < 8; ++i) {
    views.push_back({i, AxisAlignedAt({0.0, 0.0, 0.03 * i})});
  }
  return Generate(surfaces, samples, views, noise, rng);
}

// Two congruent rooms: a north wall with a protruding slab, and a plain
// south wall that duplicates the north wall's plain area point for point
// under (x, z) -> (-x, -z). Six true cameras face north; the decoy faces
// south. Its matches alias the duplicated samples, so 2D-3D consensus
// places it at the mirrored pose with near-zero residual — only the slab,
// which the south room lacks, betrays the interpretation.
SynthScene BuildSymmetric(const NoiseModel& noise, Rng* rng) {
  std::vector<SurfaceRect> surfaces = {
      // north wall
      {{-3.1, -2.9, 5.0}, {6.2, 0.0, 0.0}, {0.0, 5.8, 0.0}},
      // slab floating in front of the north wall
      {{-1.4, -1.05, 2.5}, {2.8, 0.0, 0.0}, {0.0, 2.1, 0.0}},
      // south wall (plain)
      {{-3.1, -2.9, -5.0}, {6.2, 0.0, 0.0}, {0.0, 5.8, 0.0}},
  };
  std::vector<SurfaceSample> samples;
  int next_id = 0;
  AddRectSamples(0, surfaces[0], 40, 30, rng, &samples, &next_id);
  const int wall_sample_count = next_id;
  AddRectSamples(1, surfaces[1], 18, 13, rng, &samples, &next_id);
  // Mirror the wall samples (not the slab) into the south room; the alias
  // to the source sample is what lets the matcher "recognize" them.
  for (int s = 0; s < wall_sample_count; ++s) {
    SurfaceSample mirror;
    mirror.id = kMirrorIdBase + samples[s].id;
    mirror.canonical = samples[s].id;
    mirror.surface = 2;
    mirror.position = Eigen::Vector3d(-samples[s].position.x(),
                                      samples[s].position.y(),
                                      -samples[s].position.z());
    samples.push_back(mirror);
  }
  std::vector<ViewSpec> views;
  for (int i = 0; i < 6; ++i) {
    views.push_back({i, AxisAlignedAt({-0.25 + 0.1 * i, 0.0, -2.0})});
  }
  ViewSpec decoy;
  decoy.image_id = 6;
  const Eigen::Matrix3d about_face =
      Eigen::AngleAxisd(kPi, Eigen::Vector3d::UnitY()).toRotationMatrix();
  decoy.pose = PoseSE3(about_face,
                       -(about_face * Eigen::Vector3d(0.0, 0.0, 2.0)));
  views.push_back(decoy);

  SynthScene scene = Generate(surfaces, samples, views, noise, rng);
  scene.decoy_image = 6;
  return scene;
}

std::string FormatValue(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace

std::vector<std::string> PresetNames() {
  std::vector<std::string> names;
  for (const char* base : {"orbit-hi-overlap", "chain-low-overlap",
                           "forward-low-parallax", "symmetric-rooms"}) {
    names.push_back(std::string(base) + "-clean");
    names.push_back(std::string(base) + "-noisy");
  }
  return names;
}

SynthScene BuildPreset(const std::string& name, uint64_t seed) {
  std::string base = name;
  bool noisy = false;
  const std::string clean_suffix = "-clean";
  const std::string noisy_suffix = "-noisy";
  if (name.size() > clean_suffix.size() &&
      name.compare(name.size() - clean_suffix.size(), clean_suffix.size(),
                   clean_suffix) == 0) {
    base = name.substr(0, name.size() - clean_suffix.size());
  } else if (name.size() > noisy_suffix.size() &&
             name.compare(name.size() - noisy_suffix.size(),
                          noisy_suffix.size(), noisy_suffix) == 0) {
    base = name.substr(0, name.size() - noisy_suffix.size());
    noisy = true;
  }

  Rng rng(seed);
  if (base == "orbit-hi-overlap") {
    // The orbit preset is the only one that plants outlier matches: its
    // redundancy can absorb them, while the sparser presets are used to
    // probe specific mechanisms.
    return BuildOrbit(noisy ? NoisyNoise(0.05) : CleanNoise(), &rng);
  }
  if (base == "chain-low-overlap") {
    return BuildChain(noisy ? NoisyNoise(0.0) : CleanNoise(), &rng);
  }
  if (base == "forward-low-parallax") {
    return BuildForward(noisy ? NoisyNoise(0.0) : CleanNoise(), &rng);
  }
  if (base == "symmetric-rooms") {
    return BuildSymmetric(noisy ? NoisyNoise(0.0) : CleanNoise(), &rng);
  }
  std::string known;
  for (const std::string& preset : PresetNames()) {
    known += (known.empty() ? "" : ", ") + preset;
  }
  throw PresetInvalidError("unknown preset '" + name + "'; expected one of " +
                           known);
}

void WriteScene(const SynthScene& scene, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);

  std::ofstream cameras(root / "cameras.txt");
  cameras << "# image_id fx fy cx cy width height depth normal depth_sigma "
             "normal_sigma\n";
  for (const auto& [image_id, image] : scene.images) {
    const std::string id = std::to_string(image_id);
    cameras << id << ' ' << FormatValue(image.intrinsics.fx) << ' '
            << FormatValue(image.intrinsics.fy) << ' '
            << FormatValue(image.intrinsics.cx) << ' '
            << FormatValue(image.intrinsics.cy) << ' '
            << image.intrinsics.width << ' ' << image.intrinsics.height
            << " depth_" << id << ".mpr normal_" << id << ".mpr dsigma_"
            << id << ".mpr nsigma_" << id << ".mpr\n";

    SaveRaster(image.depth_prior, (root / ("depth_" + id + ".mpr")).string());
    SaveRaster(image.normals, (root / ("normal_" + id + ".mpr")).string());
    SaveRaster(image.depth_sigma,
               (root / ("dsigma_" + id + ".mpr")).string());
    SaveRaster(image.normal_sigma,
               (root / ("nsigma_" + id + ".mpr")).string());
    SaveRaster(image.depth_true,
               (root / ("depth_gt_" + id + ".mpr")).string());

    std::ofstream keypoints(root / ("keypoints_" + id + ".txt"));
    keypoints << "# index u v sigma_px\n";
    for (size_t k = 0; k < image.keypoints.size(); ++k) {
      keypoints << k << ' ' << FormatValue(image.keypoints[k].pixel.x())
                << ' ' << FormatValue(image.keypoints[k].pixel.y())
                << " 0.5\n";
    }
  }

  std::ofstream matches(root / "matches.txt");
  for (const PairMatches& pair : scene.matches) {
    matches << "PAIR " << pair.image_a << ' ' << pair.image_b << ' '
            << pair.entries.size() << '\n';
    for (const PairMatches::Entry& entry : pair.entries) {
      matches << entry.idx_a << ' ' << entry.idx_b << ' '
              << FormatValue(entry.score) << '\n';
    }
  }

  Reconstruction gt;
  for (const auto& [image_id, image] : scene.images) {
    ImageState state;
    state.intrinsics = image.intrinsics;
    state.pose = image.pose;
    state.registered = true;
    gt.images[image_id] = std::move(state);
  }
  SavePoses(gt, (root / "poses_gt.txt").string(), "OK");
}

}  // namespace priorsfm
