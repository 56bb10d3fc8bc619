#ifndef PRIORSFM_SYNTH_SYNTH_SCENE_H_
#define PRIORSFM_SYNTH_SYNTH_SCENE_H_

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "priorsfm/geometry/intrinsics.h"
#include "priorsfm/geometry/pose.h"
#include "priorsfm/geometry/raster.h"
#include "priorsfm/graph/correspondence_graph.h"

namespace priorsfm {

// A keypoint is the (possibly noise-perturbed) projection of one surface
// sample; the sample id ties detections of the same point across views.
struct SynthKeypoint {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  int sample = -1;
};

struct SynthImage {
  CameraIntrinsics intrinsics;
  PoseSE3 pose;  // ground truth, world -> camera
  std::vector<SynthKeypoint> keypoints;
  Raster depth_true;    // analytic ray-cast depth, channel 1
  Raster depth_prior;   // depth_true with the preset's noise model applied
  Raster depth_sigma;   // reported absolute depth sigma
  Raster normals;       // camera-frame unit normals (n_z < 0), channels 3
  Raster normal_sigma;  // reported angular sigma, radians
};

// A generated scene: per-image priors, keypoints, and pairwise matches.
// Matches join keypoints whose samples look identical — normally the same
// sample, but mirrored duplicates in the symmetric preset alias each other,
// which is exactly the trap repeated architecture lays for feature
// matching.
struct SynthScene {
  std::map<int, SynthImage> images;
  std::vector<PairMatches> matches;
  // World position per sample id (ground truth for tests).
  std::map<int, Eigen::Vector3d> samples;
  // Sample id observed by each keypoint: keypoint_samples[image][k].
  std::map<int, std::vector<int>> keypoint_samples;
  // Image placed so that duplicated geometry suggests a mirrored pose;
  // -1 when the preset has no such trap.
  int decoy_image = -1;
};

// Preset ids: {orbit-hi-overlap, chain-low-overlap, forward-low-parallax,
// symmetric-rooms} x {-clean, -noisy}.
std::vector<std::string> PresetNames();

// Builds a preset deterministically: one seed, one bit-exact scene.
// Throws PresetInvalidError for unknown names.
SynthScene BuildPreset(const std::string& name, uint64_t seed);

// Writes the scene-directory files (cameras.txt, keypoints, matches,
// priors) plus ground truth: poses_gt.txt and depth_gt_<id>.mpr.
void WriteScene(const SynthScene& scene, const std::string& dir);

}  // namespace priorsfm

#endif  // PRIORSFM_SYNTH_SYNTH_SCENE_H_
