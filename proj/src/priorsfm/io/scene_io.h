#ifndef PRIORSFM_IO_SCENE_IO_H_
#define PRIORSFM_IO_SCENE_IO_H_

#include <map>
#include <string>
#include <vector>

#include "priorsfm/depth/uncertainty.h"
#include "priorsfm/geometry/pose.h"
#include "priorsfm/geometry/raster.h"
#include "priorsfm/graph/correspondence_graph.h"
#include "priorsfm/scene/reconstruction.h"

namespace priorsfm {

// Binary raster container: magic "MPR1", little-endian u32 width, height,
// channels, reserved (must be zero), then row-major little-endian f32 values
// with channels interleaved. NaN marks invalid pixels.
Raster LoadRaster(const std::string& path);

// Atomic write (temp file + rename). Throws IoError on filesystem failure.
void SaveRaster(const Raster& raster, const std::string& path);

// A parsed scene directory: images with intrinsics, keypoints, and priors
// (nothing registered yet), plus the raw pairwise matches.
struct SceneInputs {
  Reconstruction scene;
  std::vector<PairMatches> matches;
};

// Reads cameras.txt, per-image keypoints files, matches.txt, and the four
// prior rasters per image. Validates the documented invariants (unique ids,
// raster dimensions against the manifest, match targets in range), then
// renormalizes the prior normals, calibrates the depth uncertainty, and
// propagates the normal uncertainty into the per-image residual model.
// Throws ParseError with file and line context for malformed content and
// ValidationError naming the violated invariant.
SceneInputs LoadScene(const std::string& dir,
                      const UncertaintyCalibrationOptions& calibration,
                      const NormalPropagationOptions& normal_propagation = {});

// poses.txt lines: `image_id qw qx qy qz tx ty tz` (world -> camera),
// 17 significant digits so the doubles round-trip exactly. The loader
// assigns the quaternion components verbatim (no renormalization) to keep
// the round trip bit-exact.
void SavePoses(const Reconstruction& scene, const std::string& path,
               const std::string& status);
std::map<int, PoseSE3> LoadPoses(const std::string& path);

// points3D.txt lines: `point_id x y z provenance track_length
// mean_reproj_err` over alive points; the error is averaged over
// observations in registered images.
void SavePoints(const Reconstruction& scene, const std::string& path,
                const std::string& status);

// Writes poses.txt, points3D.txt, one refined depth raster per registered
// image (depth_refined_<id>.mpr), and events.log into the directory, each
// file atomically. `status` becomes the `# status = ...` header.
void SaveReconstruction(const Reconstruction& scene,
                        const std::vector<std::string>& events,
                        const std::string& status, const std::string& dir);

}  // namespace priorsfm

#endif  // PRIORSFM_IO_SCENE_IO_H_
