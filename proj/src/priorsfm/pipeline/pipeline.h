#ifndef PRIORSFM_PIPELINE_PIPELINE_H_
#define PRIORSFM_PIPELINE_PIPELINE_H_

#include <set>
#include <string>
#include <vector>

#include "priorsfm/bundle/refinement_controller.h"
#include "priorsfm/depth/depth_scale.h"
#include "priorsfm/graph/correspondence_graph.h"
#include "priorsfm/io/scene_io.h"
#include "priorsfm/pipeline/config.h"
#include "priorsfm/scene/reconstruction.h"
#include "priorsfm/util/rng.h"

namespace priorsfm {

struct PipelineResult {
  Reconstruction scene;
  // One line per pipeline event; the first two whitespace-separated tokens
  // (kind plus its subject) are the structural record, later key=value
  // fields carry diagnostics.
  std::vector<std::string> events;
  bool initialization_failed = false;
  std::string failure_reason;
};

// The incremental reconstruction driver. Images are seeded from a two-view
// geometry (or a depth-prior PnP fallback when every pair is too
// low-parallax), then registered one at a time against triangulated and
// lifted structure, with depth scaling, interleaved refinement, and a depth
// consistency gate on every acceptance. All randomness flows from the
// config seed through one generator, so a rerun is bit-identical.
class IncrementalPipeline {
 public:
  IncrementalPipeline(SceneInputs inputs, const PipelineConfig& config);

  // Full run: initialize, register until exhaustion, final refinement,
  // final consistency sweep. Returns the result by move; the pipeline is
  // spent afterwards.
  PipelineResult Run();

  // Seeds the reconstruction with the first acceptable image pair.
  // Returns false after exhausting candidates.
  bool Initialize();

  // Registers one more view. Returns false when no candidate passes.
  bool RegisterNextView();

  // Final global refinement pass over all registered images.
  void FinalRefinement();

  // Re-checks every registered view against its partners, deregistering
  // any view whose depth map conflicts with the structure.
  void FinalConsistencySweep();

  const Reconstruction& scene() const { return scene_; }
  const std::vector<std::string>& events() const { return events_; }

 private:
  struct GatheredObservations;

  bool TryInitPair(int image_a, int image_b);
  bool TryRegister(int candidate);
  // Lifts not-yet-represented tracked keypoints of a freshly accepted image
  // into single-view scene points, best-understood depth first.
  void AugmentWithLiftedPoints(int image_id);
  // Scales the image's prior depth (and sigma) so the median prior depth
  // over the given scene observations matches the scene.
  double ApplyDepthScale(int image_id,
                         const std::vector<DepthScaleObservation>& scale_obs);
  GatheredObservations Gather2D3D(int candidate) const;
  void RunRefinement(const RefinementSchedule& schedule);
  void Log(const std::string& line);

  PipelineConfig config_;
  Reconstruction scene_;
  // Pristine copy for restarting failed initialization attempts.
  Reconstruction base_scene_;
  std::vector<PairMatches> matches_;
  CorrespondenceGraph graph_;
  Rng rng_;
  std::vector<std::string> events_;
  ScheduleTrigger trigger_;
  // Views rejected by the consistency gate; never retried.
  std::set<int> rejected_;
  std::string failure_reason_;
  bool initialized_ = false;
};

// Convenience wrapper: build the pipeline and run it to completion.
PipelineResult Reconstruct(SceneInputs inputs, const PipelineConfig& config);

}  // namespace priorsfm

#endif  // PRIORSFM_PIPELINE_PIPELINE_H_
