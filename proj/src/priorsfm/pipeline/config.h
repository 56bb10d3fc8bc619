#ifndef PRIORSFM_PIPELINE_CONFIG_H_
#define PRIORSFM_PIPELINE_CONFIG_H_

#include <cstdint>

#include "priorsfm/bundle/bundle_adjuster.h"
#include "priorsfm/bundle/refinement_controller.h"
#include "priorsfm/consistency/consistency_check.h"
#include "priorsfm/depth/depth_refiner.h"
#include "priorsfm/depth/uncertainty.h"
#include "priorsfm/estimation/absolute_pose.h"
#include "priorsfm/estimation/relative_pose.h"

namespace priorsfm {

// Every tunable of the reconstruction pipeline in one place. The nested
// structs carry their own defaults; the flat members cover the incremental
// controller itself. Config files and --set overrides address each field by
// a dotted key (see config_io).
struct PipelineConfig {
  RelativePoseOptions relative_pose;
  AbsolutePoseOptions absolute_pose;
  RefineDepthOptions refine;
  BundleOptions bundle;
  FilterOptions filter;
  ScheduleOptions schedule;
  ConsistencyOptions consistency;
  UncertaintyCalibrationOptions calibration;
  NormalPropagationOptions normal_propagation;

  // Relative objective change below which a scheduled per-image depth
  // refinement is skipped.
  double skip_threshold = 1e-3;
  AnchorWeightMode anchor_weight_mode = AnchorWeightMode::kCombined;
  // Initialization matches below this triangulation angle are placed by
  // lifting from the prior instead of by triangulation.
  double min_triangulation_angle_deg = 1.5;
  // Per-image cap on single-view points lifted from the depth prior,
  // preferring keypoints with low prior uncertainty.
  int lifted_budget = 2000;
  // Candidates tried per registration round before declaring exhaustion.
  int candidate_retry_limit = 10;
  // Fall back to prior-lifted absolute pose when no image pair yields a
  // stable relative pose. Disabling reproduces the relative-pose-only
  // initializer.
  bool allow_pnp_init = true;

  bool no_lifting = false;
  bool no_depth_reg = false;
  bool no_depth_refinement = false;
  bool no_consistency_check = false;

  uint64_t seed = 0;
};

// The alternation options implied by a config (ablation flags applied).
inline AlternationOptions MakeAlternationOptions(const PipelineConfig& config) {
  AlternationOptions options;
  options.refine = config.refine;
  options.bundle = config.bundle;
  options.filter = config.filter;
  options.anchor_weight_mode = config.anchor_weight_mode;
  options.skip_threshold = config.skip_threshold;
  options.refine_depths = !config.no_depth_refinement;
  options.depth_regularization = !config.no_depth_reg;
  return options;
}

}  // namespace priorsfm

#endif  // PRIORSFM_PIPELINE_CONFIG_H_
