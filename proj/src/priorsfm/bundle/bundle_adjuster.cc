#include "priorsfm/bundle/bundle_adjuster.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "priorsfm/util/errors.h"
#include "priorsfm/util/robust_loss.h"

namespace priorsfm {

namespace {

Eigen::Matrix3d Skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

TruncatedSmoothL1Loss ReprojLoss(double sigma_px, const BundleOptions& o) {
  return {o.reproj_transition_px / sigma_px,
          o.reproj_max_squared_px / (sigma_px * sigma_px)};
}

CauchyLoss DepthLoss(double sigma, const BundleOptions& o) {
  return {o.depth_cauchy_scale / sigma};
}

void ValidateProblem(const BundleProblem& p) {
  const int num_cameras = static_cast<int>(p.cameras.size());
  const int num_points = static_cast<int>(p.points.size());
  bool any_fixed = false;
  for (const BundleCamera& cam : p.cameras) {
    any_fixed = any_fixed || cam.fixed;
    if (cam.fixed_translation_axis < -1 || cam.fixed_translation_axis > 2) {
      throw ValidationError("fixed_translation_axis outside {-1,0,1,2}");
    }
  }
  if (!any_fixed) {
    throw ValidationError("bundle problem has no fixed camera to hold gauge");
  }
  std::vector<char> referenced(p.points.size(), 0);
  for (const BundleObservation& obs : p.observations) {
    if (obs.camera < 0 || obs.camera >= num_cameras || obs.point < 0 ||
        obs.point >= num_points) {
      throw OutOfBoundsError("bundle observation references camera " +
                             std::to_string(obs.camera) + ", point " +
                             std::to_string(obs.point));
    }
    referenced[obs.point] = 1;
  }
  for (const BundleDepthConstraint& dc : p.depth_constraints) {
    if (dc.camera < 0 || dc.camera >= num_cameras || dc.point < 0 ||
        dc.point >= num_points) {
      throw OutOfBoundsError("depth constraint references camera " +
                             std::to_string(dc.camera) + ", point " +
                             std::to_string(dc.point));
    }
    referenced[dc.point] = 1;
  }
  for (int k = 0; k < num_points; ++k) {
    if (!referenced[k]) {
      throw ValidationError("point " + std::to_string(k) +
                            " has no residual block");
    }
  }
}

// Cost at explicit parameters, leaving the problem untouched. Candidates and
// the final report both go through here so acceptance and reporting agree.
double CostAt(const BundleProblem& p, const BundleOptions& o,
              const std::vector<PoseSE3>& poses,
              const std::vector<Eigen::Vector3d>& points) {
  double cost = 0.0;
  for (const BundleObservation& obs : p.observations) {
    const TruncatedSmoothL1Loss loss = ReprojLoss(obs.sigma_px, o);
    const Eigen::Vector3d p_cam = poses[obs.camera].Apply(points[obs.point]);
    if (!(p_cam.z() > 0.0)) {
      // A point behind the camera sits past the truncation plateau already;
      // charging the plateau keeps the cost continuous across the horizon.
      cost += loss.Cost(loss.max_squared);
      continue;
    }
    const Eigen::Vector2d proj =
        p.cameras[obs.camera].intrinsics.PixelFromCamera(p_cam);
    const double s =
        (proj - obs.pixel).squaredNorm() / (obs.sigma_px * obs.sigma_px);
    cost += loss.Cost(s);
  }
  if (o.depth_term_weight > 0.0) {
    for (const BundleDepthConstraint& dc : p.depth_constraints) {
      const double depth = poses[dc.camera].Apply(points[dc.point]).z();
      const double r_w = (depth - dc.measured_depth) / dc.sigma;
      cost += o.depth_term_weight * DepthLoss(dc.sigma, o).Cost(r_w * r_w);
    }
  }
  return cost;
}

}  // namespace

double EvaluateBundleCost(const BundleProblem& problem,
                          const BundleOptions& options) {
  ValidateProblem(problem);
  std::vector<PoseSE3> poses;
  std::vector<Eigen::Vector3d> points = problem.points;
  poses.reserve(problem.cameras.size());
  for (const BundleCamera& cam : problem.cameras) poses.push_back(cam.pose);
  return CostAt(problem, options, poses, points);
}

BundleReport SolveBundle(BundleProblem* problem, const BundleOptions& options) {
  ValidateProblem(*problem);
  const BundleProblem& p = *problem;
  const int num_cameras = static_cast<int>(p.cameras.size());
  const int num_points = static_cast<int>(p.points.size());
  const int n = 6 * num_cameras + 3 * num_points;
  const auto camera_offset = [](int c) { return 6 * c; };
  const auto point_offset = [num_cameras](int k) {
    return 6 * num_cameras + 3 * k;
  };

  std::vector<char> active(n, 1);
  for (int c = 0; c < num_cameras; ++c) {
    if (p.cameras[c].fixed) {
      std::fill_n(active.begin() + camera_offset(c), 6, 0);
    } else if (p.cameras[c].fixed_translation_axis >= 0) {
      active[camera_offset(c) + 3 + p.cameras[c].fixed_translation_axis] = 0;
    }
  }

  std::vector<PoseSE3> poses;
  poses.reserve(num_cameras);
  for (const BundleCamera& cam : p.cameras) poses.push_back(cam.pose);
  std::vector<Eigen::Vector3d> points = p.points;

  BundleReport report;
  double cost = CostAt(p, options, poses, points);
  if (!std::isfinite(cost)) {
    throw SolverError("bundle adjustment started from a non-finite cost");
  }
  report.initial_cost = cost;
  report.accepted_costs.push_back(cost);

  // One residual block couples at most one camera (6 dof) and one point
  // (3 dof); local jacobians are assembled into these slots.
  struct LocalBlock {
    int dof[9];
    Eigen::Matrix<double, 2, 9> j;
  };

  double lambda = options.initial_lambda;
  bool converged = cost == 0.0;
  int iter = 0;
  std::vector<Eigen::Triplet<double>> base;
  while (!converged && iter < options.max_iterations) {
    ++iter;
    base.clear();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);

    for (const BundleObservation& obs : p.observations) {
      const Eigen::Vector3d rotated = poses[obs.camera].q * points[obs.point];
      const Eigen::Vector3d p_cam = rotated + poses[obs.camera].t;
      if (!(p_cam.z() > 0.0)) continue;  // plateau: zero gradient
      const CameraIntrinsics& cam = p.cameras[obs.camera].intrinsics;
      const Eigen::Vector2d proj = cam.PixelFromCamera(p_cam);
      const double inv_sigma = 1.0 / obs.sigma_px;
      const Eigen::Vector2d r_w = (proj - obs.pixel) * inv_sigma;
      const TruncatedSmoothL1Loss loss = ReprojLoss(obs.sigma_px, options);
      const double weight = loss.Weight(r_w.squaredNorm());
      if (weight <= 0.0) continue;

      const double inv_z = 1.0 / p_cam.z();
      Eigen::Matrix<double, 2, 3> j_proj;
      j_proj << cam.fx * inv_z, 0.0, -cam.fx * p_cam.x() * inv_z * inv_z, 0.0,
          cam.fy * inv_z, -cam.fy * p_cam.y() * inv_z * inv_z;
      LocalBlock block;
      block.j.leftCols<3>() = j_proj * (-Skew(rotated)) * inv_sigma;
      block.j.block<2, 3>(0, 3) = j_proj * inv_sigma;
      block.j.rightCols<3>() =
          j_proj * poses[obs.camera].R() * inv_sigma;
      for (int i = 0; i < 6; ++i) block.dof[i] = camera_offset(obs.camera) + i;
      for (int i = 0; i < 3; ++i) block.dof[6 + i] = point_offset(obs.point) + i;

      for (int a = 0; a < 9; ++a) {
        const int da = block.dof[a];
        if (!active[da]) continue;
        const Eigen::Vector2d col_a = block.j.col(a);
        b[da] += weight * col_a.dot(r_w);
        for (int c2 = 0; c2 < 9; ++c2) {
          const int dc2 = block.dof[c2];
          if (!active[dc2]) continue;
          const double value = weight * col_a.dot(block.j.col(c2));
          base.emplace_back(da, dc2, value);
          if (da == dc2) diag[da] += value;
        }
      }
    }

    if (options.depth_term_weight > 0.0) {
      for (const BundleDepthConstraint& dc : p.depth_constraints) {
        const Eigen::Vector3d rotated = poses[dc.camera].q * points[dc.point];
        const double depth = rotated.z() + poses[dc.camera].t.z();
        const double inv_sigma = 1.0 / dc.sigma;
        const double r_w = (depth - dc.measured_depth) * inv_sigma;
        const double weight = options.depth_term_weight *
                              DepthLoss(dc.sigma, options).Weight(r_w * r_w);
        if (weight <= 0.0) continue;

        Eigen::Matrix<double, 1, 9> j;
        j.leftCols<3>() = (-Skew(rotated)).row(2) * inv_sigma;
        j.block<1, 3>(0, 3) = Eigen::RowVector3d(0.0, 0.0, inv_sigma);
        j.rightCols<3>() = poses[dc.camera].R().row(2) * inv_sigma;
        int dof[9];
        for (int i = 0; i < 6; ++i) dof[i] = camera_offset(dc.camera) + i;
        for (int i = 0; i < 3; ++i) dof[6 + i] = point_offset(dc.point) + i;

        for (int a = 0; a < 9; ++a) {
          const int da = dof[a];
          if (!active[da]) continue;
          b[da] += weight * j[a] * r_w;
          for (int c2 = 0; c2 < 9; ++c2) {
            const int dc2 = dof[c2];
            if (!active[dc2]) continue;
            const double value = weight * j[a] * j[c2];
            base.emplace_back(da, dc2, value);
            if (da == dc2) diag[da] += value;
          }
        }
      }
    }

    // Masked dofs and dofs no residual touches this round get identity rows
    // with zero right-hand side, so the factorization stays nonsingular and
    // those parameters hold still.
    for (int d = 0; d < n; ++d) {
      if (!active[d] || diag[d] < 1e-12) {
        base.emplace_back(d, d, 1.0);
        b[d] = 0.0;
      }
    }

    if (b.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      converged = true;
      break;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
      std::vector<Eigen::Triplet<double>> damped = base;
      for (int d = 0; d < n; ++d) {
        if (active[d] && diag[d] >= 1e-12) {
          damped.emplace_back(d, d, lambda * diag[d]);
        }
      }
      Eigen::SparseMatrix<double> a_mat(n, n);
      a_mat.setFromTriplets(damped.begin(), damped.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
      solver.compute(a_mat);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        if (lambda > options.max_lambda) break;
        continue;
      }
      Eigen::VectorXd step = solver.solve(-b);
      if (!step.allFinite()) {
        lambda *= 10.0;
        if (lambda > options.max_lambda) break;
        continue;
      }
      for (int d = 0; d < n; ++d) {
        if (!active[d]) step[d] = 0.0;
      }

      std::vector<PoseSE3> cand_poses = poses;
      std::vector<Eigen::Vector3d> cand_points = points;
      for (int c = 0; c < num_cameras; ++c) {
        if (p.cameras[c].fixed) continue;
        cand_poses[c].Retract(step.segment<3>(camera_offset(c)),
                              step.segment<3>(camera_offset(c) + 3));
      }
      for (int k = 0; k < num_points; ++k) {
        cand_points[k] += step.segment<3>(point_offset(k));
      }
      const double cand_cost = CostAt(p, options, cand_poses, cand_points);
      if (std::isfinite(cand_cost) && cand_cost < cost) {
        const double rel_drop = (cost - cand_cost) / cost;
        poses = std::move(cand_poses);
        points = std::move(cand_points);
        cost = cand_cost;
        report.accepted_costs.push_back(cost);
        ++report.accepted_steps;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (rel_drop < options.relative_decrease_tolerance || cost == 0.0) {
          converged = true;
        }
      } else {
        lambda *= 10.0;
        if (lambda > options.max_lambda) break;
      }
    }
    if (!accepted) {
      // No damping level yields a strict decrease: the iterate is optimal to
      // working precision.
      converged = true;
    }
  }

  for (int c = 0; c < num_cameras; ++c) {
    problem->cameras[c].pose = poses[c];
  }
  problem->points = points;
  report.final_cost = cost;
  report.iterations = iter;
  report.converged = converged;
  return report;
}

}  // namespace priorsfm
