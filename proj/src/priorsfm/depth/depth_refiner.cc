#include "priorsfm/depth/depth_refiner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "priorsfm/util/errors.h"
#include "priorsfm/util/robust_loss.h"

namespace priorsfm {
namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Blends two one-sided squared residuals so the better-explained side
// dominates: a * sig(k * (b - a)) + b * sig(k * (a - b)). Approaches
// min(a, b) for large k and the plain average as k goes to zero.
double SoftMin(double a, double b, double k) {
  const double wa = Sigmoid(k * (b - a));
  return a * wa + b * (1.0 - wa);
}

// One-sided normal-integration stencil owned by a pixel. The residual is
// linear in the inverse depth w:
//     forward:   n_tilde * (w_n - w_c) - n_dir * w_c
//     backward:  n_tilde * (w_c - w_n) - n_dir * w_c
// which is the log-depth residual scaled by -w_c, so it is whitened by
// 1 / (w_c * sigma), with sigma the propagated normal uncertainty of the
// log-depth residual on that side.
struct SideTerm {
  int neighbor = -1;  // unknown index of the offset pixel; -1 if unusable
  double coeff_center = 0.0;
  double coeff_neighbor = 0.0;
  double inv_sigma = 0.0;
};

struct PixelTerms {
  double prior_depth = 0.0;
  double inv_sigma_prior = 0.0;
  // Side order: +u, -u, +v, -v. Directions are paired (u then v).
  SideTerm side[4];
};

struct AnchorTerm {
  int cell[4];
  double weight[4];
  double target = 0.0;
  double inv_sigma = 0.0;
};

// Squared whitened one-sided residual at the current inverse depths. The
// whitening uses the variable center depth, so the objective is a pure
// function of w.
double SideSquared(const SideTerm& side, const Eigen::VectorXd& w, int center) {
  const double r =
      side.coeff_center * w[center] + side.coeff_neighbor * w[side.neighbor];
  const double whitened = r * side.inv_sigma / w[center];
  return whitened * whitened;
}

class RefinementProblem {
 public:
  RefinementProblem(const Raster& depth_prior, const Raster& sigma_depth,
                    const NormalResidualModel& normal_model,
                    const std::vector<DepthAnchor>& anchors,
                    const RefineDepthOptions& options)
      : options_(options),
        prior_loss_{options.prior_truncation_sigma *
                    options.prior_truncation_sigma},
        integration_loss_{options.integration_truncation_sigma *
                          options.integration_truncation_sigma} {
    const int width = depth_prior.width();
    const int height = depth_prior.height();
    if (sigma_depth.width() != width || sigma_depth.height() != height) {
      throw ShapeMismatchError(
          "Depth prior and depth uncertainty rasters disagree in size");
    }
    const bool has_normals = !normal_model.n_tilde.empty();
    if (has_normals && (normal_model.width() != width ||
                        normal_model.height() != height)) {
      throw ShapeMismatchError(
          "Depth prior and normal residual model disagree in size");
    }

    // Unknowns are the pixels carrying a usable prior: positive depth with a
    // positive uncertainty.
    index_.assign(static_cast<size_t>(width) * height, -1);
    for (int v = 0; v < height; ++v) {
      for (int u = 0; u < width; ++u) {
        const float d = depth_prior.at(u, v);
        const float s = sigma_depth.at(u, v);
        if (std::isfinite(d) && d > 0.0f && std::isfinite(s) && s > 0.0f) {
          index_[Flat(u, v, width)] = static_cast<int>(pixel_u_.size());
          pixel_u_.push_back(u);
          pixel_v_.push_back(v);
        }
      }
    }
    const int n = static_cast<int>(pixel_u_.size());
    terms_.resize(n);
    for (int p = 0; p < n; ++p) {
      const int u = pixel_u_[p];
      const int v = pixel_v_[p];
      PixelTerms& t = terms_[p];
      t.prior_depth = depth_prior.at(u, v);
      t.inv_sigma_prior = 1.0 / sigma_depth.at(u, v);
      if (!has_normals || !normal_model.n_tilde.IsValid(u, v) ||
          !normal_model.n_xy.IsValid(u, v) ||
          !normal_model.variance_u.IsValid(u, v) ||
          !normal_model.variance_v.IsValid(u, v)) {
        continue;
      }
      const double n_tilde_u = normal_model.n_tilde.at(u, v, 0);
      const double n_tilde_v = normal_model.n_tilde.at(u, v, 1);
      const double n_x = normal_model.n_xy.at(u, v, 0);
      const double n_y = normal_model.n_xy.at(u, v, 1);
      const int offsets[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      for (int s = 0; s < 4; ++s) {
        const int nu = u + offsets[s][0];
        const int nv = v + offsets[s][1];
        if (nu < 0 || nu >= width || nv < 0 || nv >= height) continue;
        const int neighbor = index_[Flat(nu, nv, width)];
        if (neighbor < 0) continue;
        const bool u_direction = s < 2;
        const bool forward = (s % 2) == 0;
        const Raster& variance =
            u_direction ? normal_model.variance_u : normal_model.variance_v;
        const double var = variance.at(u, v, forward ? 0 : 1);
        if (!(var > 0.0) || !std::isfinite(var)) continue;
        const double n_tilde = u_direction ? n_tilde_u : n_tilde_v;
        const double n_dir = u_direction ? n_x : n_y;
        SideTerm& side = t.side[s];
        side.neighbor = neighbor;
        side.coeff_neighbor = forward ? n_tilde : -n_tilde;
        side.coeff_center = (forward ? -n_tilde : n_tilde) - n_dir;
        side.inv_sigma = 1.0 / std::sqrt(var);
      }
    }

    // Anchors constrain the bilinear interpolation of w over their footprint;
    // they only apply when the whole footprint is made of unknowns.
    for (const DepthAnchor& anchor : anchors) {
      if (!(anchor.target_depth > 0.0) || !(anchor.variance > 0.0) ||
          !std::isfinite(anchor.target_depth) ||
          !std::isfinite(anchor.variance)) {
        continue;
      }
      const double x = anchor.pixel.x();
      const double y = anchor.pixel.y();
      if (!(x >= 0.0 && y >= 0.0 && x <= width - 1.0 && y <= height - 1.0)) {
        continue;
      }
      int u0 = width > 1 ? static_cast<int>(std::floor(x)) : 0;
      int v0 = height > 1 ? static_cast<int>(std::floor(y)) : 0;
      if (u0 > width - 2) u0 = width > 1 ? width - 2 : 0;
      if (v0 > height - 2) v0 = height > 1 ? height - 2 : 0;
      const double fu = x - u0;
      const double fv = y - v0;
      const int cu[2] = {u0, u0 + 1 < width ? u0 + 1 : u0};
      const int cv[2] = {v0, v0 + 1 < height ? v0 + 1 : v0};
      const double wu[2] = {1.0 - fu, fu};
      const double wv[2] = {1.0 - fv, fv};
      AnchorTerm term;
      term.target = anchor.target_depth;
      term.inv_sigma = 1.0 / std::sqrt(anchor.variance);
      bool usable = true;
      for (int j = 0; j < 2 && usable; ++j) {
        for (int i = 0; i < 2 && usable; ++i) {
          const int cell = index_[Flat(cu[i], cv[j], width)];
          if (cell < 0) usable = false;
          term.cell[j * 2 + i] = cell;
          term.weight[j * 2 + i] = wu[i] * wv[j];
        }
      }
      if (usable) anchors_.push_back(term);
    }
  }

  int NumUnknowns() const { return static_cast<int>(terms_.size()); }
  int PixelU(int p) const { return pixel_u_[p]; }
  int PixelV(int p) const { return pixel_v_[p]; }
  double PriorDepth(int p) const { return terms_[p].prior_depth; }

  // The robust objective at the given inverse depths. Non-positive depths are
  // outside the domain and cost infinity.
  double Objective(const Eigen::VectorXd& w) const {
    const int n = NumUnknowns();
    for (int p = 0; p < n; ++p) {
      if (!(w[p] > 0.0)) return kInfinity;
    }
    double cost = 0.0;
    for (int p = 0; p < n; ++p) {
      const PixelTerms& t = terms_[p];
      const double r_prior = (1.0 / w[p] - t.prior_depth) * t.inv_sigma_prior;
      cost += prior_loss_.Cost(r_prior * r_prior);
      for (int dir = 0; dir < 2; ++dir) {
        const SideTerm& fwd = t.side[2 * dir];
        const SideTerm& bwd = t.side[2 * dir + 1];
        const bool has_fwd = fwd.neighbor >= 0;
        const bool has_bwd = bwd.neighbor >= 0;
        if (has_fwd && has_bwd) {
          const double s_fwd = integration_loss_.Cost(SideSquared(fwd, w, p));
          const double s_bwd = integration_loss_.Cost(SideSquared(bwd, w, p));
          cost += SoftMin(s_fwd, s_bwd, options_.bilateral_k);
        } else if (has_fwd) {
          cost += integration_loss_.Cost(SideSquared(fwd, w, p));
        } else if (has_bwd) {
          cost += integration_loss_.Cost(SideSquared(bwd, w, p));
        }
      }
    }
    for (const AnchorTerm& anchor : anchors_) {
      double w_interp = 0.0;
      for (int j = 0; j < 4; ++j) {
        w_interp += anchor.weight[j] * w[anchor.cell[j]];
      }
      if (!(w_interp > 0.0)) return kInfinity;
      const double r = (anchor.target - 1.0 / w_interp) * anchor.inv_sigma;
      const CauchyLoss loss{options_.anchor_cauchy_scale * anchor.inv_sigma};
      cost += loss.Cost(r * r);
    }
    return cost;
  }

  // Assembles the reweighted normal equations A w = b around the current
  // iterate: robust and bilateral weights, whitening depths, and the
  // linearization points of the nonlinear (prior, anchor) residuals are all
  // frozen at w0.
  void BuildNormalEquations(const Eigen::VectorXd& w0,
                            Eigen::SparseMatrix<double>* a,
                            Eigen::VectorXd* b) const {
    const int n = NumUnknowns();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<size_t>(n) * 10);
    *b = Eigen::VectorXd::Zero(n);
    std::vector<double> diagonal(n, 0.0);
    const auto add = [&](int row, int col, double value) {
      triplets.emplace_back(row, col, value);
      if (row == col) diagonal[row] += value;
    };

    for (int p = 0; p < n; ++p) {
      const PixelTerms& t = terms_[p];
      const double w0p = w0[p];
      // Prior term, linearized at w0: J = d((1/w - D) / sigma) / dw.
      const double r0 = (1.0 / w0p - t.prior_depth) * t.inv_sigma_prior;
      const double prior_weight = prior_loss_.Weight(r0 * r0);
      if (prior_weight > 0.0) {
        const double j = -t.inv_sigma_prior / (w0p * w0p);
        const double target = j * w0p - r0;
        add(p, p, prior_weight * j * j);
        (*b)[p] += prior_weight * j * target;
      }
      // Integration terms: linear rows with frozen whitening 1 / (w0 * sigma),
      // gated by the truncation and split between sides by the bilateral
      // weights of their truncated costs.
      for (int dir = 0; dir < 2; ++dir) {
        const SideTerm& fwd = t.side[2 * dir];
        const SideTerm& bwd = t.side[2 * dir + 1];
        const bool has_fwd = fwd.neighbor >= 0;
        const bool has_bwd = bwd.neighbor >= 0;
        if (!has_fwd && !has_bwd) continue;
        double s_fwd = 0.0;
        double s_bwd = 0.0;
        double bilateral_fwd = 1.0;
        double bilateral_bwd = 1.0;
        if (has_fwd) s_fwd = SideSquared(fwd, w0, p);
        if (has_bwd) s_bwd = SideSquared(bwd, w0, p);
        if (has_fwd && has_bwd) {
          bilateral_fwd = Sigmoid(options_.bilateral_k *
                                  (integration_loss_.Cost(s_bwd) -
                                   integration_loss_.Cost(s_fwd)));
          bilateral_bwd = 1.0 - bilateral_fwd;
        }
        const SideTerm* sides[2] = {&fwd, &bwd};
        const double raw[2] = {s_fwd, s_bwd};
        const double bilateral[2] = {bilateral_fwd, bilateral_bwd};
        for (int k = 0; k < 2; ++k) {
          const SideTerm& side = *sides[k];
          if (side.neighbor < 0) continue;
          const double weight = bilateral[k] * integration_loss_.Weight(raw[k]);
          if (weight <= 0.0) continue;
          const double whiten = side.inv_sigma / w0p;
          const double a_c = side.coeff_center * whiten;
          const double a_n = side.coeff_neighbor * whiten;
          add(p, p, weight * a_c * a_c);
          add(side.neighbor, side.neighbor, weight * a_n * a_n);
          add(p, side.neighbor, weight * a_c * a_n);
          add(side.neighbor, p, weight * a_c * a_n);
        }
      }
    }
    for (const AnchorTerm& anchor : anchors_) {
      double w_interp = 0.0;
      for (int j = 0; j < 4; ++j) {
        w_interp += anchor.weight[j] * w0[anchor.cell[j]];
      }
      const double r0 = anchor.target - 1.0 / w_interp;
      const CauchyLoss loss{options_.anchor_cauchy_scale};
      const double irls = loss.Weight(r0 * r0) * anchor.inv_sigma *
                          anchor.inv_sigma;
      double jacobian[4];
      double target = -r0;
      for (int j = 0; j < 4; ++j) {
        jacobian[j] = anchor.weight[j] / (w_interp * w_interp);
        target += jacobian[j] * w0[anchor.cell[j]];
      }
      for (int j = 0; j < 4; ++j) {
        if (jacobian[j] == 0.0) continue;
        (*b)[anchor.cell[j]] += irls * jacobian[j] * target;
        for (int i = 0; i < 4; ++i) {
          if (jacobian[i] == 0.0) continue;
          add(anchor.cell[j], anchor.cell[i], irls * jacobian[j] * jacobian[i]);
        }
      }
    }
    // A pixel can lose every constraint (prior truncated away, no usable
    // neighbors); pin it to its current value so the system stays definite.
    for (int p = 0; p < n; ++p) {
      if (diagonal[p] < 1e-12) {
        triplets.emplace_back(p, p, 1.0);
        (*b)[p] += w0[p];
      }
    }
    a->resize(n, n);
    a->setFromTriplets(triplets.begin(), triplets.end());
  }

 private:
  static size_t Flat(int u, int v, int width) {
    return static_cast<size_t>(v) * width + u;
  }

  RefineDepthOptions options_;
  TruncatedL2Loss prior_loss_;
  TruncatedL2Loss integration_loss_;
  std::vector<int> index_;
  std::vector<int> pixel_u_;
  std::vector<int> pixel_v_;
  std::vector<PixelTerms> terms_;
  std::vector<AnchorTerm> anchors_;
};

}  // namespace

RefineDepthResult RefineDepth(const Raster& depth_prior,
                              const Raster& sigma_depth,
                              const NormalResidualModel& normal_model,
                              const std::vector<DepthAnchor>& anchors,
                              const Raster* init,
                              const RefineDepthOptions& options) {
  RefinementProblem problem(depth_prior, sigma_depth, normal_model, anchors,
                            options);
  const int n = problem.NumUnknowns();
  RefineDepthResult result;
  result.depth = Raster(depth_prior.width(), depth_prior.height(), 1);
  if (n == 0) {
    return result;
  }

  Eigen::VectorXd w(n);
  for (int p = 0; p < n; ++p) {
    double depth = problem.PriorDepth(p);
    if (init != nullptr && !init->empty()) {
      const float candidate = init->at(problem.PixelU(p), problem.PixelV(p));
      if (std::isfinite(candidate) && candidate > 0.0f) {
        depth = candidate;
      }
    }
    w[p] = 1.0 / depth;
  }

  double cost = problem.Objective(w);
  if (!std::isfinite(cost)) {
    throw SolverError("Depth refinement started from a non-finite cost");
  }

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                           Eigen::Lower | Eigen::Upper>
      solver;
  solver.setTolerance(options.cg_tolerance);
  solver.setMaxIterations(options.cg_max_iterations);

  int accepted_iterations = 0;
  for (int iter = 0; iter < options.max_outer_iterations; ++iter) {
    if (cost == 0.0) break;
    Eigen::SparseMatrix<double> a;
    Eigen::VectorXd b;
    problem.BuildNormalEquations(w, &a, &b);
    solver.compute(a);
    const Eigen::VectorXd solution = solver.solveWithGuess(b, w);
    if (!solution.allFinite()) break;

    // The solved step optimizes a frozen-weight surrogate; accept it (or a
    // backtracked fraction) only when the true objective strictly decreases.
    bool accepted = false;
    double step = 1.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const Eigen::VectorXd candidate = w + step * (solution - w);
      const double candidate_cost = problem.Objective(candidate);
      if (candidate_cost < cost) {
        const double previous = cost;
        w = candidate;
        cost = candidate_cost;
        ++accepted_iterations;
        accepted = true;
        if ((previous - cost) / previous < options.relative_cost_tolerance) {
          iter = options.max_outer_iterations;  // converged
        }
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }

  for (int p = 0; p < n; ++p) {
    result.depth.at(problem.PixelU(p), problem.PixelV(p)) =
        static_cast<float>(1.0 / w[p]);
  }
  result.final_cost = cost;
  result.iterations = accepted_iterations;
  return result;
}

bool ShouldSkipRefinement(double previous_cost, double current_cost,
                          double threshold) {
  if (previous_cost == current_cost) return true;
  if (!(previous_cost > 0.0)) return false;
  return std::abs(current_cost - previous_cost) / previous_cost < threshold;
}

}  // namespace priorsfm
