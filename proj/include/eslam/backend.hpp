/*
 * Copyright 2026 The eslam Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <utility>
#include <vector>

#include "eslam/association.hpp"
#include "eslam/edgemap.hpp"
#include "eslam/residual.hpp"
#include "eslam/se3.hpp"

namespace eslam {

/// One PKF's sub-problem: its anchored edgepoints (variables alpha, rho)
/// observed from the keyframes of its covisibility window. `member_from_pkf`
/// holds the relative transforms at which the problem is linearized, and
/// `observations` the per-member measurement records, both parallel to
/// `member_ids`.
struct PkfProblem {
  int pkf_id = -1;
  const Edgemap* edgemap = nullptr;
  Camera intrinsics;
  std::vector<int> member_ids;
  std::vector<Pose> member_from_pkf;
  std::vector<const ObservationSet*> observations;
};

/// Per-edgepoint blocks of the linearized sub-problem. The point Hessian is
/// the symmetric 2x2 [H_aa, H_ar; H_ar, H_rr]; the pose coupling is sparse
/// over the observing member slots only.
struct PointBlocks {
  int point = -1;
  double g_a = 0.0, g_r = 0.0;
  double H_aa = 0.0, H_ar = 0.0, H_rr = 0.0;
  std::vector<int> members;   // observing member slots, ascending
  std::vector<Vec6> h_chi_a;  // pose-alpha coupling column per observing slot
  std::vector<Vec6> h_chi_r;  // pose-rho coupling column per observing slot
};

/// Second-order model of one sub-problem around its linearization point.
/// The pose Hessian is block diagonal (each residual touches one member);
/// all point-side structure stays factored in `points` — the dense Hessian
/// is never materialized.
struct LinearizedPkf {
  int pkf_id = -1;
  double E0 = 0.0;  // sum of squared residuals at the linearization point
  std::vector<int> member_ids;
  std::vector<Pose> member_from_pkf;
  VecX g_chi;     // 6M
  MatX H_chichi;  // 6M x 6M, block diagonal
  std::vector<PointBlocks> points;
};

/// Linearizes the reprojection residuals of every enabled edgepoint with at
/// least one member observation, plus their alpha priors. Residuals behind a
/// camera are dropped for this linearization. Throws InsufficientObservations
/// when no edgepoint has any member observation.
LinearizedPkf linearize_pkf(const PkfProblem& prob, double huber_knee = 2.0);

/// Sum of squared residuals of the sub-problem at its stated transforms and
/// current edgemap variables — the true (robustified) energy, no caching.
double evaluate_problem_energy(const PkfProblem& prob, double huber_knee = 2.0);

/// What survives of a point after marginalization: its inverted 2x2 block,
/// gradient, and pose couplings — everything needed to back-substitute the
/// point increment once the pose increment is known.
struct CachedPoint {
  int point = -1;
  double S_aa = 0.0, S_ar = 0.0, S_rr = 0.0;  // inverse of the point block
  double g_a = 0.0, g_r = 0.0;
  std::vector<int> members;
  std::vector<Vec6> h_chi_a;
  std::vector<Vec6> h_chi_r;
};

/// Pose-only quadratic prior of one PKF sub-problem, obtained by eliminating
/// every edgepoint through its 2x2 Schur block:
///   E(d) ~ E0 + 2 y^T d + d^T Y d,  d = stacked member pose increments.
struct RelativePrior {
  int pkf_id = -1;
  std::vector<int> member_ids;
  std::vector<Pose> lin_point;  // member_from_pkf at linearization
  double E0 = 0.0;
  VecX y;  // 6M information vector
  MatX Y;  // 6M x 6M information matrix, symmetric PSD
  std::vector<CachedPoint> cached;
  int frozen_points = 0;  // ill-conditioned blocks kept fixed instead
};

/// Eliminates the edgepoint variables point by point. Points whose 2x2 block
/// has condition above `max_condition` are kept fixed (their pose information
/// stays, their variables receive no update). Points are processed in groups
/// by the farthest member slot they reach, and the group accumulations are
/// then summed — the grouping mirrors how far each point expands into the
/// window and keeps the accumulations independent.
RelativePrior schur_marginalize(const LinearizedPkf& lin, double max_condition = 1e12);

/// Evaluates the prior's invariance to a uniform scaling along its
/// linearization translations, d0 = stacked [t_bar; 0]:
///   beta1 = 2 y^T d0,  beta2 = d0^T Y d0.
/// Both vanish for priors built from consistent linearizations.
std::pair<double, double> scale_nullspace_check(const RelativePrior& prior);

/// Applies the cached point back-substitution for the given stacked relative
/// pose increments (6M): [da; dr] = -S (g + H_chi^T d). rho is clamped to
/// [rho_min, rho_max]. Returns the number of points updated.
int update_edgepoints(const RelativePrior& prior, const VecX& delta_chi, Edgemap& em,
                      double rho_min = 1e-4, double rho_max = 1e3);

/// Quadratic energy of the prior at the given deviation from its
/// linearization point: E0 + 2 y^T c + c^T Y c.
double prior_energy(const RelativePrior& prior, const VecX& c);

/// Stacked tangent-space deviations of current member transforms from the
/// prior's linearization point: c_s = log( current_s * lin_s^{-1} ).
VecX prior_deviation(const RelativePrior& prior, const std::vector<Pose>& member_from_pkf);

}  // namespace eslam
