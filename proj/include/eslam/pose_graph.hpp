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

#include <Eigen/Sparse>

#include <functional>
#include <unordered_map>
#include <vector>

#include "eslam/backend.hpp"

namespace eslam {

/// Looks up the current absolute (world-from-camera) pose of a keyframe.
using PoseLookup = std::function<Pose(int)>;

/// Prior over absolute poses, anchoring gauge and scale:
///   E = e^T Y e,  e_s = log( chi_s * lin_s^{-1} ) stacked over members.
struct AbsolutePrior {
  std::vector<int> member_ids;
  std::vector<Pose> lin_point;
  MatX Y;  // 6P x 6P
  bool empty() const { return member_ids.empty(); }
};

/// Energy of the absolute prior at the given poses.
double absolute_prior_energy(const AbsolutePrior& prior, const PoseLookup& pose_of);

/// The assembled normal equations of one pose-graph iteration over the free
/// poses, plus the per-prior edge caches needed to turn absolute increments
/// back into each prior's relative increments.
struct SparsePoseSystem {
  std::vector<int> pose_ids;  // free poses, block order
  Eigen::SparseMatrix<double> H;
  VecX g;  // increments solve H d = -g

  // Per relative prior (input order), per member slot: the Jacobian mapping
  // the PKF's absolute increment into the slot's relative increment (the
  // member side carries the opposite sign) and the constant deviation term.
  struct EdgeCache {
    std::vector<Mat6> J_k;
    std::vector<Vec6> c;
  };
  std::vector<EdgeCache> edges;

  int slot(int pose_id) const {
    const auto it = slot_of.find(pose_id);
    return it == slot_of.end() ? -1 : it->second;
  }
  std::unordered_map<int, int> slot_of;
};

/// Assembles the pose-graph normal equations from the relative priors and the
/// absolute prior. Poses listed in `fixed_ids` keep zero increment and only
/// contribute constants. Throws DisconnectedGraph when a free pose is touched
/// by no prior at all.
SparsePoseSystem build_pgo_system(const std::vector<const RelativePrior*>& priors,
                                  const AbsolutePrior* absolute,
                                  const std::vector<int>& pose_ids, const PoseLookup& pose_of,
                                  const std::vector<int>& fixed_ids = {});

/// Solves (H + damping I) d = -g by sparse Cholesky. Throws
/// NotPositiveDefinite when the factorization fails or produces non-finite
/// increments.
/// Solves H d = -g. With `damping_scales_diagonal` the damping multiplies the
/// diagonal of H (curvature-relative, Levenberg-Marquardt style); otherwise it
/// is added uniformly.
VecX solve_pgo(const SparsePoseSystem& sys, double damping = 0.0,
               bool damping_scales_diagonal = false);

/// The stacked relative increments of prior `prior_index` implied by the
/// absolute increments `delta` (fixed or absent poses contribute zero).
VecX relative_increments(const SparsePoseSystem& sys, const std::vector<const RelativePrior*>& priors,
                         int prior_index, const VecX& delta);

/// Re-linearization gate: true when the largest relative deviation of a
/// member transform from the prior's linearization point exceeds eps,
/// measured relative to the linearization twist norm (absolute when that norm
/// degenerates). Priors outside the temporal window never re-linearize.
bool needs_relinearization(const RelativePrior& prior, const PoseLookup& pose_of, double eps,
                           bool in_temporal_window = true);

/// Fuses the absolute prior with the leaving relative priors at the current
/// poses and Schur-eliminates every pose not listed in `retain_ids`. The
/// result's linearization points absorb the implied mean shift, so it is a
/// pure quadratic again.
AbsolutePrior marginalize_poses(const AbsolutePrior& absolute,
                                const std::vector<const RelativePrior*>& leaving,
                                const PoseLookup& pose_of, const std::vector<int>& retain_ids);

}  // namespace eslam
