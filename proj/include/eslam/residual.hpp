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

#include "eslam/camera.hpp"
#include "eslam/edgemap.hpp"
#include "eslam/se3.hpp"
#include "eslam/types.hpp"

namespace eslam {

/// Modified Huber weight of the unweighted residual: unit inside the knee,
/// 1/|e| outside. Kept constant while differentiating (IRLS).
double robust_weight(double e, double knee);

/// Homogeneous edge normal [m_x/fx, m_y/fy, 0]: the image normal lifted to the
/// unit-depth plane.
Vec3 homogeneous_normal(const Vec2& m, const Camera& K);

/// Homogeneous edge position: the anchor observation ray shifted along the
/// homogeneous normal by alpha.
Vec3 edge_ray(const Edgepoint& ep, const Camera& K);

/// Reprojection residual of one anchored edgepoint against one measurement,
/// with the analytic derivatives used throughout the optimizer. All
/// quantities carry the robust and sigma normalization w/sigma, with the
/// robust weight frozen at the evaluation point.
struct ResidualJet {
  double r = 0.0;        // (w/sigma) * (q_obs - pi(p)) . m_obs
  double J_rho = 0.0;    // d r / d rho
  double J_alpha = 0.0;  // d r / d alpha
  Vec6 J_pose = Vec6::Zero();  // d r / d delta, pose perturbed exp(delta) * X
  Vec3 p = Vec3::Zero();       // transformed homogeneous point
  double w = 1.0;              // robust weight at the evaluation point
};

/// Evaluates the residual of edgepoint `ep` (anchored in its PKF, variables
/// rho/alpha) against the measurement (q_obs, m_obs, sigma_obs) taken in an
/// observing keyframe, where `observer_from_anchor` maps anchor-frame
/// coordinates into the observer frame. Throws BehindCamera when the
/// transformed point has non-positive depth.
ResidualJet residual_and_jacobians(const Edgepoint& ep, const Vec2& q_obs, const Vec2& m_obs,
                                   double sigma_obs, const Pose& observer_from_anchor,
                                   const Camera& K, double huber_knee = 2.0);

/// Position prior on alpha: r = alpha / sigma, d r / d alpha = 1 / sigma.
/// Not robustly weighted.
inline double alpha_prior_residual(const Edgepoint& ep) { return ep.alpha / ep.sigma; }

}  // namespace eslam
