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

#include "eslam/residual.hpp"

#include <cmath>

namespace eslam {

double robust_weight(double e, double knee) {
  const double a = std::abs(e);
  return a < knee ? 1.0 : 1.0 / a;
}

Vec3 homogeneous_normal(const Vec2& m, const Camera& K) {
  return Vec3(m.x() / K.fx, m.y() / K.fy, 0.0);
}

Vec3 edge_ray(const Edgepoint& ep, const Camera& K) {
  return homogeneous_ray(ep.q, K) + homogeneous_normal(ep.m, K) * ep.alpha;
}

ResidualJet residual_and_jacobians(const Edgepoint& ep, const Vec2& q_obs, const Vec2& m_obs,
                                   double sigma_obs, const Pose& observer_from_anchor,
                                   const Camera& K, double huber_knee) {
  ResidualJet jet;
  // Projection is scale invariant, so the transformed point can be scaled by
  // rho: p = R (q_h + m_h alpha) + t rho projects where the true point does.
  jet.p = observer_from_anchor.R * edge_ray(ep, K) + observer_from_anchor.t * ep.rho;
  const Vec2 pi = project(jet.p, K);  // throws BehindCamera for p.z <= 0

  const double e = (q_obs - pi).dot(m_obs);
  jet.w = robust_weight(e, huber_knee);
  const double s = jet.w / sigma_obs;
  jet.r = s * e;

  // row = d(pi(p) . m_obs)/dp; the residual differentiates through -pi.
  const RowVec3 row = m_obs.transpose() * project_jacobian(jet.p, K);
  jet.J_rho = -s * row.dot(observer_from_anchor.t);
  jet.J_alpha = -s * row.dot(observer_from_anchor.R * homogeneous_normal(ep.m, K));
  jet.J_pose.head<3>() = -s * ep.rho * row.transpose();
  jet.J_pose.tail<3>() = s * (row * skew(jet.p)).transpose();
  return jet;
}

}  // namespace eslam
