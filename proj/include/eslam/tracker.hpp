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

#include <vector>

#include "eslam/edgemap.hpp"
#include "eslam/se3.hpp"

namespace eslam {

struct TrackerConfig {
  double theta_max_deg = 45.0;   // normal gate, exclusive boundary
  bool intensity_gate = false;   // optional side-intensity gate
  double intensity_max = 30.0;   // levels, used when intensity_gate is on
  double huber_eps = 2.0;        // robust knee, px of the level being tracked
  int max_iterations = 20;       // per pyramid level
  double step_tolerance = 1e-6;  // twist norm
  int max_halvings = 8;
  double min_inlier_fraction = 0.3;
  int smooth_radius = 2;         // chain steps; 0 tracks raw depths
  double coarse_r_max = 2.0;     // depth propagation radius, fine px
  int min_tracked_points = 100;  // depth-bearing edgepoints required
};

/// Relative pose of the new frame with respect to the current keyframe,
/// with the final finest-level matches.
struct TrackResult {
  Pose pose;                 // new-frame-from-current
  std::vector<int> matches;  // per current finest edgepoint, kNoLink if none
  double inlier_fraction = 0.0;
  double rms_residual = 0.0;  // px over matched edgepoints
};

/// True iff the normals agree within theta_max (exclusive) and, when the
/// intensity gate is on, both side intensities differ by less than
/// intensity_max.
bool gate_match(const Edgepoint& a, const Edgepoint& b, const TrackerConfig& cfg = {});

/// Window mean of rho over chain neighbors within `radius` steps, self
/// included. Depth-less points (rho <= 0) neither contribute nor change.
/// Returns the smoothed values; em itself is untouched.
std::vector<double> smooth_depth(const Edgemap& em, int radius);

/// Assigns each coarse edgepoint the rho of the nearest fine edgepoint
/// (coarse positions scaled x2, distances in fine px, ties to the lower
/// index) within r_max. Returns the indices of coarse points with no fine
/// neighbor in range; their rho is set to 0 and they drop out of tracking.
std::vector<int> propagate_depth_to_coarse(const Edgemap& fine, Edgemap& coarse,
                                           double r_max = 2.0);

/// Coarse-to-fine alternation of nearest-edgepoint re-matching and one
/// IRLS Gauss-Newton step on the 6-DoF relative pose. cur needs rho only at
/// the finest level; smoothed depths are used internally and discarded.
/// Throws TrackingLost when fewer than min_tracked_points current edgepoints
/// carry depth, or the final inlier fraction drops below
/// min_inlier_fraction, or the estimate turns non-finite.
TrackResult track(const EdgemapPyramid& cur, const EdgemapPyramid& next, const Pose& init,
                  const TrackerConfig& cfg = {});

}  // namespace eslam
