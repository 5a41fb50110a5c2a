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

// Ground-truth world for tests and benchmarks: wireframe scenes rendered
// straight into edgemaps with known depth and correspondence ids.

#pragma once

#include "eslam/edgemap.hpp"
#include "eslam/se3.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace eslam {

struct WireSegment {
  int id = 0;
  std::vector<Vec3> pts;  // polyline, world frame, meters
};

struct WireScene {
  std::vector<WireSegment> segments;

  Vec3 centroid() const;
};

enum class SceneKind { kBoxRoom, kManhattanGrid, kRandomCurves };
enum class TrajectoryKind { kOrbit, kSquareLoop, kStraight };

struct SceneConfig {
  int clutter = 40;              // extra interior segments for box-room
  Vec3 half_extent{3.0, 2.5, 2.0};
  double min_segment_len = 0.3;  // meters
  int grid_n = 3;                // manhattan-grid lines per axis
  int curves = 25;               // random-curves count
};

struct TrajectoryConfig {
  double orbit_radius = 1.2;     // meters
  double orbit_sweep = 2.0 * M_PI;
  double square_side = 3.0;      // meters
  double square_corner_radius = 0.5;
  double straight_length = 1.0;  // meters
};

/// Identifies the true source of a rendered edgepoint.
struct TrueId {
  int segment = -1;
  double arclen = 0.0;  // meters from the segment's first vertex
};

struct RenderedFrame {
  Edgemap edgemap;
  std::vector<double> true_depths;  // camera-frame z per edgepoint
  std::vector<TrueId> true_ids;
  Pose pose;  // ground truth, world from camera
};

WireScene generate_scene(SceneKind kind, std::uint64_t seed, const SceneConfig& cfg = {});

/// Poses are world-from-camera and C1-smooth in the frame index.
/// square-loop ends exactly where it starts.
std::vector<Pose> generate_trajectory(TrajectoryKind kind, int n_frames, std::uint64_t seed,
                                      const TrajectoryConfig& cfg = {});

/// Samples every visible segment at roughly one-pixel projected spacing with
/// uniform tangential jitter, then perturbs positions along the projected
/// normal by Gaussian noise of std noise_px.
RenderedFrame render(const WireScene& scene, const Pose& pose, const Camera& K, double noise_px,
                     std::uint64_t seed);

/// render() once per pyramid level with level-scaled intrinsics.
std::vector<RenderedFrame> render_pyramid(const WireScene& scene, const Pose& pose,
                                          const Camera& K, int levels, double noise_px,
                                          std::uint64_t seed);

void write_scene_text(const WireScene& scene, const std::string& path);
void write_pose_text(const std::vector<Pose>& poses, const std::string& path);

}  // namespace eslam
