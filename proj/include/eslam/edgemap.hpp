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
#include "eslam/types.hpp"

#include <vector>

namespace eslam {

constexpr int kNoLink = -1;

/// One sub-pixel edge sample. q and sigma are in pixels of the owning level,
/// m is the unit normal (gradient direction). rho and alpha are the depth
/// variables attached when the owning frame becomes a PKF; rho == 0 means
/// not yet estimated.
struct Edgepoint {
  Vec2 q = Vec2::Zero();
  Vec2 m = Vec2::UnitX();
  double rho = 0.0;
  double alpha = 0.0;
  double sigma = 1.0;
  int prev = kNoLink;
  int next = kNoLink;
  float side_intensity[2] = {0.0f, 0.0f};
  bool enabled = true;
};

struct Edgemap {
  std::vector<Edgepoint> points;
  int level = 0;
  Camera intrinsics;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

/// Pyramid of edgemaps, index 0 is the finest level.
using EdgemapPyramid = std::vector<Edgemap>;

/// Checks a.next == b implies b.prev == a over the whole map.
bool chains_symmetric(const Edgemap& em);

}  // namespace eslam
