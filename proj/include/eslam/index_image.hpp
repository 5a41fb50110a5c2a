/******************************************************************************
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
 *****************************************************************************/
#pragma once

#include <cstdint>
#include <vector>

#include "eslam/edgemap.hpp"
#include "eslam/types.hpp"

namespace eslam {

// Lookup radius cap in pixels, at every pyramid level. Distance exactly at
// the cap is still assigned.
constexpr double kIndexRadius = 16.0;
constexpr int32_t kEmptyCell = -1;

// Per-pixel index of the closest edgepoint of one edgemap. Cells farther
// than kIndexRadius from every edgepoint hold kEmptyCell. Equidistant
// edgepoints resolve to the lower index.
//
// Alongside the painted cells the structure keeps the edgepoint positions
// bucketed by pixel so that nearest() can answer sub-pixel queries with the
// true closest edgepoint rather than the owner of the rounded cell.
struct IndexImage {
  int width = 0;
  int height = 0;
  std::vector<int32_t> cells;  // row-major

  // Compressed per-pixel site lists plus copied positions, for exact
  // sub-pixel nearest-neighbor queries.
  std::vector<int32_t> bucket_start;  // size width*height + 1
  std::vector<int32_t> bucket_sites;  // edgepoint indices grouped by pixel
  std::vector<double> site_x;
  std::vector<double> site_y;

  int32_t at(int x, int y) const {
    return cells[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x];
  }

  // Exact nearest edgepoint for a sub-pixel query; kEmptyCell when no
  // edgepoint lies within the radius cap. Equidistant edgepoints resolve to
  // the lower index.
  int32_t nearest(const Vec2& q) const;
};

IndexImage build_index_image(const Edgemap& em);

}  // namespace eslam
