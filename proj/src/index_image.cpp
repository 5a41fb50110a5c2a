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
#include "eslam/index_image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eslam/errors.hpp"

namespace eslam {
namespace {

// One edgepoint as seen from a fixed image column: vertical position and the
// squared horizontal distance to that column.
struct ColumnSite {
  double y;
  double fx2;
  int32_t idx;
};

// Exact nearest-site assignment along one column: lower envelope of the unit
// parabolas (y - s.y)^2 + s.fx2, evaluated at integer rows. Sites must be
// sorted by (y, idx) with strictly increasing y after the dedup below.
void scan_column(std::vector<ColumnSite>& sites, int height, double cap2, int32_t* col,
                 std::size_t stride) {
  if (sites.empty()) return;

  // Sites sharing the same vertical position are the same parabola up to a
  // constant offset; only the best of each run can ever win.
  std::size_t n = 0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (n > 0 && sites[n - 1].y == sites[i].y) {
      const bool better = sites[i].fx2 < sites[n - 1].fx2 ||
                          (sites[i].fx2 == sites[n - 1].fx2 && sites[i].idx < sites[n - 1].idx);
      if (better) sites[n - 1] = sites[i];
    } else {
      sites[n++] = sites[i];
    }
  }
  sites.resize(n);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  static thread_local std::vector<int> v;     // envelope segment -> site
  static thread_local std::vector<double> z;  // left boundary of each segment
  v.assign(n, 0);
  z.assign(n + 1, 0.0);

  auto intersect = [&](int a, int b) {
    // Crossing of parabolas a, b with sites[b].y > sites[a].y.
    const double ya = sites[a].y, yb = sites[b].y;
    return ((sites[b].fx2 + yb * yb) - (sites[a].fx2 + ya * ya)) / (2.0 * (yb - ya));
  };

  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (std::size_t i = 1; i < n; ++i) {
    double s = intersect(v[k], static_cast<int>(i));
    while (s <= z[k]) {
      --k;
      s = intersect(v[k], static_cast<int>(i));
    }
    ++k;
    v[k] = static_cast<int>(i);
    z[k] = s;
    z[k + 1] = kInf;
  }

  // The envelope always yields the exact minimum distance, but a site popped
  // at a concurrent crossing can still tie that minimum at the crossing row.
  // The lower-index rule therefore re-checks every site able to reach the
  // minimum; ties only exist inside a +-kIndexRadius row window once the cell
  // is within the cap.
  const int top = k;
  k = 0;
  std::size_t lo = 0, hi = 0;
  for (int y = 0; y < height; ++y) {
    while (k < top && z[k + 1] < y) ++k;
    const ColumnSite& owner = sites[v[k]];
    const double dyo = y - owner.y;
    const double best_d2 = dyo * dyo + owner.fx2;
    if (best_d2 > cap2) continue;
    int32_t best_idx = owner.idx;
    while (lo < n && sites[lo].y < y - kIndexRadius) ++lo;
    while (hi < n && sites[hi].y <= y + kIndexRadius) ++hi;
    for (std::size_t c = lo; c < hi; ++c) {
      const double dy = y - sites[c].y;
      const double dy2 = dy * dy;
      if (dy2 > best_d2 || sites[c].idx >= best_idx) continue;
      if (dy2 + sites[c].fx2 == best_d2) best_idx = sites[c].idx;
    }
    col[static_cast<std::size_t>(y) * stride] = best_idx;
  }
}

}  // namespace

IndexImage build_index_image(const Edgemap& em) {
  if (em.points.empty()) throw EmptyEdgemap();

  IndexImage out;
  out.width = em.intrinsics.width;
  out.height = em.intrinsics.height;
  out.cells.assign(static_cast<std::size_t>(out.width) * out.height, kEmptyCell);

  // Bucket edgepoints into the columns they can reach. Walking them in
  // (y, idx) order keeps every column list sorted for the envelope scan.
  std::vector<int32_t> order(em.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
    const double ya = em.points[a].q.y(), yb = em.points[b].q.y();
    return ya != yb ? ya < yb : a < b;
  });

  std::vector<std::vector<ColumnSite>> cols(out.width);
  for (int32_t idx : order) {
    const Vec2& q = em.points[idx].q;
    const int x0 = std::max(0, static_cast<int>(std::ceil(q.x() - kIndexRadius)));
    const int x1 = std::min(out.width - 1, static_cast<int>(std::floor(q.x() + kIndexRadius)));
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - q.x();
      cols[x].push_back({q.y(), dx * dx, idx});
    }
  }

  const double cap2 = kIndexRadius * kIndexRadius;
  for (int x = 0; x < out.width; ++x)
    scan_column(cols[x], out.height, cap2, out.cells.data() + x,
                static_cast<std::size_t>(out.width));

  // Counting-sort the edgepoints into per-pixel buckets (index order kept
  // inside each bucket) for the sub-pixel queries.
  const std::size_t n_cells = static_cast<std::size_t>(out.width) * out.height;
  const std::size_t n = em.points.size();
  out.bucket_start.assign(n_cells + 1, 0);
  out.site_x.resize(n);
  out.site_y.resize(n);
  const auto cell_of = [&](const Vec2& q) {
    const int x = std::clamp(static_cast<int>(std::lround(q.x())), 0, out.width - 1);
    const int y = std::clamp(static_cast<int>(std::lround(q.y())), 0, out.height - 1);
    return static_cast<std::size_t>(y) * out.width + x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    out.site_x[i] = em.points[i].q.x();
    out.site_y[i] = em.points[i].q.y();
    ++out.bucket_start[cell_of(em.points[i].q) + 1];
  }
  for (std::size_t c = 0; c < n_cells; ++c) out.bucket_start[c + 1] += out.bucket_start[c];
  out.bucket_sites.resize(n);
  std::vector<int32_t> cursor(out.bucket_start.begin(), out.bucket_start.end() - 1);
  for (std::size_t i = 0; i < n; ++i)
    out.bucket_sites[cursor[cell_of(em.points[i].q)]++] = static_cast<int32_t>(i);
  return out;
}

int32_t IndexImage::nearest(const Vec2& q) const {
  if (bucket_start.empty()) return kEmptyCell;
  const int cx = static_cast<int>(std::lround(q.x()));
  const int cy = static_cast<int>(std::lround(q.y()));
  double best_d2 = std::numeric_limits<double>::infinity();
  int32_t best = kEmptyCell;

  const auto visit = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const std::size_t c = static_cast<std::size_t>(y) * width + x;
    for (int32_t k = bucket_start[c]; k < bucket_start[c + 1]; ++k) {
      const int32_t idx = bucket_sites[k];
      const double dx = site_x[idx] - q.x();
      const double dy = site_y[idx] - q.y();
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
  };

  // Expanding Chebyshev rings. A site whose pixel lies on ring r is at least
  // r - 1 away from the query, so once best_d2 < r*r no later ring can win.
  const int r_cap = static_cast<int>(kIndexRadius) + 2;
  for (int r = 0; r <= r_cap; ++r) {
    for (int y = cy - r; y <= cy + r; ++y) {
      if (y == cy - r || y == cy + r) {
        for (int x = cx - r; x <= cx + r; ++x) visit(x, y);
      } else {
        visit(cx - r, y);
        visit(cx + r, y);
      }
    }
    if (best_d2 < static_cast<double>(r) * r) break;
  }
  return best_d2 <= kIndexRadius * kIndexRadius ? best : kEmptyCell;
}

}  // namespace eslam
