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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eslam/detector.hpp"
#include "eslam/errors.hpp"
#include "eslam/index_image.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

using namespace eslam;

namespace {

Camera plain_camera(int w, int h) { return Camera(100.0, 100.0, w / 2.0, h / 2.0, w, h); }

// Box-coverage anti-aliased vertical step: lo left of edge_x, hi right of it.
// Pixel x spans [x - 0.5, x + 0.5].
Image step_image(int w, int h, double edge_x, int lo, int hi) {
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double hi_frac = std::clamp(x + 0.5 - edge_x, 0.0, 1.0);
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(lo + (hi - lo) * hi_frac));
    }
  }
  return img;
}

// Filled disk, 4x4 supersampled coverage per pixel.
Image disk_image(int w, int h, double cx, double cy, double r, int bg, int fg) {
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int inside = 0;
      for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
          const double px = x - 0.5 + (sx + 0.5) / 4.0;
          const double py = y - 0.5 + (sy + 0.5) / 4.0;
          const double dx = px - cx, dy = py - cy;
          if (dx * dx + dy * dy <= r * r) ++inside;
        }
      }
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(bg + (fg - bg) * inside / 16.0));
    }
  }
  return img;
}

struct ChainStats {
  int open = 0;
  int closed = 0;
};

// Requires a symmetric edgemap; counts open chains and closed cycles.
ChainStats analyze_chains(const Edgemap& em) {
  const int n = static_cast<int>(em.points.size());
  std::vector<char> vis(n, 0);
  ChainStats st;
  for (int i = 0; i < n; ++i) {
    if (vis[i] || em.points[i].prev != kNoLink) continue;
    ++st.open;
    for (int j = i; j != kNoLink; j = em.points[j].next) vis[j] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (vis[i]) continue;
    ++st.closed;
    int j = i;
    do {
      vis[j] = 1;
      j = em.points[j].next;
    } while (j != i && j != kNoLink && !vis[j]);
  }
  return st;
}

// Exhaustive nearest-edgepoint assignment, the reference for build_index_image.
IndexImage brute_force_index(const Edgemap& em) {
  IndexImage out;
  out.width = em.intrinsics.width;
  out.height = em.intrinsics.height;
  out.cells.assign(static_cast<std::size_t>(out.width) * out.height, kEmptyCell);
  const double cap2 = kIndexRadius * kIndexRadius;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double best_d2 = std::numeric_limits<double>::infinity();
      int32_t best = kEmptyCell;
      for (std::size_t i = 0; i < em.points.size(); ++i) {
        const double dx = x - em.points[i].q.x();
        const double dy = y - em.points[i].q.y();
        const double d2 = dy * dy + dx * dx;
        if (d2 < best_d2) {
          best_d2 = d2;
          best = static_cast<int32_t>(i);
        }
      }
      if (best_d2 <= cap2) out.cells[static_cast<std::size_t>(y) * out.width + x] = best;
    }
  }
  return out;
}

Edgemap make_edgemap(int w, int h, const std::vector<Vec2>& qs) {
  Edgemap em;
  em.intrinsics = plain_camera(w, h);
  for (const Vec2& q : qs) {
    Edgepoint ep;
    ep.q = q;
    em.points.push_back(ep);
  }
  return em;
}

bool index_images_equal(const IndexImage& a, const IndexImage& b) {
  return a.width == b.width && a.height == b.height && a.cells == b.cells;
}

}  // namespace

TEST_CASE("constant image yields an empty edgemap") {
  Image img(32, 32);
  for (auto& v : img.data) v = 127;
  const Edgemap em = detect_edges(img, DetectorConfig{}, plain_camera(32, 32));
  CHECK(em.points.empty());
}

TEST_CASE("images below 16x16 are rejected") {
  CHECK_THROWS_AS(detect_edges(Image(15, 32), DetectorConfig{}, plain_camera(15, 32)),
                  ImageTooSmall);
  CHECK_THROWS_AS(detect_edges(Image(32, 15), DetectorConfig{}, plain_camera(32, 15)),
                  ImageTooSmall);
}

TEST_CASE("vertical step at x = 10.3 localizes within 0.1 px with horizontal normals") {
  const Image img = step_image(40, 32, 10.3, 100, 140);
  const Edgemap em = detect_edges(img, DetectorConfig{}, plain_camera(40, 32));
  REQUIRE(!em.points.empty());
  for (const auto& ep : em.points) {
    CHECK(std::abs(ep.q.x() - 10.3) < 0.1);
    CHECK(std::abs(std::abs(ep.m.x()) - 1.0) < 1e-9);
    CHECK(std::abs(ep.m.y()) < 1e-9);
    CHECK(std::abs(ep.m.norm() - 1.0) < 1e-6);
    CHECK(ep.sigma > 0.0);
    CHECK(em.intrinsics.in_image(ep.q));
  }
  CHECK(chains_symmetric(em));
  const ChainStats st = analyze_chains(em);
  CHECK(st.open == 1);
  CHECK(st.closed == 0);
  // Step rises with x, so the gradient points along +x.
  CHECK(em.points[0].m.x() == doctest::Approx(1.0));
}

TEST_CASE("step edges with contrast >= 20 localize to 0.15 px on average") {
  const double offsets[] = {10.3, 15.5, 20.72, 25.18, 30.01, 33.63};
  const int contrasts[] = {20, 60, 200};
  double err_sum = 0.0;
  int count = 0;
  for (double edge_x : offsets) {
    for (int c : contrasts) {
      const Image img = step_image(48, 32, edge_x, 30, 30 + c);
      const Edgemap em = detect_edges(img, DetectorConfig{}, plain_camera(48, 32));
      REQUIRE(!em.points.empty());
      for (const auto& ep : em.points) {
        err_sum += std::abs(ep.q.x() - edge_x);
        ++count;
      }
    }
  }
  CHECK(count > 0);
  CHECK(err_sum / count < 0.15);
}

TEST_CASE("filled disk produces one closed chain that walks back to its start") {
  const Image img = disk_image(64, 64, 31.7, 32.3, 14.0, 60, 200);
  const Edgemap em = detect_edges(img, DetectorConfig{}, plain_camera(64, 64));
  REQUIRE(em.points.size() > 10);
  CHECK(chains_symmetric(em));
  const ChainStats st = analyze_chains(em);
  CHECK(st.open == 0);
  CHECK(st.closed == 1);

  // One cycle covering every point: walking next from 0 returns after size steps.
  const int n = static_cast<int>(em.points.size());
  int i = 0, steps = 0;
  do {
    REQUIRE(em.points[i].next != kNoLink);
    i = em.points[i].next;
    ++steps;
  } while (i != 0 && steps <= n);
  CHECK(i == 0);
  CHECK(steps == n);
}

TEST_CASE("third derivative test rejects a smooth intensity ramp") {
  // Wide linear ramp: strong gradient everywhere but no inflection pair.
  Image img(64, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x)
      img.at(x, y) = static_cast<std::uint8_t>(std::min(255, 10 + 3 * x));
  const Edgemap em = detect_edges(img, DetectorConfig{}, plain_camera(64, 32));
  CHECK(em.points.empty());
}

TEST_CASE("decimation halves chains but preserves their topology") {
  DetectorConfig full;
  full.decimate = false;
  DetectorConfig half;
  half.decimate = true;

  const Image disk = disk_image(64, 64, 31.7, 32.3, 14.0, 60, 200);
  const Image step = step_image(40, 32, 10.3, 100, 140);
  for (const Image* img : {&disk, &step}) {
    const Camera K = plain_camera(img->width, img->height);
    const Edgemap em_full = detect_edges(*img, full, K);
    const Edgemap em_half = detect_edges(*img, half, K);
    CHECK(chains_symmetric(em_half));
    CHECK(em_half.points.size() < em_full.points.size());
    CHECK(em_half.points.size() >= em_full.points.size() / 2);

    const ChainStats sf = analyze_chains(em_full);
    const ChainStats sh = analyze_chains(em_half);
    CHECK(sf.open == sh.open);
    CHECK(sf.closed == sh.closed);

    // Decimation keeps full-resolution positions: survivors are a subset.
    std::set<std::pair<double, double>> full_qs;
    for (const auto& ep : em_full.points) full_qs.insert({ep.q.x(), ep.q.y()});
    for (const auto& ep : em_half.points)
      CHECK(full_qs.count({ep.q.x(), ep.q.y()}) == 1);
  }
}

TEST_CASE("detection is deterministic") {
  const Image img = disk_image(64, 64, 31.7, 32.3, 14.0, 60, 200);
  const Edgemap a = detect_edges(img, DetectorConfig{}, plain_camera(64, 64));
  const Edgemap b = detect_edges(img, DetectorConfig{}, plain_camera(64, 64));
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].q == b.points[i].q);
    CHECK(a.points[i].m == b.points[i].m);
    CHECK(a.points[i].sigma == b.points[i].sigma);
    CHECK(a.points[i].prev == b.points[i].prev);
    CHECK(a.points[i].next == b.points[i].next);
  }
}

TEST_CASE("detector sigma equals the standalone uncertainty estimate") {
  const Image img = step_image(40, 32, 10.3, 100, 140);
  const DetectorConfig cfg;
  const Edgemap em = detect_edges(img, cfg, plain_camera(40, 32));
  REQUIRE(!em.points.empty());
  for (const auto& ep : em.points) CHECK(ep.sigma == estimate_sigma(ep, img, cfg));
}

TEST_CASE("uncertainty model: reference gradient, clamps, monotonicity") {
  const DetectorConfig cfg;
  CHECK(sigma_from_gradient(cfg.g_ref, cfg) == doctest::Approx(0.75));
  CHECK(sigma_from_gradient(1e9, cfg) == doctest::Approx(0.25));
  CHECK(sigma_from_gradient(1e-9, cfg) == doctest::Approx(cfg.sigma_max));
  CHECK(sigma_from_gradient(0.0, cfg) == doctest::Approx(cfg.sigma_max));
  CHECK(sigma_from_gradient(10.0, cfg) == doctest::Approx(1.5));
  double prev = std::numeric_limits<double>::infinity();
  for (double g = 1.0; g < 100.0; g += 0.5) {
    const double s = sigma_from_gradient(g, cfg);
    CHECK(s <= prev);
    prev = s;
  }
}

TEST_CASE("estimate_sigma on a linear ramp with gradient g_ref gives sigma0") {
  // I = 10 + 20 x, exactly linear in the smoothing window around x = 6.
  Image img(32, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 32; ++x)
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(10 + 20 * x, 0, 255));
  const DetectorConfig cfg;
  Edgepoint ep;
  ep.q = Vec2(6.0, 12.0);
  CHECK(estimate_sigma(ep, img, cfg) == doctest::Approx(0.75).epsilon(1e-3));
}

TEST_CASE("estimate_sigma clamps to sigma_min on a maximal-contrast step") {
  const Image img = step_image(32, 24, 16.0, 0, 255);
  const DetectorConfig cfg;
  Edgepoint ep;
  ep.q = Vec2(16.0, 12.0);
  CHECK(estimate_sigma(ep, img, cfg) == doctest::Approx(cfg.sigma_min));
}

TEST_CASE("sigma is non-increasing over a contrast sweep") {
  const DetectorConfig cfg;
  double prev = std::numeric_limits<double>::infinity();
  for (int c : {10, 20, 40, 80, 160, 250}) {
    const Image img = step_image(32, 24, 16.0, 0, c);
    Edgepoint ep;
    ep.q = Vec2(16.0, 12.0);
    const double s = estimate_sigma(ep, img, cfg);
    CHECK(s <= prev);
    prev = s;
  }
}

TEST_CASE("pyramid: single level, halved positions, exact focal scaling") {
  const Image img = step_image(80, 64, 20.6, 80, 160);
  const Camera K(123.0, 117.0, 40.0, 32.0, 80, 64);

  DetectorConfig one;
  one.pyramid_levels = 1;
  CHECK(build_pyramid(img, one, K).size() == 1);

  DetectorConfig cfg;
  cfg.pyramid_levels = 3;
  const EdgemapPyramid pyr = build_pyramid(img, cfg, K);
  REQUIRE(pyr.size() == 3);
  for (int l = 0; l < 3; ++l) {
    CHECK(pyr[l].level == l);
    CHECK(pyr[l].intrinsics.fx == K.fx / (1 << l));
    CHECK(pyr[l].intrinsics.fy == K.fy / (1 << l));
    CHECK(pyr[l].intrinsics.width == K.width >> l);
  }
  REQUIRE(!pyr[0].points.empty());
  REQUIRE(!pyr[1].points.empty());

  const auto mean_x = [](const Edgemap& em) {
    double s = 0.0;
    for (const auto& ep : em.points) s += ep.q.x();
    return s / em.points.size();
  };
  CHECK(std::abs(mean_x(pyr[1]) - mean_x(pyr[0]) / 2.0) < 0.5);
}

TEST_CASE("undistortion at detection time shifts edgepoints off the raw pixel grid") {
  const Image img = step_image(64, 48, 20.6, 80, 160);
  Camera K(123.0, 117.0, 32.0, 24.0, 64, 48);
  const Edgemap ideal = detect_edges(img, DetectorConfig{}, K);

  Camera Kd = K;
  Kd.k1 = 1e-8;  // nearly identity mapping, but exercises the remap path
  Kd.has_distortion = true;
  const Edgemap remapped = detect_edges(img, DetectorConfig{}, Kd);
  REQUIRE(ideal.points.size() == remapped.points.size());
  for (std::size_t i = 0; i < ideal.points.size(); ++i) {
    CHECK((ideal.points[i].q - remapped.points[i].q).norm() < 1e-4);
    CHECK(std::abs(remapped.points[i].m.norm() - 1.0) < 1e-6);
  }
}

TEST_CASE("index image: single edgepoint fills exactly the capped disk") {
  const Edgemap em = make_edgemap(40, 30, {Vec2(5.0, 5.0)});
  const IndexImage idx = build_index_image(em);
  CHECK(idx.width == 40);
  CHECK(idx.height == 30);
  CHECK(idx.at(5, 5) == 0);
  CHECK(idx.at(21, 5) == 0);   // distance exactly 16: inside the cap
  CHECK(idx.at(22, 5) == kEmptyCell);
  CHECK(idx.at(17, 17) == kEmptyCell);  // sqrt(288) > 16
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      const double d2 = (x - 5.0) * (x - 5.0) + (y - 5.0) * (y - 5.0);
      CHECK(idx.at(x, y) == (d2 <= 256.0 ? 0 : kEmptyCell));
    }
  }
  CHECK(index_images_equal(idx, brute_force_index(em)));
}

TEST_CASE("index image matches brute force on random sub-pixel edgemaps") {
  std::mt19937 rng(7u);
  for (int trial = 0; trial < 140; ++trial) {
    const int w = 16 + static_cast<int>(rng() % 65);
    const int h = 16 + static_cast<int>(rng() % 45);
    const int n = 1 + static_cast<int>(rng() % 60);
    std::uniform_real_distribution<double> ux(0.0, w - 1.0), uy(0.0, h - 1.0);
    std::vector<Vec2> qs;
    for (int i = 0; i < n; ++i) qs.emplace_back(ux(rng), uy(rng));
    const Edgemap em = make_edgemap(w, h, qs);
    REQUIRE(index_images_equal(build_index_image(em), brute_force_index(em)));
  }
}

TEST_CASE("index image matches brute force under heavy integer-coordinate ties") {
  std::mt19937 rng(19u);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = 16 + static_cast<int>(rng() % 33);
    const int h = 16 + static_cast<int>(rng() % 25);
    const int n = 1 + static_cast<int>(rng() % 40);
    std::vector<Vec2> qs;
    for (int i = 0; i < n; ++i)
      qs.emplace_back(static_cast<double>(rng() % w), static_cast<double>(rng() % h));
    const Edgemap em = make_edgemap(w, h, qs);
    REQUIRE(index_images_equal(build_index_image(em), brute_force_index(em)));
  }
}

TEST_CASE("index image ties resolve to the lower edgepoint index") {
  // Two points equidistant from the midpoint column.
  const Edgemap em = make_edgemap(20, 20, {Vec2(4.0, 5.0), Vec2(6.0, 5.0)});
  const IndexImage idx = build_index_image(em);
  CHECK(idx.at(5, 5) == 0);
  CHECK(idx.at(5, 12) == 0);
  CHECK(idx.at(4, 5) == 0);
  CHECK(idx.at(6, 5) == 1);

  // Same tie along a column (equal parabola crossing at a row).
  const Edgemap em2 = make_edgemap(20, 20, {Vec2(5.0, 7.0), Vec2(5.0, 3.0)});
  const IndexImage idx2 = build_index_image(em2);
  CHECK(idx2.at(5, 5) == 0);

  // Three-way tie, concurrent parabolas.
  const Edgemap em3 =
      make_edgemap(20, 20, {Vec2(4.0, 5.0), Vec2(6.0, 5.0), Vec2(5.0, 4.0)});
  const IndexImage idx3 = build_index_image(em3);
  CHECK(idx3.at(5, 5) == 0);
}

TEST_CASE("index image of a detected edgemap matches brute force") {
  const Image img = disk_image(64, 64, 31.7, 32.3, 14.0, 60, 200);
  const Edgemap em = detect_edges(img, DetectorConfig{}, plain_camera(64, 64));
  REQUIRE(!em.points.empty());
  CHECK(index_images_equal(build_index_image(em), brute_force_index(em)));
}

TEST_CASE("index image rejects an empty edgemap") {
  Edgemap em;
  em.intrinsics = plain_camera(32, 32);
  CHECK_THROWS_AS(build_index_image(em), EmptyEdgemap);
}

TEST_CASE("sub-pixel nearest lookup is exact, radius-capped, and tie-broken low") {
  const Edgemap em = make_edgemap(40, 30, {Vec2(5.0, 5.0), Vec2(5.75, 5.0)});
  const IndexImage idx = build_index_image(em);

  // True nearest at sub-pixel granularity: both queries round to the same
  // pixel yet resolve to different edgepoints.
  CHECK(idx.nearest(Vec2(5.25, 5.0)) == 0);
  CHECK(idx.nearest(Vec2(5.5, 5.0)) == 1);
  CHECK(idx.nearest(Vec2(5.375, 5.0)) == 0);  // equidistant: lower index
  CHECK(idx.nearest(Vec2(5.0, 5.0)) == 0);
  CHECK(idx.nearest(Vec2(5.75, 5.0)) == 1);

  // Radius cap is inclusive and measured from the query itself; queries
  // outside the image still see edgepoints in range.
  CHECK(idx.nearest(Vec2(5.0, 21.0)) == 0);
  CHECK(idx.nearest(Vec2(5.0, 21.01)) == kEmptyCell);
  CHECK(idx.nearest(Vec2(-1.0, 5.0)) == 0);
  CHECK(idx.nearest(Vec2(-12.0, 5.0)) == kEmptyCell);
  CHECK(idx.nearest(Vec2(5.0, 29.6)) == kEmptyCell);

  // Randomized equality against brute force over all edgepoints.
  const Edgemap dense = make_edgemap(40, 30, {Vec2(3.2, 4.1), Vec2(3.9, 4.0), Vec2(4.4, 4.05),
                                              Vec2(20.0, 15.0), Vec2(20.5, 15.5), Vec2(36.9, 2.2)});
  const IndexImage didx = build_index_image(dense);
  std::mt19937 rng(77u);
  std::uniform_real_distribution<double> ux(-2.0, 42.0), uy(-2.0, 32.0);
  for (int t = 0; t < 500; ++t) {
    const Vec2 q(ux(rng), uy(rng));
    double best_d2 = std::numeric_limits<double>::infinity();
    int best = kEmptyCell;
    for (std::size_t j = 0; j < dense.points.size(); ++j) {
      const double d2 = (dense.points[j].q - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(j);
      }
    }
    if (best_d2 > kIndexRadius * kIndexRadius) best = kEmptyCell;
    CHECK(didx.nearest(q) == best);
  }
}
