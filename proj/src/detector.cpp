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

#include "eslam/detector.hpp"

#include "eslam/errors.hpp"

#include <cmath>
#include <numeric>

namespace eslam {

namespace {

constexpr int kBorder = 3;
constexpr double kNormalCompat = 0.70710678;  // cos 45 deg

ImageF gaussian_smooth(const Image& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;

  ImageF tmp(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xi = std::clamp(x + i, 0, img.width - 1);
        acc += kernel[i + radius] * img.at(xi, y);
      }
      tmp.at(x, y) = static_cast<float>(acc);
    }
  }
  ImageF out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yi = std::clamp(y + i, 0, img.height - 1);
        acc += kernel[i + radius] * tmp.at(x, yi);
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

struct Gradients {
  ImageF gx, gy, mag;
};

// Gradient magnitude of the smoothed image at a sub-pixel position,
// half-step central differences on bilinear samples. Shared by detection
// and estimate_sigma so both produce identical uncertainties.
double smoothed_gradient_mag(const ImageF& s, const Vec2& q) {
  const double h = 0.5;
  const double gx = (s.sample(q.x() + h, q.y()) - s.sample(q.x() - h, q.y())) / (2 * h);
  const double gy = (s.sample(q.x(), q.y() + h) - s.sample(q.x(), q.y() - h)) / (2 * h);
  return std::hypot(gx, gy);
}

Gradients central_gradients(const ImageF& s) {
  Gradients g{ImageF(s.width, s.height), ImageF(s.width, s.height), ImageF(s.width, s.height)};
  for (int y = 1; y < s.height - 1; ++y) {
    for (int x = 1; x < s.width - 1; ++x) {
      const double dx = 0.5 * (s.at(x + 1, y) - s.at(x - 1, y));
      const double dy = 0.5 * (s.at(x, y + 1) - s.at(x, y - 1));
      g.gx.at(x, y) = static_cast<float>(dx);
      g.gy.at(x, y) = static_cast<float>(dy);
      g.mag.at(x, y) = static_cast<float>(std::sqrt(dx * dx + dy * dy));
    }
  }
  return g;
}

void link_chains(Edgemap& em, const std::vector<int>& pixel_of, int width, int height) {
  // Grid of edgepoint indices keyed by their integer pixel.
  std::vector<int> grid(static_cast<std::size_t>(width) * height, kNoLink);
  for (std::size_t i = 0; i < em.points.size(); ++i) grid[pixel_of[i]] = static_cast<int>(i);

  const auto candidate = [&](int i, int want_forward) {
    const auto& a = em.points[i];
    const Vec2 tangent(-a.m.y(), a.m.x());
    const int px = pixel_of[i] % width;
    const int py = pixel_of[i] / width;
    int best = kNoLink;
    double best_dist = 1e18;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = px + dx, ny = py + dy;
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
        const int j = grid[static_cast<std::size_t>(ny) * width + nx];
        if (j == kNoLink) continue;
        const auto& b = em.points[j];
        if (a.m.dot(b.m) < kNormalCompat) continue;
        const Vec2 d = b.q - a.q;
        const double along = d.dot(tangent) * want_forward;
        if (along < 0.2) continue;
        if (d.squaredNorm() < best_dist) {
          best_dist = d.squaredNorm();
          best = j;
        }
      }
    }
    return best;
  };

  for (std::size_t i = 0; i < em.points.size(); ++i) {
    em.points[i].next = candidate(static_cast<int>(i), +1);
    em.points[i].prev = candidate(static_cast<int>(i), -1);
  }
  // Keep only mutually agreed links.
  for (std::size_t i = 0; i < em.points.size(); ++i) {
    auto& p = em.points[i];
    if (p.next != kNoLink && em.points[p.next].prev != static_cast<int>(i)) p.next = kNoLink;
    if (p.prev != kNoLink && em.points[p.prev].next != static_cast<int>(i)) p.prev = kNoLink;
  }
}

void decimate_chains(Edgemap& em) {
  const int n = static_cast<int>(em.points.size());
  std::vector<char> visited(n, 0), drop(n, 0);

  const auto walk = [&](int start) {
    // Walk the chain from start, dropping every second point.
    int i = start, step = 0;
    while (i != kNoLink && !visited[i]) {
      visited[i] = 1;
      if (step % 2 == 1) {
        // Never drop the closing neighbor of a loop start.
        if (em.points[i].next != start) drop[i] = 1;
      }
      ++step;
      i = em.points[i].next;
    }
  };

  for (int i = 0; i < n; ++i)
    if (!visited[i] && em.points[i].prev == kNoLink) walk(i);  // open chains from heads
  for (int i = 0; i < n; ++i)
    if (!visited[i]) walk(i);  // remaining are loops

  // Relink over dropped points.
  for (int i = 0; i < n; ++i) {
    if (drop[i]) continue;
    int nx = em.points[i].next;
    while (nx != kNoLink && drop[nx]) nx = em.points[nx].next;
    em.points[i].next = nx;
    int pv = em.points[i].prev;
    while (pv != kNoLink && drop[pv]) pv = em.points[pv].prev;
    em.points[i].prev = pv;
  }

  std::vector<int> remap(n, kNoLink);
  Edgemap out;
  out.level = em.level;
  out.intrinsics = em.intrinsics;
  for (int i = 0; i < n; ++i) {
    if (!drop[i]) {
      remap[i] = static_cast<int>(out.points.size());
      out.points.push_back(em.points[i]);
    }
  }
  for (auto& p : out.points) {
    if (p.next != kNoLink) p.next = remap[p.next];
    if (p.prev != kNoLink) p.prev = remap[p.prev];
  }
  em = std::move(out);
}

}  // namespace

Image downsample_half(const Image& img) {
  Image out(img.width / 2, img.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const int s = img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) + img.at(2 * x, 2 * y + 1) +
                    img.at(2 * x + 1, 2 * y + 1);
      out.at(x, y) = static_cast<std::uint8_t>((s + 2) / 4);
    }
  }
  return out;
}

double sigma_from_gradient(double g, const DetectorConfig& cfg) {
  if (g <= 0.0) return cfg.sigma_max;
  return std::clamp(cfg.sigma0 * cfg.g_ref / g, cfg.sigma_min, cfg.sigma_max);
}

double estimate_sigma(const Edgepoint& ep, const Image& image, const DetectorConfig& cfg) {
  const ImageF s = gaussian_smooth(image, cfg.gaussian_sigma);
  return sigma_from_gradient(smoothed_gradient_mag(s, ep.q), cfg);
}

Edgemap detect_edges(const Image& image, const DetectorConfig& cfg, const Camera& K) {
  if (image.width < 16 || image.height < 16) throw ImageTooSmall();

  const ImageF s = gaussian_smooth(image, cfg.gaussian_sigma);
  const Gradients g = central_gradients(s);

  Edgemap em;
  em.intrinsics = K;
  std::vector<int> pixel_of;

  for (int y = kBorder; y < image.height - kBorder; ++y) {
    for (int x = kBorder; x < image.width - kBorder; ++x) {
      const double mag = g.mag.at(x, y);
      if (mag < cfg.gradient_threshold) continue;
      const double ux = g.gx.at(x, y) / mag;
      const double uy = g.gy.at(x, y) / mag;

      const double m_plus = g.mag.sample(x + ux, y + uy);
      const double m_minus = g.mag.sample(x - ux, y - uy);
      if (!(mag >= m_plus && mag > m_minus)) continue;

      // Parabola through the three gradient samples along the normal.
      const double denom = m_minus - 2.0 * mag + m_plus;
      double delta = 0.0;
      if (denom < -1e-9) delta = 0.5 * (m_minus - m_plus) / denom;
      delta = std::clamp(delta, -1.0, 1.0);

      // Continuous gradients have no inflection pair across the edge.
      const auto along = [&](double k) { return s.sample(x + k * ux, y + k * uy); };
      const double d2m = along(-2.0) - 2.0 * along(-1.0) + along(0.0);
      const double d2p = along(0.0) - 2.0 * along(1.0) + along(2.0);
      if (d2m * d2p >= 0.0) continue;
      if (std::abs(d2p - d2m) * 0.5 < cfg.third_derivative_threshold) continue;

      Edgepoint ep;
      ep.q = Vec2(x + delta * ux, y + delta * uy);
      ep.m = Vec2(ux, uy);
      ep.sigma = sigma_from_gradient(smoothed_gradient_mag(s, ep.q), cfg);
      ep.side_intensity[0] = static_cast<float>(s.sample(ep.q.x() + 2.0 * ux, ep.q.y() + 2.0 * uy));
      ep.side_intensity[1] = static_cast<float>(s.sample(ep.q.x() - 2.0 * ux, ep.q.y() - 2.0 * uy));

      if (K.has_distortion) {
        ep.m = undistort_direction(ep.q, ep.m, K);
        ep.q = undistort_point(ep.q, K);
      }

      em.points.push_back(ep);
      pixel_of.push_back(y * image.width + x);
    }
  }

  link_chains(em, pixel_of, image.width, image.height);
  if (cfg.decimate) decimate_chains(em);
  return em;
}

EdgemapPyramid build_pyramid(const Image& image, const DetectorConfig& cfg, const Camera& K) {
  EdgemapPyramid pyr;
  Image level_img = image;
  for (int l = 0; l < cfg.pyramid_levels; ++l) {
    if (l > 0) level_img = downsample_half(level_img);
    Edgemap em = detect_edges(level_img, cfg, K.scaled(l));
    em.level = l;
    pyr.push_back(std::move(em));
  }
  return pyr;
}

}  // namespace eslam
