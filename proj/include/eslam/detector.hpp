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
#include "eslam/image.hpp"

namespace eslam {

struct DetectorConfig {
  double gaussian_sigma = 1.5;            // px
  double gradient_threshold = 4.0;        // intensity/px
  double third_derivative_threshold = 0.5;  // intensity/px^3
  bool decimate = true;
  int pyramid_levels = 3;
  // Uncertainty model sigma = clamp(sigma0 * g_ref / g, sigma_min, sigma_max).
  double sigma0 = 0.75;   // px
  double sigma_min = 0.25;  // px
  double sigma_max = 2.0;   // px
  double g_ref = 20.0;      // intensity/px
};

/// Maximal-gradient edge extraction on a smoothed image: non-maximal
/// suppression along the gradient, 3-point parabola sub-pixel refinement,
/// third-derivative rejection of continuous gradients, 8-neighbor chaining
/// between compatible normals, optional decimation of every second point.
Edgemap detect_edges(const Image& image, const DetectorConfig& cfg, const Camera& K);

/// detect_edges per level on a 2x downsampled image stack; level L intrinsics
/// are K scaled by 2^-L. Level 0 is the finest.
EdgemapPyramid build_pyramid(const Image& image, const DetectorConfig& cfg, const Camera& K);

double sigma_from_gradient(double g, const DetectorConfig& cfg);

/// Recomputes the smoothed gradient magnitude at ep.q and applies the
/// uncertainty model. For distortion-free intrinsics this reproduces the
/// sigma the detector stored; with distortion ep.q has been remapped and the
/// sample lands near, not on, the raw pixel.
double estimate_sigma(const Edgepoint& ep, const Image& image, const DetectorConfig& cfg);

}  // namespace eslam
