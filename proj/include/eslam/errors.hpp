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

#include <stdexcept>
#include <string>

namespace eslam {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Rotation angle within 1e-6 of pi; the log map is not numerically stable there.
struct AngleNearPi : Error {
  AngleNearPi() : Error("rotation angle too close to pi for a stable log") {}
};

// Point has non-positive depth in the target camera.
struct BehindCamera : Error {
  BehindCamera() : Error("point behind camera") {}
};

struct NoConvergence : Error {
  explicit NoConvergence(const std::string& what) : Error(what) {}
};

struct ImageTooSmall : Error {
  ImageTooSmall() : Error("image smaller than the minimum detector footprint") {}
};

struct EmptyEdgemap : Error {
  EmptyEdgemap() : Error("edgemap has no edgepoints") {}
};

struct TrackingLost : Error {
  explicit TrackingLost(const std::string& what) : Error(what) {}
};

// Relative pose baseline too short to define epipolar lines.
struct DegenerateEpipolar : Error {
  DegenerateEpipolar() : Error("baseline too short for epipolar geometry") {}
};

// MatchSet consumed at a stage the operation does not accept.
struct BadMatchStage : Error {
  explicit BadMatchStage(const std::string& what) : Error("bad match stage: " + what) {}
};

// Candidate keyframe could not be aligned against the current one.
struct AlignmentFailed : Error {
  explicit AlignmentFailed(const std::string& what) : Error("alignment failed: " + what) {}
};

// Loop correction raised the total energy at every damping level; state was rolled back.
struct LoopOptimizationDiverged : Error {
  LoopOptimizationDiverged() : Error("loop correction diverged, state rolled back") {}
};

struct InsufficientObservations : Error {
  InsufficientObservations() : Error("covisibility window has no cross observations") {}
};

struct DisconnectedGraph : Error {
  DisconnectedGraph() : Error("pose graph has a variable touched by no prior") {}
};

struct NotPositiveDefinite : Error {
  NotPositiveDefinite() : Error("normal equations not positive definite") {}
};

struct TooFewPairs : Error {
  TooFewPairs() : Error("fewer than 3 associated pose pairs") {}
};

struct DegenerateGeometry : Error {
  DegenerateGeometry() : Error("point set degenerate, alignment underdetermined") {}
};

struct MissingFile : Error {
  explicit MissingFile(const std::string& path) : Error("missing file: " + path) {}
};

struct MalformedLine : Error {
  explicit MalformedLine(const std::string& what) : Error("malformed line: " + what) {}
};

struct MalformedCsv : Error {
  explicit MalformedCsv(const std::string& what) : Error("malformed csv: " + what) {}
};

struct UnknownKey : Error {
  explicit UnknownKey(const std::string& key) : Error("unknown config key: " + key) {}
};

struct MalformedValue : Error {
  explicit MalformedValue(const std::string& what) : Error("malformed config value: " + what) {}
};

}  // namespace eslam
