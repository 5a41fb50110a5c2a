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

#include "eslam/pose_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>

#include "eslam/errors.hpp"

namespace eslam {

namespace {

// Dense accumulation workspace; poses absent from slot_of are held fixed.
struct Assembly {
  MatX A;
  VecX b;
  std::unordered_map<int, int> slot_of;

  int slot(int id) const {
    const auto it = slot_of.find(id);
    return it == slot_of.end() ? -1 : it->second;
  }
};

SparsePoseSystem::EdgeCache accumulate_relative(Assembly& as, const RelativePrior& prior,
                                                const PoseLookup& pose_of) {
  const int m = static_cast<int>(prior.member_ids.size());
  SparsePoseSystem::EdgeCache cache;
  cache.J_k.resize(m);
  cache.c.resize(m);

  const Pose chi_k = pose_of(prior.pkf_id);
  const int slot_k = as.slot(prior.pkf_id);
  std::vector<int> slot_j(m);
  VecX c(6 * m);
  for (int s = 0; s < m; ++s) {
    const Pose chi_j = pose_of(prior.member_ids[s]);
    const Pose err = (chi_j.inverse() * chi_k) * prior.lin_point[s].inverse();
    cache.c[s] = log_se3(err);
    cache.J_k[s] = log_derivative_at(err) * adjoint(chi_j.inverse());
    slot_j[s] = as.slot(prior.member_ids[s]);
    c.segment<6>(6 * s) = cache.c[s];
  }

  const VecX z = prior.y + prior.Y * c;
  for (int s1 = 0; s1 < m; ++s1) {
    const Vec6 gs = cache.J_k[s1].transpose() * z.segment<6>(6 * s1);
    if (slot_k >= 0) as.b.segment<6>(6 * slot_k) += gs;
    if (slot_j[s1] >= 0) as.b.segment<6>(6 * slot_j[s1]) -= gs;
    for (int s2 = 0; s2 < m; ++s2) {
      const Mat6 P = cache.J_k[s1].transpose() * prior.Y.block<6, 6>(6 * s1, 6 * s2) *
                     cache.J_k[s2];
      if (slot_k >= 0) as.A.block<6, 6>(6 * slot_k, 6 * slot_k) += P;
      if (slot_k >= 0 && slot_j[s2] >= 0) as.A.block<6, 6>(6 * slot_k, 6 * slot_j[s2]) -= P;
      if (slot_j[s1] >= 0 && slot_k >= 0) as.A.block<6, 6>(6 * slot_j[s1], 6 * slot_k) -= P;
      if (slot_j[s1] >= 0 && slot_j[s2] >= 0)
        as.A.block<6, 6>(6 * slot_j[s1], 6 * slot_j[s2]) += P;
    }
  }
  return cache;
}

void accumulate_absolute(Assembly& as, const AbsolutePrior& prior, const PoseLookup& pose_of) {
  const int p = static_cast<int>(prior.member_ids.size());
  VecX e(6 * p);
  std::vector<Mat6> D(p);
  std::vector<int> slot(p);
  for (int s = 0; s < p; ++s) {
    const Pose err = pose_of(prior.member_ids[s]) * prior.lin_point[s].inverse();
    e.segment<6>(6 * s) = log_se3(err);
    D[s] = log_derivative_at(err);
    slot[s] = as.slot(prior.member_ids[s]);
  }
  const VecX z = prior.Y * e;
  for (int s1 = 0; s1 < p; ++s1) {
    if (slot[s1] < 0) continue;
    as.b.segment<6>(6 * slot[s1]) += D[s1].transpose() * z.segment<6>(6 * s1);
    for (int s2 = 0; s2 < p; ++s2) {
      if (slot[s2] < 0) continue;
      as.A.block<6, 6>(6 * slot[s1], 6 * slot[s2]) +=
          D[s1].transpose() * prior.Y.block<6, 6>(6 * s1, 6 * s2) * D[s2];
    }
  }
}

// Pseudo-inverse solve of a symmetric PSD system through its eigenvalues.
VecX pinv_solve(const MatX& A, const VecX& b) {
  Eigen::SelfAdjointEigenSolver<MatX> es(A);
  const VecX lam = es.eigenvalues();
  const double tol = 1e-10 * std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  VecX inv = VecX::Zero(lam.size());
  for (int i = 0; i < lam.size(); ++i)
    if (lam[i] > tol) inv[i] = 1.0 / lam[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * b;
}

MatX pinv_product(const MatX& A, const MatX& B) {
  Eigen::SelfAdjointEigenSolver<MatX> es(A);
  const VecX lam = es.eigenvalues();
  const double tol = 1e-10 * std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  VecX inv = VecX::Zero(lam.size());
  for (int i = 0; i < lam.size(); ++i)
    if (lam[i] > tol) inv[i] = 1.0 / lam[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * B;
}

}  // namespace

double absolute_prior_energy(const AbsolutePrior& prior, const PoseLookup& pose_of) {
  if (prior.empty()) return 0.0;
  const int p = static_cast<int>(prior.member_ids.size());
  VecX e(6 * p);
  for (int s = 0; s < p; ++s)
    e.segment<6>(6 * s) = log_se3(pose_of(prior.member_ids[s]) * prior.lin_point[s].inverse());
  return e.dot(prior.Y * e);
}

SparsePoseSystem build_pgo_system(const std::vector<const RelativePrior*>& priors,
                                  const AbsolutePrior* absolute,
                                  const std::vector<int>& pose_ids, const PoseLookup& pose_of,
                                  const std::vector<int>& fixed_ids) {
  SparsePoseSystem sys;
  sys.pose_ids = pose_ids;
  const std::set<int> fixed(fixed_ids.begin(), fixed_ids.end());

  Assembly as;
  for (std::size_t i = 0; i < pose_ids.size(); ++i) {
    if (fixed.count(pose_ids[i])) throw Error("a pose cannot be both free and fixed");
    as.slot_of[pose_ids[i]] = static_cast<int>(i);
  }

  std::set<int> touched;
  for (const RelativePrior* pr : priors) {
    touched.insert(pr->pkf_id);
    touched.insert(pr->member_ids.begin(), pr->member_ids.end());
  }
  if (absolute != nullptr)
    touched.insert(absolute->member_ids.begin(), absolute->member_ids.end());
  for (int id : pose_ids)
    if (!touched.count(id)) throw DisconnectedGraph();

  const int n = 6 * static_cast<int>(pose_ids.size());
  as.A = MatX::Zero(n, n);
  as.b = VecX::Zero(n);
  for (const RelativePrior* pr : priors) sys.edges.push_back(accumulate_relative(as, *pr, pose_of));
  if (absolute != nullptr && !absolute->empty()) accumulate_absolute(as, *absolute, pose_of);

  as.A = 0.5 * (as.A + as.A.transpose().eval());
  sys.H = as.A.sparseView();
  sys.g = as.b;
  sys.slot_of = std::move(as.slot_of);
  return sys;
}

VecX solve_pgo(const SparsePoseSystem& sys, double damping,
               bool damping_scales_diagonal) {
  if (sys.pose_ids.empty()) return VecX();
  Eigen::SparseMatrix<double> H = sys.H;
  if (damping > 0.0) {
    Eigen::SparseMatrix<double> d(H.rows(), H.cols());
    d.setIdentity();
    if (damping_scales_diagonal) {
      const VecX diag = sys.H.diagonal();
      // A floor keeps directions the priors leave flat from reaching the
      // factorization as exact zero pivots.
      const double floor = 1e-12 * std::max(1.0, diag.maxCoeff());
      for (int i = 0; i < diag.size(); ++i)
        d.coeffRef(i, i) = std::max(diag[i], floor);
    }
    H += damping * d;
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
  if (ldlt.info() != Eigen::Success) throw NotPositiveDefinite();
  const VecX d = ldlt.solve(-sys.g);
  if (!d.allFinite()) throw NotPositiveDefinite();
  return d;
}

VecX relative_increments(const SparsePoseSystem& sys,
                         const std::vector<const RelativePrior*>& priors, int prior_index,
                         const VecX& delta) {
  const RelativePrior& prior = *priors[prior_index];
  const SparsePoseSystem::EdgeCache& cache = sys.edges[prior_index];
  const int m = static_cast<int>(prior.member_ids.size());

  const auto delta_of = [&](int id) -> Vec6 {
    const int s = sys.slot(id);
    return s < 0 ? Vec6(Vec6::Zero()) : Vec6(delta.segment<6>(6 * s));
  };
  const Vec6 dk = delta_of(prior.pkf_id);
  VecX out(6 * m);
  for (int s = 0; s < m; ++s)
    out.segment<6>(6 * s) = cache.c[s] + cache.J_k[s] * (dk - delta_of(prior.member_ids[s]));
  return out;
}

bool needs_relinearization(const RelativePrior& prior, const PoseLookup& pose_of, double eps,
                           bool in_temporal_window) {
  if (!in_temporal_window) return false;
  const Pose chi_k = pose_of(prior.pkf_id);
  for (std::size_t s = 0; s < prior.member_ids.size(); ++s) {
    const Pose rel = pose_of(prior.member_ids[s]).inverse() * chi_k;
    const double num = log_se3(rel * prior.lin_point[s].inverse()).norm();
    const double den = log_se3(prior.lin_point[s]).norm();
    if (den < 1e-9 ? num > eps : num / den > eps) return true;
  }
  return false;
}

AbsolutePrior marginalize_poses(const AbsolutePrior& absolute,
                                const std::vector<const RelativePrior*>& leaving,
                                const PoseLookup& pose_of, const std::vector<int>& retain_ids) {
  if (leaving.empty()) return absolute;

  std::set<int> union_set(absolute.member_ids.begin(), absolute.member_ids.end());
  for (const RelativePrior* pr : leaving) {
    union_set.insert(pr->pkf_id);
    union_set.insert(pr->member_ids.begin(), pr->member_ids.end());
  }
  const std::vector<int> ids(union_set.begin(), union_set.end());

  Assembly as;
  for (std::size_t i = 0; i < ids.size(); ++i) as.slot_of[ids[i]] = static_cast<int>(i);
  const int n = 6 * static_cast<int>(ids.size());
  as.A = MatX::Zero(n, n);
  as.b = VecX::Zero(n);
  for (const RelativePrior* pr : leaving) accumulate_relative(as, *pr, pose_of);
  if (!absolute.empty()) accumulate_absolute(as, absolute, pose_of);
  as.A = 0.5 * (as.A + as.A.transpose().eval());

  const std::set<int> retain(retain_ids.begin(), retain_ids.end());
  std::vector<int> kept, dropped;
  for (int id : ids) (retain.count(id) ? kept : dropped).push_back(id);

  std::vector<int> r_idx, m_idx;
  for (int id : kept)
    for (int d = 0; d < 6; ++d) r_idx.push_back(6 * as.slot(id) + d);
  for (int id : dropped)
    for (int d = 0; d < 6; ++d) m_idx.push_back(6 * as.slot(id) + d);

  MatX A_rr = as.A(r_idx, r_idx);
  VecX b_r = as.b(r_idx);
  if (!m_idx.empty()) {
    const MatX A_rm = as.A(r_idx, m_idx);
    const MatX A_mm = as.A(m_idx, m_idx);
    const MatX A_mr = as.A(m_idx, r_idx);
    const VecX b_m = as.b(m_idx);
    A_rr -= A_rm * pinv_product(A_mm, A_mr);
    b_r -= A_rm * pinv_solve(A_mm, b_m);
  }
  A_rr = 0.5 * (A_rr + A_rr.transpose().eval());

  // Absorb the implied mean shift so the result is a pure quadratic.
  const VecX shift = -pinv_solve(A_rr, b_r);
  AbsolutePrior out;
  out.member_ids = kept;
  out.Y = A_rr;
  out.lin_point.reserve(kept.size());
  for (std::size_t s = 0; s < kept.size(); ++s) {
    Pose p = boxplus(pose_of(kept[s]), shift.segment<6>(6 * static_cast<int>(s)));
    p.normalize();
    out.lin_point.push_back(p);
  }
  return out;
}

}  // namespace eslam
