// Copyright 2026 The dipesim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Spectral truncation of a bounded observable: drop every eigenvalue with
// magnitude below epsilon/2 and keep the rest together with an orthonormal
// basis of their span.

#include <cmath>

#include "dipesim/qmath.hpp"

namespace dipesim {

struct SpectralTruncation {
  int dim = 0;
  double epsilon = 0.0;
  int support_dim = 0;              // number of kept eigenvalues
  Eigen::VectorXd kept_eigenvalues; // ascending
  Mat support_basis;                // dim x support_dim, orthonormal columns
  Mat truncated;                    // sum of kept eigenpairs
  Projector support;                // projector onto the kept span
  double hs_norm_sq = 0.0;          // squared Hilbert-Schmidt norm of `truncated`
};

// Keeps eigenvalues with |lambda| >= epsilon/2; ties within 1e-9 of the
// threshold are kept. Eigenvector phases are canonicalized (largest-magnitude
// entry rotated to the positive real axis) so equal inputs produce equal bases.
inline SpectralTruncation truncate(const HermitianObservable& m, double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 2.0)
    throw std::invalid_argument("truncate: need 0 < epsilon <= 2");
  const int d = m.dim();
  Eigen::SelfAdjointEigenSolver<Mat> es(m.mat());
  if (es.info() != Eigen::Success)
    throw std::runtime_error("truncate: eigendecomposition failed");
  const Eigen::VectorXd& vals = es.eigenvalues();
  const double threshold = 0.5 * epsilon - 1e-9;

  int kept = 0;
  for (int i = 0; i < d; ++i)
    if (std::abs(vals[i]) >= threshold) ++kept;

  SpectralTruncation t;
  t.dim = d;
  t.epsilon = epsilon;
  t.support_dim = kept;
  t.kept_eigenvalues.resize(kept);
  t.support_basis.resize(d, kept);
  int j = 0;
  for (int i = 0; i < d; ++i) {
    if (std::abs(vals[i]) < threshold) continue;
    t.kept_eigenvalues[j] = vals[i];
    Vec col = es.eigenvectors().col(i);
    int arg = 0;
    double best = 0.0;
    for (int r = 0; r < d; ++r) {
      double a = std::abs(col[r]);
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (best > 1e-300) col *= std::conj(col[arg]) / best;
    t.support_basis.col(j) = col;
    ++j;
  }
  Mat p = t.support_basis * t.support_basis.adjoint();
  t.truncated = t.support_basis * t.kept_eigenvalues.asDiagonal() *
                t.support_basis.adjoint();
  // Symmetrize away the last bits of roundoff before the invariant checks.
  t.truncated = 0.5 * (t.truncated + t.truncated.adjoint()).eval();
  t.support = Projector(0.5 * (p + p.adjoint()));
  t.hs_norm_sq = t.kept_eigenvalues.squaredNorm();
  return t;
}

// | |<a|M|b>|^2 - |<a|M_trunc|b>|^2 |. Bounded by epsilon/2 for unit vectors.
inline double truncation_gap(const HermitianObservable& m,
                             const SpectralTruncation& t, const PureState& a,
                             const PureState& b) {
  require_same_dim(m.dim(), t.dim, "truncation_gap");
  require_same_dim(a.dim(), m.dim(), "truncation_gap");
  require_same_dim(b.dim(), m.dim(), "truncation_gap");
  double full = std::norm(a.vec().dot(m.mat() * b.vec()));
  double trunc = std::norm(a.vec().dot(t.truncated * b.vec()));
  return std::abs(full - trunc);
}

}  // namespace dipesim
