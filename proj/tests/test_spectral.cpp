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

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "dipesim/oracles.hpp"
#include "dipesim/spectral.hpp"

using namespace dipesim;

namespace {

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat diag3(double a, double b, double c) {
  Mat m = Mat::Zero(3, 3);
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  return m;
}

}  // namespace

TEST_CASE("identity observable survives truncation whole") {
  for (double eps : {0.1, 1.0, 2.0}) {
    SpectralTruncation t = truncate(HermitianObservable(Mat::Identity(5, 5)), eps);
    REQUIRE(t.support_dim == 5);
    REQUIRE((t.truncated - Mat::Identity(5, 5)).norm() < 1e-9);
    REQUIRE(t.support.rank() == 5);
    REQUIRE(std::abs(t.hs_norm_sq - 5.0) < 1e-9);
  }
}

TEST_CASE("diagonal observable drops the sub-threshold eigenvalue") {
  SpectralTruncation t = truncate(HermitianObservable(diag3(1.0, 0.4, 0.1)), 0.5);
  REQUIRE(t.support_dim == 2);
  REQUIRE(t.kept_eigenvalues.size() == 2);
  // Ascending order from the eigensolver.
  REQUIRE(std::abs(t.kept_eigenvalues[0] - 0.4) < 1e-12);
  REQUIRE(std::abs(t.kept_eigenvalues[1] - 1.0) < 1e-12);
  REQUIRE((t.truncated - diag3(1.0, 0.4, 0.0)).norm() < 1e-9);
  REQUIRE((t.support.mat() - diag3(1.0, 1.0, 0.0)).norm() < 1e-9);
  REQUIRE(std::abs(t.hs_norm_sq - 1.16) < 1e-12);
}

TEST_CASE("an eigenvalue exactly at the threshold is kept") {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 0.25;
  m(1, 1) = 0.8;
  SpectralTruncation t = truncate(HermitianObservable(m), 0.5);
  REQUIRE(t.support_dim == 2);
}

TEST_CASE("pauli strings truncate to themselves") {
  Mat z(2, 2), x(2, 2);
  z << 1.0, 0.0, 0.0, -1.0;
  x << 0.0, 1.0, 1.0, 0.0;
  Mat pauli = kron(z, kron(x, z));  // 8x8, eigenvalues all +-1
  SpectralTruncation t = truncate(HermitianObservable(pauli), 0.3);
  REQUIRE(t.support_dim == 8);
  REQUIRE((t.truncated - pauli).norm() < 1e-9);
  // Squared Hilbert-Schmidt norm of a d-dimensional sign matrix is d.
  REQUIRE(std::abs(t.hs_norm_sq - 8.0) < 1e-9);
}

TEST_CASE("support basis is orthonormal and diagonalizes the truncation") {
  Stream rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    HermitianObservable m = random_bounded_observable(8, rng);
    SpectralTruncation t = truncate(m, 0.4);
    if (t.support_dim == 0) continue;
    Mat gram = t.support_basis.adjoint() * t.support_basis;
    REQUIRE((gram - Mat::Identity(t.support_dim, t.support_dim)).norm() < 1e-9);
    Mat lhs = t.truncated * t.support_basis;
    Mat rhs = t.support_basis * t.kept_eigenvalues.asDiagonal();
    REQUIRE((lhs - rhs).norm() < 1e-8);
    for (int i = 1; i < t.support_dim; ++i)
      REQUIRE(t.kept_eigenvalues[i - 1] <= t.kept_eigenvalues[i]);
  }
}

TEST_CASE("truncation output is deterministic across equal inputs") {
  Stream rng(2);
  HermitianObservable m = random_bounded_observable(6, rng);
  HermitianObservable m_copy(m.mat());
  SpectralTruncation a = truncate(m, 0.37);
  SpectralTruncation b = truncate(m_copy, 0.37);
  REQUIRE(a.support_dim == b.support_dim);
  REQUIRE((a.support_basis - b.support_basis).norm() == 0.0);
  REQUIRE((a.truncated - b.truncated).norm() == 0.0);
}

TEST_CASE("gap vanishes for states inside the kept span") {
  Stream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    HermitianObservable m = random_bounded_observable(8, rng);
    SpectralTruncation t = truncate(m, 0.5);
    if (t.support_dim < 2) continue;
    // Random unit combinations of the kept eigenvectors.
    PureState a = PureState::normalized(t.support_basis *
                                        haar_state(t.support_dim, rng).vec());
    PureState b = PureState::normalized(t.support_basis *
                                        haar_state(t.support_dim, rng).vec());
    REQUIRE(truncation_gap(m, t, a, b) < 1e-10);
  }
}

TEST_CASE("gap at a dropped eigenvector is the squared eigenvalue") {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 0.1;
  HermitianObservable obs(m);
  SpectralTruncation t = truncate(obs, 0.5);
  REQUIRE(t.support_dim == 1);
  Vec e1 = Vec::Zero(2);
  e1[1] = 1.0;
  PureState s(e1);
  double gap = truncation_gap(obs, t, s, s);
  REQUIRE(std::abs(gap - 0.01) < 1e-12);
  REQUIRE(gap <= 0.25);
}

TEST_CASE("gap never exceeds half the truncation parameter") {
  Stream rng(4);
  const int n = 300;
  for (int i = 0; i < n; ++i) {
    HermitianObservable m = random_bounded_observable(8, rng);
    double eps = std::max(2.0 * rng.uniform(), 1e-3);
    SpectralTruncation t = truncate(m, eps);
    PureState a = haar_state(8, rng);
    PureState b = haar_state(8, rng);
    REQUIRE(truncation_gap(m, t, a, b) <= 0.5 * eps + 1e-9);
  }
}

TEST_CASE("truncation rejects out-of-range parameters") {
  HermitianObservable m(Mat::Identity(2, 2));
  REQUIRE_THROWS_AS(truncate(m, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(truncate(m, -0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(truncate(m, 2.5), std::invalid_argument);
}
