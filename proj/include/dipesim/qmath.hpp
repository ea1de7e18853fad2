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

// Finite-dimensional pure states, observables and Haar sampling.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

#include "dipesim/rng.hpp"

namespace dipesim {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

// Construction-time tolerance for unit norm, hermiticity, unitarity and
// idempotence checks.
inline constexpr double kStructureTol = 1e-9;

// Unit vector in C^dim.
class PureState {
 public:
  explicit PureState(Vec amplitudes) : v_(std::move(amplitudes)) {
    if (v_.size() == 0)
      throw std::invalid_argument("PureState: dimension must be positive");
    if (std::abs(v_.norm() - 1.0) > kStructureTol)
      throw std::invalid_argument("PureState: amplitudes are not unit norm");
  }

  // Rescales a nonzero vector onto the unit sphere.
  static PureState normalized(Vec a) {
    double n = a.norm();
    if (!(n > 1e-150))
      throw std::invalid_argument("PureState::normalized: vector is numerically zero");
    return PureState(std::move(a /= n));
  }

  int dim() const { return static_cast<int>(v_.size()); }
  const Vec& vec() const { return v_; }

 private:
  Vec v_;
};

// Hermitian matrix with operator norm at most 1.
class HermitianObservable {
 public:
  explicit HermitianObservable(Mat m) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols())
      throw std::invalid_argument("HermitianObservable: matrix must be square");
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kStructureTol)
      throw std::invalid_argument("HermitianObservable: matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Mat> es(m_, Eigen::EigenvaluesOnly);
    op_norm_ = es.eigenvalues().cwiseAbs().maxCoeff();
    if (op_norm_ > 1.0 + kStructureTol)
      throw std::invalid_argument("HermitianObservable: operator norm exceeds 1");
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Mat& mat() const { return m_; }
  double op_norm() const { return op_norm_; }

 private:
  Mat m_;
  double op_norm_ = 0.0;
};

class UnitaryMatrix {
 public:
  explicit UnitaryMatrix(Mat u) : u_(std::move(u)) {
    if (u_.rows() == 0 || u_.rows() != u_.cols())
      throw std::invalid_argument("UnitaryMatrix: matrix must be square");
    Mat g = u_.adjoint() * u_;
    g.diagonal().array() -= 1.0;
    if (g.cwiseAbs().maxCoeff() > kStructureTol)
      throw std::invalid_argument("UnitaryMatrix: matrix is not unitary");
  }

  int dim() const { return static_cast<int>(u_.rows()); }
  const Mat& mat() const { return u_; }

 private:
  Mat u_;
};

// Hermitian idempotent; rank is recovered from the trace.
class Projector {
 public:
  // Projector onto the zero-dimensional space (dim 0, rank 0).
  Projector() = default;

  explicit Projector(Mat p) : p_(std::move(p)) {
    if (p_.rows() == 0 || p_.rows() != p_.cols())
      throw std::invalid_argument("Projector: matrix must be square");
    if ((p_ - p_.adjoint()).cwiseAbs().maxCoeff() > kStructureTol)
      throw std::invalid_argument("Projector: matrix is not Hermitian");
    if ((p_ * p_ - p_).cwiseAbs().maxCoeff() > 100 * kStructureTol)
      throw std::invalid_argument("Projector: matrix is not idempotent");
    double tr = p_.trace().real();
    rank_ = static_cast<int>(std::lround(tr));
    if (std::abs(tr - rank_) > 1e-6)
      throw std::invalid_argument("Projector: trace is not close to an integer");
  }

  int dim() const { return static_cast<int>(p_.rows()); }
  int rank() const { return rank_; }
  const Mat& mat() const { return p_; }

 private:
  Mat p_;
  int rank_ = 0;
};

inline void require_same_dim(int a, int b, const char* where) {
  if (a != b) throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}

// <a|b>.
inline Complex inner(const PureState& a, const PureState& b) {
  require_same_dim(a.dim(), b.dim(), "inner");
  return a.vec().dot(b.vec());
}

// |<a|b>|^2.
inline double overlap(const PureState& a, const PureState& b) {
  Complex ip = inner(a, b);
  return std::norm(ip);
}

// <a|M|b>.
inline Complex bilinear(const PureState& a, const HermitianObservable& m,
                        const PureState& b) {
  require_same_dim(a.dim(), m.dim(), "bilinear");
  require_same_dim(m.dim(), b.dim(), "bilinear");
  return a.vec().dot(m.mat() * b.vec());
}

// Haar-uniform unit vector: normalized standard complex Gaussian.
// Draw order: for each component, real part then imaginary part.
inline PureState haar_state(int dim, Stream& rng) {
  if (dim <= 0) throw std::invalid_argument("haar_state: dim must be positive");
  Vec v(dim);
  for (;;) {
    for (int i = 0; i < dim; ++i) v[i] = rng.cnormal();
    double n = v.norm();
    if (n > 1e-150) return PureState(v / n);
  }
}

// Haar-distributed unitary: QR of a complex Ginibre matrix with the R diagonal
// rotated to be real positive (removes the QR phase ambiguity).
inline UnitaryMatrix haar_unitary(int dim, Stream& rng) {
  if (dim <= 0) throw std::invalid_argument("haar_unitary: dim must be positive");
  Mat g(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) g(i, j) = rng.cnormal();
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR();
  for (int j = 0; j < dim; ++j) {
    Complex d = r(j, j);
    double a = std::abs(d);
    Complex phase = a > 1e-300 ? d / a : Complex(1.0, 0.0);
    q.col(j) *= phase;
  }
  return UnitaryMatrix(std::move(q));
}

struct BornOutcome {
  bool accepted;    // true: projected onto P, false: onto I - P
  PureState post;   // renormalized post-measurement state
};

// Two-outcome projective measurement {P, I - P} on s.
// Accepts with probability <s|P|s>; a branch whose post-measurement vector has
// norm below 1e-12 is never returned.
inline BornOutcome born_two_outcome(const PureState& s, const Projector& p,
                                    Stream& rng) {
  require_same_dim(s.dim(), p.dim(), "born_two_outcome");
  Vec in = p.mat() * s.vec();
  Vec out = s.vec() - in;
  double nin = in.norm();
  double nout = out.norm();
  double prob = std::min(1.0, nin * nin);
  bool accept = rng.uniform() < prob;
  if (accept && nin < 1e-12) accept = false;
  if (!accept && nout < 1e-12) accept = true;
  if (accept) return {true, PureState::normalized(std::move(in))};
  return {false, PureState::normalized(std::move(out))};
}

}  // namespace dipesim
