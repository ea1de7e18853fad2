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

// Distributed inner-product estimation with local measurements, classical
// collision finding and bounded quantum communication.
//
// Per round, both parties project k fresh copies of their states onto a shared
// Haar-rotated coordinate-block partition, exchange the observed block indices
// classically, pair up copies that landed in the same block, send the paired
// block-dimensional registers across, and run one SWAP test per pair. The
// estimate is 2 s / m - 1 over m accumulated pairs with s SWAP successes.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "dipesim/sampling.hpp"

namespace dipesim {

// Orthogonal rank-`block` projectors obtained by conjugating the coordinate
// blocks [i*block, min((i+1)*block, dim)) with one shared rotation. The final
// block may have smaller rank when block does not divide dim.
class SubspacePartition {
 public:
  SubspacePartition(int dim, int block, Mat rotation)
      : dim_(dim), block_(block), u_(std::move(rotation)) {
    if (block < 1 || block > dim)
      throw std::invalid_argument("SubspacePartition: need 1 <= block <= dim");
  }

  int dim() const { return dim_; }
  int block() const { return block_; }
  int blocks() const { return (dim_ + block_ - 1) / block_; }
  int rank(int i) const {
    check_index(i);
    return std::min(block_, dim_ - i * block_);
  }
  // A trailing partial block is not used for pairing when its rank drops
  // below half the block size.
  bool pairable(int i) const { return 2 * rank(i) >= block_; }
  const Mat& rotation() const { return u_; }

  Mat projector(int i) const {
    check_index(i);
    Mat cols = u_.block(0, i * block_, dim_, rank(i));
    return cols * cols.adjoint();
  }

  // Coordinates of s in the rotated basis; block i owns rows
  // [i*block, i*block+rank(i)).
  Vec coordinates(const PureState& s) const {
    require_same_dim(s.dim(), dim_, "SubspacePartition::coordinates");
    return u_.adjoint() * s.vec();
  }

  Eigen::VectorXd probabilities(const Vec& coords) const {
    Eigen::VectorXd p(blocks());
    for (int i = 0; i < blocks(); ++i)
      p[i] = coords.segment(i * block_, rank(i)).squaredNorm();
    return p;
  }

  // Renormalized projection of the state with rotated coordinates `coords`
  // onto block i.
  PureState project(const Vec& coords, int i) const {
    check_index(i);
    Vec masked = Vec::Zero(dim_);
    masked.segment(i * block_, rank(i)) = coords.segment(i * block_, rank(i));
    return PureState::normalized(u_ * masked);
  }

 private:
  void check_index(int i) const {
    if (i < 0 || i >= blocks())
      throw std::invalid_argument("SubspacePartition: block index out of range");
  }
  int dim_;
  int block_;
  Mat u_;
};

// Draws the shared rotation. A single-block partition is the identity
// regardless of the rotation, so that case consumes no randomness; this is
// part of the stream-consumption contract relied on by the networked runner.
inline SubspacePartition make_partition(int dim, int block, Stream& rng) {
  if (block < 1 || block > dim)
    throw std::invalid_argument("make_partition: need 1 <= block <= dim");
  if (block == dim) return {dim, block, Mat::Identity(dim, dim)};
  return {dim, block, haar_unitary(dim, rng).mat()};
}

struct ProjectionRecord {
  int copy = 0;         // copy index within the round, ascending
  int block_index = 0;  // observed POVM outcome
  PureState post;       // renormalized projected copy
};

// Measures `copies` fresh copies of s against the partition POVM. One uniform
// draw per copy (CDF inversion over the block probabilities).
inline std::vector<ProjectionRecord> project_copies(const PureState& s, int copies,
                                                    const SubspacePartition& part,
                                                    Stream& rng) {
  if (copies < 1) throw std::invalid_argument("project_copies: copies must be >= 1");
  Vec coords = part.coordinates(s);
  Eigen::VectorXd probs = part.probabilities(coords);
  std::vector<ProjectionRecord> out;
  out.reserve(copies);
  for (int c = 0; c < copies; ++c) {
    double u = rng.uniform();
    double cum = 0.0;
    int idx = part.blocks() - 1;
    for (int i = 0; i < part.blocks(); ++i) {
      cum += probs[i];
      if (u < cum) {
        idx = i;
        break;
      }
    }
    // Never return a zero-probability branch (possible only through the
    // final-index fallback when the probabilities sum slightly below 1).
    while (probs[idx] < 1e-150) idx = (idx + part.blocks() - 1) % part.blocks();
    out.push_back({c, idx, part.project(coords, idx)});
  }
  return out;
}

struct CollisionPairing {
  struct Pair {
    int alice_copy;
    int bob_copy;
    int block_index;
  };
  std::vector<Pair> pairs;
};

// Greedy first-fit pairing: blocks in ascending index order, copies in
// ascending index order within each block, capped at max_pairs. Deterministic
// in its inputs.
inline CollisionPairing pair_collisions(const std::vector<ProjectionRecord>& alice,
                                        const std::vector<ProjectionRecord>& bob,
                                        int max_pairs) {
  if (max_pairs < 0) throw std::invalid_argument("pair_collisions: max_pairs < 0");
  int top = -1;
  for (const auto& r : alice) top = std::max(top, r.block_index);
  for (const auto& r : bob) top = std::max(top, r.block_index);
  CollisionPairing out;
  for (int b = 0; b <= top && static_cast<int>(out.pairs.size()) < max_pairs; ++b) {
    auto ai = alice.begin();
    auto bi = bob.begin();
    while (static_cast<int>(out.pairs.size()) < max_pairs) {
      while (ai != alice.end() && ai->block_index != b) ++ai;
      while (bi != bob.end() && bi->block_index != b) ++bi;
      if (ai == alice.end() || bi == bob.end()) break;
      out.pairs.push_back({ai->copy, bi->copy, b});
      ++ai;
      ++bi;
    }
  }
  return out;
}

// Expected number of same-block coincidences for one round:
// copies^2 * sum_i <psi|P_i|psi> <phi|P_i|phi>, summed over every block
// (including a trailing partial block that pairing would exclude).
inline double expected_collisions(const PureState& psi, const PureState& phi,
                                  const SubspacePartition& part, int copies_per_side) {
  if (copies_per_side < 1)
    throw std::invalid_argument("expected_collisions: copies_per_side must be >= 1");
  Eigen::VectorXd pa = part.probabilities(part.coordinates(psi));
  Eigen::VectorXd pb = part.probabilities(part.coordinates(phi));
  return static_cast<double>(copies_per_side) * copies_per_side * pa.dot(pb);
}

struct ResourceLedger {
  std::int64_t alice_copies = 0;
  std::int64_t bob_copies = 0;
  std::vector<int> quantum_message_dims;  // one entry per transferred register
  std::int64_t qubit_equivalents = 0;     // sum of ceil(log2(dim)) over messages
  std::int64_t classical_bits = 0;        // outcome + pairing frame payload bits
};

// Frame payload sizes for the classical-bit ledger; the wire encoding uses
// the same layout (u32 count + u16 per outcome; u32 count + 10 bytes per pair).
inline int subspace_outcomes_payload_bytes(int entries) { return 4 + 2 * entries; }
inline int pairing_payload_bytes(int pairs) { return 4 + 10 * pairs; }

inline int qubits_for_dim(int dim) {
  return dim <= 1 ? 0 : std::bit_width(static_cast<unsigned>(dim - 1));
}

struct DipeEstimate {
  double estimate = std::numeric_limits<double>::quiet_NaN();
  bool no_pairs = false;
  std::int64_t pairs = 0;      // m
  std::int64_t successes = 0;  // s
  int copies_per_round = 0;    // k
  int rounds = 0;
  std::vector<int> pairs_per_round;
  double collision_count = 0.0;         // observed same-block coincidences
  double expected_collision_sum = 0.0;  // per-round oracle, same rounds
  ResourceLedger ledger;
};

inline int copies_per_round(int dim, int block, double copies_factor) {
  double k = copies_factor * std::sqrt(static_cast<double>(dim) / block);
  return std::max(1, static_cast<int>(std::ceil(k - 1e-9)));
}

// Stream-consumption contract (shared with the networked runner): round r uses
// the children base.child("round", r).child(x) for x in {"partition", "alice",
// "bob", "swap"}; nothing is drawn from `base` itself.
inline DipeEstimate run_dipe(const PureState& psi, const PureState& phi, int block,
                             int target_pairs, int max_rounds, const Stream& base,
                             double copies_factor = 4.0) {
  require_same_dim(psi.dim(), phi.dim(), "run_dipe");
  const int dim = psi.dim();
  if (block < 1 || block > dim)
    throw std::invalid_argument("run_dipe: need 1 <= block <= dim");
  if (target_pairs < 1) throw std::invalid_argument("run_dipe: target_pairs must be >= 1");
  if (max_rounds < 1) throw std::invalid_argument("run_dipe: max_rounds must be >= 1");
  if (!(copies_factor > 0.0))
    throw std::invalid_argument("run_dipe: copies_factor must be > 0");

  DipeEstimate out;
  out.copies_per_round = copies_per_round(dim, block, copies_factor);
  const int k = out.copies_per_round;

  while (out.pairs < target_pairs && out.rounds < max_rounds) {
    Stream rs = base.child("round", static_cast<std::uint64_t>(out.rounds));
    Stream partition_rng = rs.child("partition");
    Stream alice_rng = rs.child("alice");
    Stream bob_rng = rs.child("bob");
    Stream swap_rng = rs.child("swap");

    SubspacePartition part = make_partition(dim, block, partition_rng);
    auto rec_a = project_copies(psi, k, part, alice_rng);
    auto rec_b = project_copies(phi, k, part, bob_rng);
    out.ledger.alice_copies += k;
    out.ledger.bob_copies += k;

    std::vector<int> na(part.blocks(), 0), nb(part.blocks(), 0);
    for (const auto& r : rec_a) ++na[r.block_index];
    for (const auto& r : rec_b) ++nb[r.block_index];
    for (int i = 0; i < part.blocks(); ++i)
      out.collision_count += static_cast<double>(na[i]) * nb[i];
    out.expected_collision_sum += expected_collisions(psi, phi, part, k);

    std::vector<ProjectionRecord> elig_a, elig_b;
    for (auto& r : rec_a)
      if (part.pairable(r.block_index)) elig_a.push_back(std::move(r));
    for (auto& r : rec_b)
      if (part.pairable(r.block_index)) elig_b.push_back(std::move(r));

    const int want = static_cast<int>(target_pairs - out.pairs);
    CollisionPairing pairing = pair_collisions(elig_a, elig_b, want);
    const int m_round = static_cast<int>(pairing.pairs.size());

    out.ledger.classical_bits += 8LL * 2 * subspace_outcomes_payload_bytes(k);
    out.ledger.classical_bits += 8LL * pairing_payload_bytes(m_round);

    for (const auto& pr : pairing.pairs) {
      const ProjectionRecord* pa = nullptr;
      const ProjectionRecord* pb = nullptr;
      for (const auto& r : elig_a)
        if (r.copy == pr.alice_copy) pa = &r;
      for (const auto& r : elig_b)
        if (r.copy == pr.bob_copy) pb = &r;
      int mdim = part.rank(pr.block_index);
      out.ledger.quantum_message_dims.push_back(mdim);
      out.ledger.qubit_equivalents += qubits_for_dim(mdim);
      int bit = swap_test(pa->post, pb->post, swap_rng);
      if (bit == 0) ++out.successes;
    }
    out.pairs += m_round;
    out.pairs_per_round.push_back(m_round);
    ++out.rounds;
  }

  if (out.pairs == 0) {
    out.no_pairs = true;
    out.estimate = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.estimate = 2.0 * static_cast<double>(out.successes) / out.pairs - 1.0;
  }
  return out;
}

// Accuracy-driven wrapper: targets ceil(target_factor/epsilon^2) pairs and
// refuses block sizes below min_block_factor*log2(dim)/epsilon^2 (too little
// quantum communication per pair for the requested accuracy). Both constants
// are tunable; the defaults match the constant-error calibration.
inline DipeEstimate run_dipe_eps(const PureState& psi, const PureState& phi,
                                 double epsilon, int block, const Stream& base,
                                 double copies_factor = 4.0, int max_rounds = 4096,
                                 double target_factor = 2.0,
                                 double min_block_factor = 1.0) {
  if (!(epsilon > 0.0) || epsilon > 1.0)
    throw std::invalid_argument("run_dipe_eps: need 0 < epsilon <= 1");
  if (!(target_factor > 0.0) || !(min_block_factor > 0.0))
    throw std::invalid_argument("run_dipe_eps: factors must be > 0");
  const int dim = psi.dim();
  double min_block =
      min_block_factor * std::log2(static_cast<double>(dim)) / (epsilon * epsilon);
  if (static_cast<double>(block) < min_block - 1e-9)
    throw std::invalid_argument("run_dipe_eps: block too small for requested accuracy");
  int target = static_cast<int>(std::ceil(target_factor / (epsilon * epsilon) - 1e-9));
  return run_dipe(psi, phi, block, target, max_rounds, base, copies_factor);
}

enum class StateRecipe { kEqual, kIndependent, kPlanted };

// Instance generation shared by the harness and the networked referee. Draw
// order is part of the reproducibility contract: psi, then the tangent draw
// (planted) or phi (independent). Planted overlaps at the endpoints degenerate
// exactly (1: phi = psi, 0: phi orthogonal to psi).
inline std::pair<PureState, PureState> make_state_pair(int dim, StateRecipe recipe,
                                                       double planted_overlap,
                                                       Stream& rng) {
  PureState psi = haar_state(dim, rng);
  switch (recipe) {
    case StateRecipe::kEqual:
      return {psi, psi};
    case StateRecipe::kIndependent:
      return {psi, haar_state(dim, rng)};
    case StateRecipe::kPlanted: {
      double x = planted_overlap;
      if (x < 0.0 || x > 1.0)
        throw std::invalid_argument("make_state_pair: overlap must be in [0, 1]");
      if (dim < 2) throw std::invalid_argument("make_state_pair: planted needs dim >= 2");
      if (x >= 1.0 - 1e-12) return {psi, psi};
      Vec perp;
      for (;;) {
        PureState chi = haar_state(dim, rng);
        perp = chi.vec() - psi.vec().dot(chi.vec()) * psi.vec();
        double n = perp.norm();
        if (n > 1e-12) {
          perp /= n;
          break;
        }
      }
      if (x <= 1e-300) return {psi, PureState(perp)};
      Vec phi = std::sqrt(x) * psi.vec() + std::sqrt(1.0 - x) * perp;
      return {psi, PureState::normalized(std::move(phi))};
    }
  }
  throw std::invalid_argument("make_state_pair: unknown recipe");
}

}  // namespace dipesim
