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

// Wire format for the two-party protocol: length-prefixed frames over a byte
// stream. The length prefix is a big-endian u32 covering the 1-byte type tag
// plus the payload; payload integers are little-endian, floating point is
// IEEE-754 binary64 little-endian. No frame ever carries state amplitudes:
// quantum registers move by ownership transfer on the referee.

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace dipesim::wire {

inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 24;

enum class Tag : std::uint8_t {
  kHello = 0x01,
  kSubspaceOutcomes = 0x02,
  kPairing = 0x03,
  kQTransfer = 0x04,
  kSwapResults = 0x05,
  kEstimate = 0x06,
  kMeasureReq = 0x07,
  kMeasureResp = 0x08,
  kRound = 0x09,    // round continuation / termination
  kSwapReq = 0x0A,  // names the register pairs to SWAP-test
  kError = 0x7F,
};

enum class Role : std::uint8_t { kReferee = 0, kAlice = 1, kBob = 2 };

enum class ErrorCode : std::uint8_t {
  kBadVersion = 1,
  kProtocolOrder = 2,
  kOwnership = 3,
  kMalformed = 4,
  kSeedMismatch = 5,
};

struct Frame {
  Tag tag;
  std::vector<std::uint8_t> payload;
};

class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void put_u8(std::vector<std::uint8_t>& b, std::uint8_t v) { b.push_back(v); }
inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_f64(std::vector<std::uint8_t>& b, double v) {
  put_u64(b, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const std::uint8_t* q = take(2);
    return static_cast<std::uint16_t>(q[0] | (q[1] << 8));
  }
  std::uint32_t u32() {
    const std::uint8_t* q = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | q[i];
    return v;
  }
  std::uint64_t u64() {
    const std::uint8_t* q = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | q[i];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void expect_end() const {
    if (off_ != n_) throw ProtocolError("frame payload has trailing bytes");
  }

 private:
  const std::uint8_t* take(std::size_t k) {
    if (off_ + k > n_) throw ProtocolError("frame payload truncated");
    const std::uint8_t* q = p_ + off_;
    off_ += k;
    return q;
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t off_ = 0;
};

}  // namespace detail

// Serialized frame: u32 big-endian (1 + payload size), tag byte, payload.
inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  std::uint32_t len = static_cast<std::uint32_t>(1 + f.payload.size());
  if (len > kMaxFrameBytes) throw ProtocolError("frame too large");
  std::vector<std::uint8_t> out;
  out.reserve(4 + len);
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len));
  out.push_back(static_cast<std::uint8_t>(f.tag));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

inline bool known_tag(std::uint8_t t) {
  switch (static_cast<Tag>(t)) {
    case Tag::kHello:
    case Tag::kSubspaceOutcomes:
    case Tag::kPairing:
    case Tag::kQTransfer:
    case Tag::kSwapResults:
    case Tag::kEstimate:
    case Tag::kMeasureReq:
    case Tag::kMeasureResp:
    case Tag::kRound:
    case Tag::kSwapReq:
    case Tag::kError:
      return true;
  }
  return false;
}

struct HelloMsg {
  Role role;
  std::uint16_t version = kProtocolVersion;
  std::uint64_t seed = 0;
};

inline Frame encode(const HelloMsg& m) {
  Frame f{Tag::kHello, {}};
  detail::put_u8(f.payload, static_cast<std::uint8_t>(m.role));
  detail::put_u16(f.payload, m.version);
  detail::put_u64(f.payload, m.seed);
  return f;
}

inline HelloMsg decode_hello(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  HelloMsg m;
  m.role = static_cast<Role>(r.u8());
  m.version = r.u16();
  m.seed = r.u64();
  r.expect_end();
  return m;
}

struct SubspaceOutcomesMsg {
  std::vector<std::uint16_t> blocks;  // observed block index per copy
};

inline Frame encode(const SubspaceOutcomesMsg& m) {
  Frame f{Tag::kSubspaceOutcomes, {}};
  detail::put_u32(f.payload, static_cast<std::uint32_t>(m.blocks.size()));
  for (std::uint16_t b : m.blocks) detail::put_u16(f.payload, b);
  return f;
}

inline SubspaceOutcomesMsg decode_subspace_outcomes(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  std::uint32_t n = r.u32();
  SubspaceOutcomesMsg m;
  m.blocks.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) m.blocks.push_back(r.u16());
  r.expect_end();
  return m;
}

struct PairingMsg {
  struct Entry {
    std::uint32_t alice_copy;
    std::uint32_t bob_copy;
    std::uint16_t block;
  };
  std::vector<Entry> pairs;
};

inline Frame encode(const PairingMsg& m) {
  Frame f{Tag::kPairing, {}};
  detail::put_u32(f.payload, static_cast<std::uint32_t>(m.pairs.size()));
  for (const auto& e : m.pairs) {
    detail::put_u32(f.payload, e.alice_copy);
    detail::put_u32(f.payload, e.bob_copy);
    detail::put_u16(f.payload, e.block);
  }
  return f;
}

inline PairingMsg decode_pairing(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  std::uint32_t n = r.u32();
  PairingMsg m;
  m.pairs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    PairingMsg::Entry e{r.u32(), r.u32(), r.u16()};
    m.pairs.push_back(e);
  }
  r.expect_end();
  return m;
}

// Ownership transfer of a projected register. Carries only the register id
// and its subspace dimension, never amplitudes.
struct QTransferMsg {
  std::uint32_t register_id;
  std::uint32_t dimension;
};

inline Frame encode(const QTransferMsg& m) {
  Frame f{Tag::kQTransfer, {}};
  detail::put_u32(f.payload, m.register_id);
  detail::put_u32(f.payload, m.dimension);
  return f;
}

inline QTransferMsg decode_qtransfer(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  QTransferMsg m{r.u32(), r.u32()};
  r.expect_end();
  return m;
}

struct SwapReqMsg {
  struct Entry {
    std::uint32_t own_register;
    std::uint32_t received_register;
  };
  std::vector<Entry> pairs;
};

inline Frame encode(const SwapReqMsg& m) {
  Frame f{Tag::kSwapReq, {}};
  detail::put_u32(f.payload, static_cast<std::uint32_t>(m.pairs.size()));
  for (const auto& e : m.pairs) {
    detail::put_u32(f.payload, e.own_register);
    detail::put_u32(f.payload, e.received_register);
  }
  return f;
}

inline SwapReqMsg decode_swap_req(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  std::uint32_t n = r.u32();
  SwapReqMsg m;
  m.pairs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    SwapReqMsg::Entry e{r.u32(), r.u32()};
    m.pairs.push_back(e);
  }
  r.expect_end();
  return m;
}

// Outcome bits of the requested SWAP tests, packed LSB-first in request order
// (bit 0 = projection onto the symmetric subspace, i.e. success).
struct SwapResultsMsg {
  std::uint32_t count = 0;
  std::vector<std::uint8_t> bits;
};

inline Frame encode(const SwapResultsMsg& m) {
  Frame f{Tag::kSwapResults, {}};
  detail::put_u32(f.payload, m.count);
  f.payload.insert(f.payload.end(), m.bits.begin(), m.bits.end());
  return f;
}

inline SwapResultsMsg decode_swap_results(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  SwapResultsMsg m;
  m.count = r.u32();
  std::size_t nbytes = (m.count + 7) / 8;
  for (std::size_t i = 0; i < nbytes; ++i) m.bits.push_back(r.u8());
  r.expect_end();
  return m;
}

inline int swap_result_bit(const SwapResultsMsg& m, std::uint32_t i) {
  if (i >= m.count) throw ProtocolError("swap result index out of range");
  return (m.bits[i / 8] >> (i % 8)) & 1;
}

// status 0: valid estimate; status 1: no pairs accumulated, value is NaN.
struct EstimateMsg {
  double value = 0.0;
  std::uint8_t status = 0;
};

inline Frame encode(const EstimateMsg& m) {
  Frame f{Tag::kEstimate, {}};
  detail::put_f64(f.payload, m.value);
  detail::put_u8(f.payload, m.status);
  return f;
}

inline EstimateMsg decode_estimate(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  EstimateMsg m;
  m.value = r.f64();
  m.status = r.u8();
  r.expect_end();
  return m;
}

struct MeasureReqMsg {
  std::uint32_t register_id;
};

inline Frame encode(const MeasureReqMsg& m) {
  Frame f{Tag::kMeasureReq, {}};
  detail::put_u32(f.payload, m.register_id);
  return f;
}

inline MeasureReqMsg decode_measure_req(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  MeasureReqMsg m{r.u32()};
  r.expect_end();
  return m;
}

struct MeasureRespMsg {
  std::uint32_t register_id;
  std::uint16_t block_index;
};

inline Frame encode(const MeasureRespMsg& m) {
  Frame f{Tag::kMeasureResp, {}};
  detail::put_u32(f.payload, m.register_id);
  detail::put_u16(f.payload, m.block_index);
  return f;
}

inline MeasureRespMsg decode_measure_resp(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  MeasureRespMsg m{r.u32(), r.u16()};
  r.expect_end();
  return m;
}

struct RoundMsg {
  std::uint32_t round;
  std::uint8_t cont;  // 1: another round follows, 0: protocol moves to ESTIMATE
};

inline Frame encode(const RoundMsg& m) {
  Frame f{Tag::kRound, {}};
  detail::put_u32(f.payload, m.round);
  detail::put_u8(f.payload, m.cont);
  return f;
}

inline RoundMsg decode_round(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  RoundMsg m{r.u32(), r.u8()};
  r.expect_end();
  return m;
}

struct ErrorMsg {
  ErrorCode code;
};

inline Frame encode(const ErrorMsg& m) {
  Frame f{Tag::kError, {}};
  detail::put_u8(f.payload, static_cast<std::uint8_t>(m.code));
  return f;
}

inline ErrorMsg decode_error(const Frame& f) {
  detail::Reader r(f.payload.data(), f.payload.size());
  ErrorMsg m{static_cast<ErrorCode>(r.u8())};
  r.expect_end();
  return m;
}

// Register id layout: round in the high bits, side bit, copy index.
inline std::uint32_t register_id(int round, Role side, int copy) {
  return (static_cast<std::uint32_t>(round) << 16) |
         (side == Role::kBob ? 0x8000u : 0u) | static_cast<std::uint32_t>(copy);
}
inline int register_round(std::uint32_t id) { return static_cast<int>(id >> 16); }
inline Role register_side(std::uint32_t id) {
  return (id & 0x8000u) ? Role::kBob : Role::kAlice;
}
inline int register_copy(std::uint32_t id) { return static_cast<int>(id & 0x7fffu); }

}  // namespace dipesim::wire
