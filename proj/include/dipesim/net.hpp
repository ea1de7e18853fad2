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

// Two-party networked execution of the collision-pairing protocol.
//
// Topology: one referee process owns every quantum register and accepts
// exactly two client connections (Alice, Bob). Clients only ever see
// measurement outcomes; party-to-party classical frames are relayed verbatim
// through the referee, which also records the transcript and the resource
// ledger. Turn-taking is strictly sequential, so a fixed seed determines
// every frame byte; the handshake's two HELLO exchanges are logged in role
// order (Alice first) to keep the transcript independent of connection
// timing.
//
// Stream contract (matches run_dipe): with base = Stream(seed), the states
// come from base.child("states") and round r consumes
// base.child("round", r).child(x), x in {"partition", "alice", "bob", "swap"}.
// A seed-matched in-process run therefore reproduces the networked estimate
// bit for bit.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dipesim/dipe.hpp"
#include "dipesim/wire.hpp"

namespace dipesim::net {

struct NetConfig {
  int dim = 64;
  int block = 16;
  int target_pairs = 20;
  int max_rounds = 64;
  double copies_factor = 4.0;
  std::uint64_t seed = 0;
  StateRecipe recipe = StateRecipe::kIndependent;
  double planted_overlap = 0.5;
  int timeout_ms = 10000;
};

struct TranscriptEntry {
  std::string dir;  // "a->r", "r->a", "b->r", "r->b"
  std::uint8_t tag = 0;
  std::uint32_t bytes = 0;  // encoded frame size including length prefix
  double t_ms = 0.0;        // monotonic, excluded from golden comparisons
};

namespace detail {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close_fd();
      fd_ = o.fd_;
      o.fd_ = -1;
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close_fd(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void set_timeout(int ms) const {
    timeval tv{ms / 1000, (ms % 1000) * 1000};
    setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
  }

  void send_all(const std::uint8_t* p, std::size_t n) const {
    while (n > 0) {
      ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
      if (w <= 0) throw wire::ProtocolError("socket send failed or timed out");
      p += w;
      n -= static_cast<std::size_t>(w);
    }
  }

  void recv_exact(std::uint8_t* p, std::size_t n) const {
    while (n > 0) {
      ssize_t r = ::recv(fd_, p, n, 0);
      if (r <= 0) throw wire::ProtocolError("socket recv failed, closed or timed out");
      p += r;
      n -= static_cast<std::size_t>(r);
    }
  }

 private:
  void close_fd() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
};

inline sockaddr_in make_addr(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw wire::ProtocolError("invalid IPv4 address: " + host);
  return addr;
}

inline void send_frame(const Socket& s, const wire::Frame& f) {
  auto bytes = wire::encode_frame(f);
  s.send_all(bytes.data(), bytes.size());
}

inline wire::Frame recv_frame(const Socket& s) {
  std::uint8_t hdr[4];
  s.recv_exact(hdr, 4);
  std::uint32_t len = (static_cast<std::uint32_t>(hdr[0]) << 24) |
                      (static_cast<std::uint32_t>(hdr[1]) << 16) |
                      (static_cast<std::uint32_t>(hdr[2]) << 8) | hdr[3];
  if (len < 1 || len > wire::kMaxFrameBytes)
    throw wire::ProtocolError("malformed frame length");
  std::vector<std::uint8_t> body(len);
  s.recv_exact(body.data(), len);
  if (!wire::known_tag(body[0])) throw wire::ProtocolError("unknown frame tag");
  wire::Frame f;
  f.tag = static_cast<wire::Tag>(body[0]);
  f.payload.assign(body.begin() + 1, body.end());
  return f;
}

inline std::size_t encoded_size(const wire::Frame& f) { return 5 + f.payload.size(); }

}  // namespace detail

// Connects with retries so clients may start before the referee listens.
inline detail::Socket connect_client(const std::string& host, int port,
                                     int timeout_ms) {
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::milliseconds(std::max(timeout_ms, 1000));
  for (;;) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw wire::ProtocolError("socket() failed");
    detail::Socket s(fd);
    sockaddr_in addr = detail::make_addr(host, port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      s.set_timeout(timeout_ms);
      return s;
    }
    if (std::chrono::steady_clock::now() > deadline)
      throw wire::ProtocolError("connect timed out");
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

struct RefereeOptions {
  std::string transcript_path;  // empty: do not write
  std::string port_file;        // empty: do not write
};

struct RefereeResult {
  wire::EstimateMsg estimate;
  std::int64_t pairs = 0;
  std::int64_t successes = 0;
  int rounds = 0;
  int copies_per_round = 0;
  ResourceLedger ledger;
  std::vector<TranscriptEntry> transcript;
  int port = 0;
};

struct ClientResult {
  double estimate = std::numeric_limits<double>::quiet_NaN();
  bool no_pairs = false;
  std::int64_t pairs = 0;
  std::int64_t successes = 0;
  int rounds = 0;
};

namespace detail {

struct RefereeConn {
  Socket sock;
  wire::Role role = wire::Role::kReferee;
};

class Referee {
 public:
  Referee(const NetConfig& cfg, RefereeOptions opt)
      : cfg_(cfg), opt_(std::move(opt)), base_(cfg.seed), start_(now()) {}

  RefereeResult serve(const std::string& host, int port) {
    listen_and_handshake(host, port);
    run_protocol();
    finalize_transcript();
    return std::move(result_);
  }

 private:
  using Clock = std::chrono::steady_clock;
  static Clock::time_point now() { return Clock::now(); }
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(now() - start_).count();
  }

  void log(const char* dir, const wire::Frame& f) {
    result_.transcript.push_back({dir, static_cast<std::uint8_t>(f.tag),
                                  static_cast<std::uint32_t>(encoded_size(f)),
                                  elapsed_ms()});
  }

  Socket& sock(wire::Role r) { return r == wire::Role::kAlice ? alice_.sock : bob_.sock; }
  const char* dir_in(wire::Role r) { return r == wire::Role::kAlice ? "a->r" : "b->r"; }
  const char* dir_out(wire::Role r) { return r == wire::Role::kAlice ? "r->a" : "r->b"; }

  void send_to(wire::Role r, const wire::Frame& f) {
    log(dir_out(r), f);
    send_frame(sock(r), f);
  }

  wire::Frame recv_from(wire::Role r, wire::Tag expected) {
    wire::Frame f = recv_frame(sock(r));
    log(dir_in(r), f);
    if (f.tag != expected) {
      fail(r, wire::ErrorCode::kProtocolOrder,
           "unexpected frame tag from " +
               std::string(r == wire::Role::kAlice ? "alice" : "bob"));
    }
    return f;
  }

  [[noreturn]] void fail(wire::Role r, wire::ErrorCode code, const std::string& what) {
    try {
      send_to(r, wire::encode(wire::ErrorMsg{code}));
    } catch (const wire::ProtocolError&) {
    }
    finalize_transcript();
    throw wire::ProtocolError("referee: " + what);
  }

  void listen_and_handshake(const std::string& host, int port) {
    int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (lfd < 0) throw wire::ProtocolError("socket() failed");
    Socket listener(lfd);
    int one = 1;
    setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = make_addr(host, port);
    if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw wire::ProtocolError("bind failed");
    if (::listen(lfd, 2) != 0) throw wire::ProtocolError("listen failed");
    sockaddr_in bound{};
    socklen_t blen = sizeof bound;
    ::getsockname(lfd, reinterpret_cast<sockaddr*>(&bound), &blen);
    result_.port = ntohs(bound.sin_port);
    if (!opt_.port_file.empty()) {
      if (FILE* pf = std::fopen(opt_.port_file.c_str(), "w")) {
        std::fprintf(pf, "%d\n", result_.port);
        std::fclose(pf);
      }
    }

    // Accept two connections; each must introduce itself with HELLO. The
    // handshake is logged in role order once both clients are known.
    wire::Frame hello_frames[2];
    for (int i = 0; i < 2; ++i) {
      pollfd pfd{lfd, POLLIN, 0};
      if (::poll(&pfd, 1, std::max(cfg_.timeout_ms, 1000)) <= 0)
        throw wire::ProtocolError("timed out waiting for clients");
      int cfd = ::accept(lfd, nullptr, nullptr);
      if (cfd < 0) throw wire::ProtocolError("accept failed");
      Socket conn(cfd);
      setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      conn.set_timeout(cfg_.timeout_ms);
      wire::Frame f = recv_frame(conn);
      if (f.tag != wire::Tag::kHello) {
        send_frame(conn, wire::encode(wire::ErrorMsg{wire::ErrorCode::kProtocolOrder}));
        throw wire::ProtocolError("referee: expected HELLO");
      }
      wire::HelloMsg h = wire::decode_hello(f);
      if (h.version != wire::kProtocolVersion) {
        send_frame(conn, wire::encode(wire::ErrorMsg{wire::ErrorCode::kBadVersion}));
        throw wire::ProtocolError("referee: protocol version mismatch");
      }
      if (h.seed != cfg_.seed) {
        send_frame(conn, wire::encode(wire::ErrorMsg{wire::ErrorCode::kSeedMismatch}));
        throw wire::ProtocolError("referee: run seed mismatch");
      }
      if (h.role == wire::Role::kAlice && !alice_.sock.valid()) {
        alice_.sock = std::move(conn);
        alice_.role = h.role;
        hello_frames[0] = f;
      } else if (h.role == wire::Role::kBob && !bob_.sock.valid()) {
        bob_.sock = std::move(conn);
        bob_.role = h.role;
        hello_frames[1] = f;
      } else {
        send_frame(conn, wire::encode(wire::ErrorMsg{wire::ErrorCode::kProtocolOrder}));
        throw wire::ProtocolError("referee: duplicate or unknown role");
      }
    }
    log("a->r", hello_frames[0]);
    wire::Frame ack =
        wire::encode(wire::HelloMsg{wire::Role::kReferee, wire::kProtocolVersion,
                                    cfg_.seed});
    send_to(wire::Role::kAlice, ack);
    log("b->r", hello_frames[1]);
    send_to(wire::Role::kBob, ack);
  }

  struct Register {
    PureState post;
    int block_index;
    wire::Role owner;
    bool consumed = false;
    Register(PureState p, int b, wire::Role o)
        : post(std::move(p)), block_index(b), owner(o) {}
  };

  void run_protocol() {
    Stream states_rng = base_.child("states");
    auto [psi, phi] =
        make_state_pair(cfg_.dim, cfg_.recipe, cfg_.planted_overlap, states_rng);
    const int k = copies_per_round(cfg_.dim, cfg_.block, cfg_.copies_factor);
    result_.copies_per_round = k;

    std::map<std::uint32_t, Register> regs;
    std::int64_t pairs_total = 0, successes = 0;
    int round = 0;
    bool done = false;

    while (!done) {
      Stream rs = base_.child("round", static_cast<std::uint64_t>(round));
      Stream partition_rng = rs.child("partition");
      Stream alice_rng = rs.child("alice");
      Stream bob_rng = rs.child("bob");
      Stream swap_rng = rs.child("swap");

      SubspacePartition part = make_partition(cfg_.dim, cfg_.block, partition_rng);
      auto rec_a = project_copies(psi, k, part, alice_rng);
      auto rec_b = project_copies(phi, k, part, bob_rng);
      result_.ledger.alice_copies += k;
      result_.ledger.bob_copies += k;
      for (int c = 0; c < k; ++c) {
        regs.emplace(wire::register_id(round, wire::Role::kAlice, c),
                     Register(rec_a[c].post, rec_a[c].block_index, wire::Role::kAlice));
        regs.emplace(wire::register_id(round, wire::Role::kBob, c),
                     Register(rec_b[c].post, rec_b[c].block_index, wire::Role::kBob));
      }

      auto serve_measurements = [&](wire::Role who,
                                    const std::vector<ProjectionRecord>& recs) {
        for (int c = 0; c < k; ++c) {
          wire::Frame f = recv_from(who, wire::Tag::kMeasureReq);
          wire::MeasureReqMsg req = wire::decode_measure_req(f);
          std::uint32_t expect = wire::register_id(round, who, c);
          if (req.register_id != expect)
            fail(who, wire::ErrorCode::kProtocolOrder, "measurement out of order");
          send_to(who, wire::encode(wire::MeasureRespMsg{
                           expect, static_cast<std::uint16_t>(recs[c].block_index)}));
        }
      };
      auto expect_outcomes = [&](wire::Role who,
                                 const std::vector<ProjectionRecord>& recs) {
        wire::Frame f = recv_from(who, wire::Tag::kSubspaceOutcomes);
        wire::SubspaceOutcomesMsg m = wire::decode_subspace_outcomes(f);
        if (static_cast<int>(m.blocks.size()) != k)
          fail(who, wire::ErrorCode::kProtocolOrder, "outcome count mismatch");
        for (int c = 0; c < k; ++c)
          if (m.blocks[c] != recs[c].block_index)
            fail(who, wire::ErrorCode::kProtocolOrder, "outcome content mismatch");
        result_.ledger.classical_bits += 8LL * static_cast<std::int64_t>(f.payload.size());
        return f;
      };

      serve_measurements(wire::Role::kAlice, rec_a);
      wire::Frame oa = expect_outcomes(wire::Role::kAlice, rec_a);
      send_to(wire::Role::kBob, oa);
      serve_measurements(wire::Role::kBob, rec_b);
      wire::Frame ob = expect_outcomes(wire::Role::kBob, rec_b);
      send_to(wire::Role::kAlice, ob);

      // Pairing from Alice; the referee recomputes it and insists on equality.
      std::vector<ProjectionRecord> elig_a, elig_b;
      for (const auto& r : rec_a)
        if (part.pairable(r.block_index)) elig_a.push_back(r);
      for (const auto& r : rec_b)
        if (part.pairable(r.block_index)) elig_b.push_back(r);
      CollisionPairing expected = pair_collisions(
          elig_a, elig_b, static_cast<int>(cfg_.target_pairs - pairs_total));

      wire::Frame pf = recv_from(wire::Role::kAlice, wire::Tag::kPairing);
      wire::PairingMsg pm = wire::decode_pairing(pf);
      if (pm.pairs.size() != expected.pairs.size())
        fail(wire::Role::kAlice, wire::ErrorCode::kProtocolOrder, "pairing size mismatch");
      for (std::size_t i = 0; i < pm.pairs.size(); ++i) {
        const auto& got = pm.pairs[i];
        const auto& want = expected.pairs[i];
        if (static_cast<int>(got.alice_copy) != want.alice_copy ||
            static_cast<int>(got.bob_copy) != want.bob_copy ||
            static_cast<int>(got.block) != want.block_index)
          fail(wire::Role::kAlice, wire::ErrorCode::kProtocolOrder,
               "pairing content mismatch");
      }
      result_.ledger.classical_bits += 8LL * static_cast<std::int64_t>(pf.payload.size());
      send_to(wire::Role::kBob, pf);
      const int m_round = static_cast<int>(pm.pairs.size());

      for (int i = 0; i < m_round; ++i) {
        wire::Frame f = recv_from(wire::Role::kAlice, wire::Tag::kQTransfer);
        wire::QTransferMsg q = wire::decode_qtransfer(f);
        std::uint32_t expect =
            wire::register_id(round, wire::Role::kAlice, pm.pairs[i].alice_copy);
        auto it = regs.find(q.register_id);
        if (q.register_id != expect || it == regs.end() ||
            it->second.owner != wire::Role::kAlice || it->second.consumed)
          fail(wire::Role::kAlice, wire::ErrorCode::kOwnership,
               "transfer of a register alice does not own");
        int rank = part.rank(it->second.block_index);
        if (static_cast<int>(q.dimension) != rank)
          fail(wire::Role::kAlice, wire::ErrorCode::kProtocolOrder,
               "transfer dimension mismatch");
        it->second.owner = wire::Role::kBob;
        result_.ledger.quantum_message_dims.push_back(rank);
        result_.ledger.qubit_equivalents += qubits_for_dim(rank);
      }

      wire::Frame sf = recv_from(wire::Role::kBob, wire::Tag::kSwapReq);
      wire::SwapReqMsg sreq = wire::decode_swap_req(sf);
      if (static_cast<int>(sreq.pairs.size()) != m_round)
        fail(wire::Role::kBob, wire::ErrorCode::kProtocolOrder, "swap request size");
      wire::SwapResultsMsg sres;
      sres.count = static_cast<std::uint32_t>(m_round);
      sres.bits.assign((m_round + 7) / 8, 0);
      for (int i = 0; i < m_round; ++i) {
        auto own = regs.find(sreq.pairs[i].own_register);
        auto rcv = regs.find(sreq.pairs[i].received_register);
        if (own == regs.end() || rcv == regs.end() ||
            own->second.owner != wire::Role::kBob ||
            rcv->second.owner != wire::Role::kBob || own->second.consumed ||
            rcv->second.consumed)
          fail(wire::Role::kBob, wire::ErrorCode::kOwnership,
               "swap request on registers bob does not own");
        int bit = swap_test(rcv->second.post, own->second.post, swap_rng);
        if (bit == 0) ++successes;
        own->second.consumed = true;
        rcv->second.consumed = true;
        if (bit) sres.bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
      }
      send_to(wire::Role::kBob, wire::encode(sres));

      pairs_total += m_round;
      ++round;
      bool expect_cont = pairs_total < cfg_.target_pairs && round < cfg_.max_rounds;

      wire::Frame rf = recv_from(wire::Role::kBob, wire::Tag::kRound);
      wire::RoundMsg rm = wire::decode_round(rf);
      if (static_cast<int>(rm.round) != round - 1 || (rm.cont != 0) != expect_cont)
        fail(wire::Role::kBob, wire::ErrorCode::kProtocolOrder, "round frame mismatch");
      send_to(wire::Role::kAlice, rf);
      done = !expect_cont;
    }

    wire::Frame ef = recv_from(wire::Role::kBob, wire::Tag::kEstimate);
    wire::EstimateMsg em = wire::decode_estimate(ef);
    wire::EstimateMsg mine;
    if (pairs_total == 0) {
      mine.value = std::numeric_limits<double>::quiet_NaN();
      mine.status = 1;
    } else {
      mine.value = 2.0 * static_cast<double>(successes) / pairs_total - 1.0;
      mine.status = 0;
    }
    if (em.status != mine.status ||
        std::bit_cast<std::uint64_t>(em.value) != std::bit_cast<std::uint64_t>(mine.value))
      fail(wire::Role::kBob, wire::ErrorCode::kProtocolOrder, "estimate mismatch");
    send_to(wire::Role::kAlice, ef);

    result_.estimate = em;
    result_.pairs = pairs_total;
    result_.successes = successes;
    result_.rounds = round;
  }

  void finalize_transcript() {
    if (opt_.transcript_path.empty() || transcript_written_) return;
    transcript_written_ = true;
    FILE* fp = std::fopen(opt_.transcript_path.c_str(), "w");
    if (!fp) return;
    for (const auto& e : result_.transcript)
      std::fprintf(fp, "{\"dir\":\"%s\",\"tag\":%u,\"bytes\":%u,\"t_ms\":%.3f}\n",
                   e.dir.c_str(), e.tag, e.bytes, e.t_ms);
    std::fclose(fp);
  }

  NetConfig cfg_;
  RefereeOptions opt_;
  Stream base_;
  Clock::time_point start_;
  RefereeConn alice_, bob_;
  RefereeResult result_;
  bool transcript_written_ = false;
};

}  // namespace detail

inline RefereeResult referee_serve(const NetConfig& cfg, const std::string& host,
                                   int port, const RefereeOptions& opt = {}) {
  detail::Referee ref(cfg, opt);
  return ref.serve(host, port);
}

namespace detail {

inline wire::Frame client_recv(const Socket& s) {
  wire::Frame f = recv_frame(s);
  if (f.tag == wire::Tag::kError) {
    wire::ErrorMsg e = wire::decode_error(f);
    throw wire::ProtocolError("peer reported protocol error code " +
                              std::to_string(static_cast<int>(e.code)));
  }
  return f;
}

inline wire::Frame client_expect(const Socket& s, wire::Tag t) {
  wire::Frame f = client_recv(s);
  if (f.tag != t) throw wire::ProtocolError("client: unexpected frame tag");
  return f;
}

inline void client_handshake(const Socket& s, wire::Role role, const NetConfig& cfg) {
  send_frame(s, wire::encode(wire::HelloMsg{role, wire::kProtocolVersion, cfg.seed}));
  wire::HelloMsg ack = wire::decode_hello(client_expect(s, wire::Tag::kHello));
  if (ack.role != wire::Role::kReferee || ack.seed != cfg.seed)
    throw wire::ProtocolError("client: bad handshake ack");
}

inline std::vector<std::uint16_t> client_measure(const Socket& s, wire::Role role,
                                                 int round, int k) {
  std::vector<std::uint16_t> blocks(k);
  for (int c = 0; c < k; ++c) {
    std::uint32_t id = wire::register_id(round, role, c);
    send_frame(s, wire::encode(wire::MeasureReqMsg{id}));
    wire::MeasureRespMsg resp =
        wire::decode_measure_resp(client_expect(s, wire::Tag::kMeasureResp));
    if (resp.register_id != id)
      throw wire::ProtocolError("client: measurement response out of order");
    blocks[c] = resp.block_index;
  }
  return blocks;
}

// Pairing recomputed from block indices alone (no amplitudes needed): the
// geometry of the partition fixes which blocks are pairable.
inline CollisionPairing pair_from_blocks(const std::vector<std::uint16_t>& alice,
                                         const std::vector<std::uint16_t>& bob,
                                         int dim, int block, int max_pairs) {
  SubspacePartition geom(dim, block, Mat());
  std::vector<ProjectionRecord> ra, rb;
  Vec unit = Vec::Zero(1);
  unit[0] = 1.0;
  PureState dummy(unit);
  for (std::size_t i = 0; i < alice.size(); ++i)
    if (geom.pairable(alice[i]))
      ra.push_back({static_cast<int>(i), static_cast<int>(alice[i]), dummy});
  for (std::size_t i = 0; i < bob.size(); ++i)
    if (geom.pairable(bob[i]))
      rb.push_back({static_cast<int>(i), static_cast<int>(bob[i]), dummy});
  return pair_collisions(ra, rb, max_pairs);
}

}  // namespace detail

inline ClientResult alice_run(const NetConfig& cfg, const std::string& host, int port) {
  detail::Socket sock = connect_client(host, port, cfg.timeout_ms);
  detail::client_handshake(sock, wire::Role::kAlice, cfg);
  const int k = copies_per_round(cfg.dim, cfg.block, cfg.copies_factor);

  std::int64_t pairs_total = 0;
  int round = 0;
  for (;;) {
    auto mine = detail::client_measure(sock, wire::Role::kAlice, round, k);
    detail::send_frame(sock, wire::encode(wire::SubspaceOutcomesMsg{mine}));
    wire::SubspaceOutcomesMsg theirs = wire::decode_subspace_outcomes(
        detail::client_expect(sock, wire::Tag::kSubspaceOutcomes));
    CollisionPairing pairing = detail::pair_from_blocks(
        mine, theirs.blocks, cfg.dim, cfg.block,
        static_cast<int>(cfg.target_pairs - pairs_total));
    wire::PairingMsg pm;
    for (const auto& p : pairing.pairs)
      pm.pairs.push_back({static_cast<std::uint32_t>(p.alice_copy),
                          static_cast<std::uint32_t>(p.bob_copy),
                          static_cast<std::uint16_t>(p.block_index)});
    detail::send_frame(sock, wire::encode(pm));
    SubspacePartition geom(cfg.dim, cfg.block, Mat());
    for (const auto& p : pairing.pairs) {
      std::uint32_t id = wire::register_id(round, wire::Role::kAlice, p.alice_copy);
      detail::send_frame(sock, wire::encode(wire::QTransferMsg{
                                   id, static_cast<std::uint32_t>(
                                           geom.rank(p.block_index))}));
    }
    pairs_total += static_cast<std::int64_t>(pairing.pairs.size());
    wire::RoundMsg rm =
        wire::decode_round(detail::client_expect(sock, wire::Tag::kRound));
    ++round;
    if (!rm.cont) break;
  }

  wire::EstimateMsg em =
      wire::decode_estimate(detail::client_expect(sock, wire::Tag::kEstimate));
  ClientResult out;
  out.estimate = em.value;
  out.no_pairs = em.status == 1;
  out.pairs = pairs_total;
  out.rounds = round;
  return out;
}

inline ClientResult bob_run(const NetConfig& cfg, const std::string& host, int port) {
  detail::Socket s = connect_client(host, port, cfg.timeout_ms);
  detail::client_handshake(s, wire::Role::kBob, cfg);
  const int k = copies_per_round(cfg.dim, cfg.block, cfg.copies_factor);

  std::int64_t pairs_total = 0, successes = 0;
  int round = 0;
  for (;;) {
    wire::SubspaceOutcomesMsg theirs = wire::decode_subspace_outcomes(
        detail::client_expect(s, wire::Tag::kSubspaceOutcomes));
    auto mine = detail::client_measure(s, wire::Role::kBob, round, k);
    detail::send_frame(s, wire::encode(wire::SubspaceOutcomesMsg{mine}));
    wire::PairingMsg pm =
        wire::decode_pairing(detail::client_expect(s, wire::Tag::kPairing));

    wire::SwapReqMsg sreq;
    for (const auto& p : pm.pairs)
      sreq.pairs.push_back(
          {wire::register_id(round, wire::Role::kBob, static_cast<int>(p.bob_copy)),
           wire::register_id(round, wire::Role::kAlice,
                             static_cast<int>(p.alice_copy))});
    detail::send_frame(s, wire::encode(sreq));
    wire::SwapResultsMsg sres = wire::decode_swap_results(
        detail::client_expect(s, wire::Tag::kSwapResults));
    if (sres.count != pm.pairs.size())
      throw wire::ProtocolError("bob: swap result count mismatch");
    for (std::uint32_t i = 0; i < sres.count; ++i)
      if (wire::swap_result_bit(sres, i) == 0) ++successes;
    pairs_total += static_cast<std::int64_t>(pm.pairs.size());

    bool cont = pairs_total < cfg.target_pairs && round + 1 < cfg.max_rounds;
    detail::send_frame(
        s, wire::encode(wire::RoundMsg{static_cast<std::uint32_t>(round),
                                       static_cast<std::uint8_t>(cont ? 1 : 0)}));
    ++round;
    if (!cont) break;
  }

  wire::EstimateMsg em;
  if (pairs_total == 0) {
    em.value = std::numeric_limits<double>::quiet_NaN();
    em.status = 1;
  } else {
    em.value = 2.0 * static_cast<double>(successes) / pairs_total - 1.0;
    em.status = 0;
  }
  detail::send_frame(s, wire::encode(em));

  ClientResult out;
  out.estimate = em.value;
  out.no_pairs = em.status == 1;
  out.pairs = pairs_total;
  out.successes = successes;
  out.rounds = round;
  return out;
}

}  // namespace dipesim::net
