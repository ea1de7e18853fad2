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

// Command-line driver: sweeps (dipe/gdipe/decision), the verification suites,
// and the three roles of the networked protocol (referee/alice/bob).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dipesim/harness.hpp"
#include "dipesim/net.hpp"

namespace {

using dipesim::harness::ExperimentConfig;

// --out paths stay as given when absolute; relative ones are placed under
// DIPESIM_OUT_DIR when that is set.
std::string output_path(const std::string& out) {
  if (out.empty() || out.front() == '/') return out;
  const char* dir = std::getenv("DIPESIM_OUT_DIR");
  if (!dir || !*dir) return out;
  std::string d(dir);
  if (d.back() != '/') d += '/';
  return d + out;
}

struct HostPort {
  std::string host = "127.0.0.1";
  int port = 0;
};

HostPort parse_hostport(const std::string& s) {
  HostPort hp;
  auto pos = s.rfind(':');
  if (pos == std::string::npos) {
    bool digits = !s.empty();
    for (char c : s) digits = digits && c >= '0' && c <= '9';
    if (digits)
      hp.port = std::stoi(s);
    else if (!s.empty())
      hp.host = s;
    return hp;
  }
  if (pos > 0) hp.host = s.substr(0, pos);
  hp.port = std::stoi(s.substr(pos + 1));
  return hp;
}

struct SweepFlags {
  std::string config, d, q, k, eps, out, recipe;
  std::uint64_t seed = 0;
  int trials = 0, target_pairs = 0, max_rounds = 0, jobs = 0;
  double overlap = 0.0, copies_factor = 0.0, threshold = 0.0;
  CLI::Option *o_config{}, *o_d{}, *o_q{}, *o_k{}, *o_eps{}, *o_out{}, *o_recipe{},
      *o_seed{}, *o_trials{}, *o_target{}, *o_rounds{}, *o_jobs{}, *o_overlap{},
      *o_factor{}, *o_threshold{};
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f) {
  f.o_config = cmd->add_option("--config", f.config,
                               "Config file, JSON or key=value text");
  f.o_d = cmd->add_option("--d", f.d, "Dimension(s), comma separated");
  f.o_q = cmd->add_option("--q", f.q, "Partition block size(s), comma separated");
  f.o_k = cmd->add_option("--k", f.k, "Copies per side, comma separated");
  f.o_eps = cmd->add_option("--eps", f.eps, "Truncation threshold(s), comma separated");
  f.o_trials = cmd->add_option("--trials", f.trials, "Trials per grid point");
  f.o_seed = cmd->add_option("--seed", f.seed, "Run seed");
  f.o_out = cmd->add_option("--out", f.out, "CSV output path");
  f.o_recipe = cmd->add_option("--recipe", f.recipe,
                               "State pair recipe: equal|independent|planted");
  f.o_overlap = cmd->add_option("--overlap", f.overlap, "Planted squared overlap");
  f.o_target = cmd->add_option("--target-pairs", f.target_pairs,
                               "Pairs to accumulate before stopping");
  f.o_rounds = cmd->add_option("--max-rounds", f.max_rounds, "Round cap");
  f.o_factor = cmd->add_option("--copies-factor", f.copies_factor,
                               "Copies per round = factor * sqrt(d/q)");
  f.o_threshold = cmd->add_option("--threshold", f.threshold,
                                  "Absolute-error success threshold");
  f.o_jobs = cmd->add_option("--jobs", f.jobs, "Worker threads");
}

ExperimentConfig build_config(const SweepFlags& f, const std::string& experiment) {
  ExperimentConfig cfg;
  if (f.o_config->count()) cfg = dipesim::harness::load_config_file(f.config);
  cfg.experiment = experiment;
  namespace hd = dipesim::harness::detail;
  if (f.o_d->count()) cfg.d = hd::parse_int_list(f.d);
  if (f.o_q->count()) cfg.q = hd::parse_int_list(f.q);
  if (f.o_k->count()) cfg.k = hd::parse_int_list(f.k);
  if (f.o_eps->count()) cfg.epsilon = hd::parse_double_list(f.eps);
  if (f.o_trials->count()) cfg.trials = f.trials;
  if (f.o_seed->count()) cfg.seed = f.seed;
  if (f.o_out->count()) cfg.out = f.out;
  if (f.o_recipe->count()) cfg.recipe = f.recipe;
  if (f.o_overlap->count()) cfg.overlap = f.overlap;
  if (f.o_target->count()) cfg.target_pairs = f.target_pairs;
  if (f.o_rounds->count()) cfg.max_rounds = f.max_rounds;
  if (f.o_factor->count()) cfg.copies_factor = f.copies_factor;
  if (f.o_threshold->count()) cfg.threshold = f.threshold;
  if (f.o_jobs->count()) cfg.jobs = f.jobs;
  if (cfg.out.empty()) cfg.out = experiment + "_sweep.csv";
  cfg.out = output_path(cfg.out);
  return cfg;
}

int run_sweep_cmd(const SweepFlags& flags, const std::string& experiment) {
  ExperimentConfig cfg = build_config(flags, experiment);
  dipesim::harness::SweepResult result = dipesim::harness::run_sweep_to_files(cfg);
  nlohmann::json j{{"out", cfg.out},
                   {"summary", cfg.out + ".summary.json"},
                   {"grid_points", result.summaries.size()},
                   {"records", result.records.size()}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct NetFlags {
  std::string listen = "127.0.0.1:0";
  std::string connect = "127.0.0.1:9901";
  std::string transcript, port_file;
  std::string recipe = "independent";
  std::uint64_t seed = 1;
  int d = 64, q = 16, target_pairs = 20, max_rounds = 64, timeout_ms = 10000;
  double copies_factor = 4.0, overlap = 0.5;
};

void add_net_flags(CLI::App* cmd, NetFlags& f) {
  cmd->add_option("--seed", f.seed, "Run seed; all three parties must agree");
  cmd->add_option("--d", f.d, "Dimension");
  cmd->add_option("--q", f.q, "Partition block size");
  cmd->add_option("--target-pairs", f.target_pairs, "Pairs to accumulate");
  cmd->add_option("--max-rounds", f.max_rounds, "Round cap");
  cmd->add_option("--copies-factor", f.copies_factor,
                  "Copies per round = factor * sqrt(d/q)");
  cmd->add_option("--recipe", f.recipe, "equal|independent|planted");
  cmd->add_option("--overlap", f.overlap, "Planted squared overlap");
  cmd->add_option("--timeout-ms", f.timeout_ms, "Socket timeout");
}

dipesim::net::NetConfig to_net_config(const NetFlags& f) {
  dipesim::net::NetConfig cfg;
  cfg.dim = f.d;
  cfg.block = f.q;
  cfg.target_pairs = f.target_pairs;
  cfg.max_rounds = f.max_rounds;
  cfg.copies_factor = f.copies_factor;
  cfg.seed = f.seed;
  cfg.recipe = dipesim::harness::recipe_from_string(f.recipe);
  cfg.planted_overlap = f.overlap;
  cfg.timeout_ms = f.timeout_ms;
  return cfg;
}

nlohmann::json estimate_json(double value, bool no_pairs) {
  if (no_pairs) return nullptr;
  return value;
}

int run_referee_cmd(const NetFlags& flags) {
  HostPort hp = parse_hostport(flags.listen);
  dipesim::net::RefereeOptions opt;
  opt.transcript_path = output_path(flags.transcript);
  opt.port_file = output_path(flags.port_file);
  dipesim::net::RefereeResult res =
      dipesim::net::referee_serve(to_net_config(flags), hp.host, hp.port, opt);
  nlohmann::json j{
      {"port", res.port},
      {"estimate", estimate_json(res.estimate.value, res.estimate.status != 0)},
      {"status", res.estimate.status},
      {"pairs", res.pairs},
      {"successes", res.successes},
      {"rounds", res.rounds},
      {"copies_per_round", res.copies_per_round},
      {"frames", res.transcript.size()},
      {"ledger",
       {{"alice_copies", res.ledger.alice_copies},
        {"bob_copies", res.ledger.bob_copies},
        {"quantum_messages", res.ledger.quantum_message_dims.size()},
        {"qubit_equivalents", res.ledger.qubit_equivalents},
        {"classical_bits", res.ledger.classical_bits}}}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_client_cmd(const NetFlags& flags, bool alice) {
  HostPort hp = parse_hostport(flags.connect);
  dipesim::net::ClientResult res =
      alice ? dipesim::net::alice_run(to_net_config(flags), hp.host, hp.port)
            : dipesim::net::bob_run(to_net_config(flags), hp.host, hp.port);
  nlohmann::json j{{"role", alice ? "alice" : "bob"},
                   {"estimate", estimate_json(res.estimate, res.no_pairs)},
                   {"no_pairs", res.no_pairs},
                   {"pairs", res.pairs},
                   {"successes", res.successes},
                   {"rounds", res.rounds}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_verify_cmd(const std::string& suite, std::uint64_t seed, bool quick,
                   const std::string& out) {
  dipesim::harness::VerifyReport rep = dipesim::harness::run_verify(suite, seed, quick);
  nlohmann::json j = dipesim::harness::verify_report_json(suite, seed, quick, rep);
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::string path = output_path(out);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write report: " + path);
    os << j.dump(2) << "\n";
    int failed = 0;
    for (const auto& c : rep.checks)
      if (!c.pass) ++failed;
    std::printf("%s: %zu checks, %d failed -> %s\n", suite.c_str(),
                rep.checks.size(), failed, path.c_str());
  }
  return rep.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed inner-product estimation: sweeps, verification, "
               "and the networked two-party protocol"};
  app.require_subcommand(1);
  int rc = 0;

  auto* verify = app.add_subcommand("verify", "Run verification suites");
  std::string v_suite = "all", v_out;
  std::uint64_t v_seed = 1;
  bool v_quick = false;
  verify->add_option("--suite", v_suite, "Suite name or 'all'");
  verify->add_option("--seed", v_seed, "Verification seed");
  verify->add_flag("--quick", v_quick, "Reduced sample sizes");
  verify->add_option("--out", v_out, "Write the JSON report here");
  verify->callback([&] { rc = run_verify_cmd(v_suite, v_seed, v_quick, v_out); });

  SweepFlags dipe_flags, gdipe_flags, decision_flags;
  auto* dipe = app.add_subcommand("dipe", "Collision-protocol estimation sweep");
  add_sweep_flags(dipe, dipe_flags);
  dipe->callback([&] { rc = run_sweep_cmd(dipe_flags, "dipe"); });

  auto* gdipe = app.add_subcommand("gdipe", "Bilinear-estimator sweep");
  add_sweep_flags(gdipe, gdipe_flags);
  gdipe->callback([&] { rc = run_sweep_cmd(gdipe_flags, "gdipe"); });

  auto* decision = app.add_subcommand("decision", "Overlap decision sweep");
  add_sweep_flags(decision, decision_flags);
  decision->callback([&] { rc = run_sweep_cmd(decision_flags, "decision"); });

  NetFlags ref_flags, alice_flags, bob_flags;
  auto* referee = app.add_subcommand("referee", "Serve a networked protocol run");
  referee->add_option("--listen", ref_flags.listen, "host:port (port 0 = ephemeral)");
  referee->add_option("--transcript", ref_flags.transcript,
                      "Write a JSONL frame transcript here");
  referee->add_option("--port-file", ref_flags.port_file,
                      "Write the bound port number here");
  add_net_flags(referee, ref_flags);
  referee->callback([&] { rc = run_referee_cmd(ref_flags); });

  auto* alice = app.add_subcommand("alice", "Run the Alice client");
  alice->add_option("--connect", alice_flags.connect, "Referee host:port");
  add_net_flags(alice, alice_flags);
  alice->callback([&] { rc = run_client_cmd(alice_flags, true); });

  auto* bob = app.add_subcommand("bob", "Run the Bob client");
  bob->add_option("--connect", bob_flags.connect, "Referee host:port");
  add_net_flags(bob, bob_flags);
  bob->callback([&] { rc = run_client_cmd(bob_flags, false); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return rc;
}
