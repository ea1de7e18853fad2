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

// Experiment driver: sweep configuration, per-trial records, CSV and JSON
// persistence, and the verification suites behind the CLI.
//
// Determinism contract: trial t of grid point g uses the stream
// Stream(seed).child(experiment).child("grid", g).child("trial", t), so every
// record is a pure function of (config, seed, g, t) regardless of how trials
// are scheduled across workers.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dipesim/oracles.hpp"

namespace dipesim::harness {

// Absolute slack used when classifying |estimate - truth| against a success
// threshold, so boundary cases that are exact in rational arithmetic do not
// flip on the last bit of a double.
inline constexpr double kThresholdSlack = 1e-12;

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string experiment = "dipe";  // dipe | gdipe | decision | verify | net
  std::vector<int> d{8};
  std::vector<int> q{8};  // partition block size (dipe/decision)
  std::vector<int> k{10};  // copies per side (gdipe)
  std::vector<double> epsilon{0.3};
  int trials = 100;
  std::uint64_t seed = 1;
  std::map<std::string, double> constants;
  std::string out;  // CSV path; the JSON summary goes to out + ".summary.json"

  std::string recipe = "independent";  // equal | independent | planted
  double overlap = 0.5;                // planted |<psi|phi>|^2
  int target_pairs = 20;
  int max_rounds = 64;
  double copies_factor = 4.0;
  double threshold = 0.3;  // |estimate - truth| counted as success below this
  int jobs = 1;

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const {
    static const char* kinds[] = {"dipe", "gdipe", "decision", "verify", "net"};
    if (std::find(std::begin(kinds), std::end(kinds), experiment) == std::end(kinds))
      throw std::invalid_argument("config: unknown experiment: " + experiment);
    auto positive = [](const auto& xs, const char* what) {
      if (xs.empty()) throw std::invalid_argument(std::string("config: empty ") + what);
      for (auto x : xs)
        if (x < 1) throw std::invalid_argument(std::string("config: ") + what +
                                               " values must be positive");
    };
    positive(d, "d");
    positive(q, "q");
    positive(k, "k");
    if (epsilon.empty()) throw std::invalid_argument("config: empty epsilon");
    for (double e : epsilon)
      if (!(e > 0.0) || e > 1.0)
        throw std::invalid_argument("config: epsilon values must be in (0, 1]");
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (recipe != "equal" && recipe != "independent" && recipe != "planted")
      throw std::invalid_argument("config: unknown recipe: " + recipe);
    if (overlap < 0.0 || overlap > 1.0)
      throw std::invalid_argument("config: overlap must be in [0, 1]");
    if (target_pairs < 1) throw std::invalid_argument("config: target_pairs must be >= 1");
    if (max_rounds < 1) throw std::invalid_argument("config: max_rounds must be >= 1");
    if (!(copies_factor > 0.0))
      throw std::invalid_argument("config: copies_factor must be > 0");
    if (!(threshold > 0.0)) throw std::invalid_argument("config: threshold must be > 0");
    if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
  }
};

inline StateRecipe recipe_from_string(const std::string& s) {
  if (s == "equal") return StateRecipe::kEqual;
  if (s == "independent") return StateRecipe::kIndependent;
  if (s == "planted") return StateRecipe::kPlanted;
  throw std::invalid_argument("unknown state recipe: " + s);
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return nlohmann::json{{"experiment", c.experiment},
                        {"d", c.d},
                        {"q", c.q},
                        {"k", c.k},
                        {"epsilon", c.epsilon},
                        {"trials", c.trials},
                        {"seed", c.seed},
                        {"constants", c.constants},
                        {"out", c.out},
                        {"recipe", c.recipe},
                        {"overlap", c.overlap},
                        {"target_pairs", c.target_pairs},
                        {"max_rounds", c.max_rounds},
                        {"copies_factor", c.copies_factor},
                        {"threshold", c.threshold},
                        {"jobs", c.jobs}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  ExperimentConfig c;
  auto int_list = [](const nlohmann::json& v) {
    std::vector<int> out;
    if (v.is_array())
      for (const auto& e : v) out.push_back(e.get<int>());
    else
      out.push_back(v.get<int>());
    return out;
  };
  auto double_list = [](const nlohmann::json& v) {
    std::vector<double> out;
    if (v.is_array())
      for (const auto& e : v) out.push_back(e.get<double>());
    else
      out.push_back(v.get<double>());
    return out;
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "experiment") c.experiment = value.get<std::string>();
    else if (key == "d") c.d = int_list(value);
    else if (key == "q" || key == "block") c.q = int_list(value);
    else if (key == "k") c.k = int_list(value);
    else if (key == "epsilon") c.epsilon = double_list(value);
    else if (key == "trials") c.trials = value.get<int>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "constants") c.constants = value.get<std::map<std::string, double>>();
    else if (key == "out") c.out = value.get<std::string>();
    else if (key == "recipe") c.recipe = value.get<std::string>();
    else if (key == "overlap") c.overlap = value.get<double>();
    else if (key == "target_pairs") c.target_pairs = value.get<int>();
    else if (key == "max_rounds") c.max_rounds = value.get<int>();
    else if (key == "copies_factor") c.copies_factor = value.get<double>();
    else if (key == "threshold") c.threshold = value.get<double>();
    else if (key == "jobs") c.jobs = value.get<int>();
    else throw std::invalid_argument("config: unknown key: " + key);
  }
  return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& p : split_commas(s)) out.push_back(std::stoi(p));
  return out;
}

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& p : split_commas(s)) out.push_back(std::stod(p));
  return out;
}

inline void apply_kv(ExperimentConfig& c, const std::string& key,
                     const std::string& value) {
  if (key == "experiment") c.experiment = value;
  else if (key == "d") c.d = parse_int_list(value);
  else if (key == "q" || key == "block") c.q = parse_int_list(value);
  else if (key == "k") c.k = parse_int_list(value);
  else if (key == "epsilon" || key == "eps") c.epsilon = parse_double_list(value);
  else if (key == "trials") c.trials = std::stoi(value);
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "out") c.out = value;
  else if (key == "recipe") c.recipe = value;
  else if (key == "overlap") c.overlap = std::stod(value);
  else if (key == "target_pairs") c.target_pairs = std::stoi(value);
  else if (key == "max_rounds") c.max_rounds = std::stoi(value);
  else if (key == "copies_factor") c.copies_factor = std::stod(value);
  else if (key == "threshold") c.threshold = std::stod(value);
  else if (key == "jobs") c.jobs = std::stoi(value);
  else if (key.rfind("constants.", 0) == 0)
    c.constants[key.substr(10)] = std::stod(value);
  else throw std::invalid_argument("config: unknown key: " + key);
}

}  // namespace detail

// Flat key=value format; a [section] line selects the experiment. Lists are
// comma separated; constants use dotted keys (constants.c = 64).
inline ExperimentConfig parse_kv_config(const std::string& text) {
  ExperimentConfig c;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      c.experiment = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key=value, got: " + line);
    detail::apply_kv(c, detail::trim(line.substr(0, eq)),
                     detail::trim(line.substr(eq + 1)));
  }
  return c;
}

// JSON object or key=value text, detected by the first non-space character.
inline ExperimentConfig parse_config_text(const std::string& text) {
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    if (ch == '{') return config_from_json(nlohmann::json::parse(text));
    break;
  }
  return parse_kv_config(text);
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Trials

struct TrialRecord {
  std::string experiment;
  std::int64_t trial = 0;
  int d = 0;
  int q = 0;
  int k = 0;
  double epsilon = 0.0;
  double true_value = 0.0;
  double estimate = 0.0;
  double abs_error = 0.0;  // |estimate - true_value|, NaN when no estimate
  std::int64_t s = 0;      // SWAP successes (dipe)
  std::int64_t m = 0;      // accumulated pairs (dipe)
  std::int64_t s_a = 0;    // subspace successes (gdipe)
  std::int64_t s_b = 0;
  std::int64_t copies_used = 0;  // both sides combined
  std::int64_t qubit_equivalents = 0;
  std::int64_t classical_bits = 0;
  std::uint64_t seed = 0;  // config seed; trial streams derive from it
};

inline constexpr const char* kTrialCsvHeader =
    "experiment,trial,d,q,k,epsilon,true_value,estimate,abs_error,"
    "s,m,s_a,s_b,copies_used,qubit_equivalents,classical_bits,seed";

inline std::string csv_row(const TrialRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%s,%lld,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%lld,%lld,%lld,%lld,"
                "%lld,%lld,%lld,%llu",
                r.experiment.c_str(), static_cast<long long>(r.trial), r.d, r.q,
                r.k, r.epsilon, r.true_value, r.estimate, r.abs_error,
                static_cast<long long>(r.s), static_cast<long long>(r.m),
                static_cast<long long>(r.s_a), static_cast<long long>(r.s_b),
                static_cast<long long>(r.copies_used),
                static_cast<long long>(r.qubit_equivalents),
                static_cast<long long>(r.classical_bits),
                static_cast<unsigned long long>(r.seed));
  return buf;
}

struct GridPoint {
  int d = 0;
  int q = 0;
  int k = 0;
  double epsilon = 0.0;
  std::size_t index = 0;  // row-major over (d, q, k, epsilon)
};

inline std::vector<GridPoint> expand_grid(const ExperimentConfig& c) {
  if (c.experiment != "dipe" && c.experiment != "gdipe" && c.experiment != "decision")
    throw std::invalid_argument("expand_grid: experiment has no sweep semantics: " +
                                c.experiment);
  std::vector<GridPoint> out;
  for (int d : c.d)
    for (int q : c.q)
      for (int k : c.k)
        for (double eps : c.epsilon) {
          if ((c.experiment == "dipe" || c.experiment == "decision") && q > d)
            throw std::invalid_argument("expand_grid: block size q exceeds d");
          out.push_back({d, q, k, eps, out.size()});
        }
  return out;
}

inline TrialRecord run_trial(const ExperimentConfig& cfg, const GridPoint& g,
                             std::int64_t trial) {
  Stream ts = Stream(cfg.seed)
                  .child(cfg.experiment)
                  .child("grid", static_cast<std::uint64_t>(g.index))
                  .child("trial", static_cast<std::uint64_t>(trial));
  TrialRecord r;
  r.experiment = cfg.experiment;
  r.trial = trial;
  r.d = g.d;
  r.q = g.q;
  r.k = g.k;
  r.epsilon = g.epsilon;
  r.seed = cfg.seed;

  if (cfg.experiment == "dipe") {
    Stream gen = ts.child("states");
    auto [psi, phi] =
        make_state_pair(g.d, recipe_from_string(cfg.recipe), cfg.overlap, gen);
    DipeEstimate e = run_dipe(psi, phi, g.q, cfg.target_pairs, cfg.max_rounds,
                              ts.child("run"), cfg.copies_factor);
    r.true_value = overlap(psi, phi);
    r.estimate = e.estimate;
    r.s = e.successes;
    r.m = e.pairs;
    r.copies_used = e.ledger.alice_copies + e.ledger.bob_copies;
    r.qubit_equivalents = e.ledger.qubit_equivalents;
    r.classical_bits = e.ledger.classical_bits;
  } else if (cfg.experiment == "gdipe") {
    Stream obs = ts.child("observable");
    HermitianObservable m = random_bounded_observable(g.d, obs);
    SpectralTruncation t = truncate(m, g.epsilon);
    Stream gen = ts.child("states");
    auto [psi, phi] =
        make_state_pair(g.d, recipe_from_string(cfg.recipe), cfg.overlap, gen);
    Stream run = ts.child("run");
    GdipeOutcome o = run_gdipe(t, psi, phi, g.k, run);
    r.true_value =
        std::norm((phi.vec().adjoint() * t.truncated * psi.vec()).value());
    r.estimate = o.w;
    r.s_a = o.s_a;
    r.s_b = o.s_b;
    r.copies_used = 2LL * g.k;
    // POVM outcomes are continuous; their classical encoding is not metered.
  } else if (cfg.experiment == "decision") {
    bool yes = trial % 2 == 0;  // even trials are YES instances
    Stream gen = ts.child("instance");
    DecisionInstance inst = gen_dipe_instance(g.d, yes, gen);
    DipeEstimate e = run_dipe(inst.psi, inst.phi, g.q, cfg.target_pairs,
                              cfg.max_rounds, ts.child("run"), cfg.copies_factor);
    r.true_value = overlap(inst.psi, inst.phi);
    r.estimate = e.estimate;
    r.s = e.successes;
    r.m = e.pairs;
    r.copies_used = e.ledger.alice_copies + e.ledger.bob_copies;
    r.qubit_equivalents = e.ledger.qubit_equivalents;
    r.classical_bits = e.ledger.classical_bits;
  } else {
    throw std::invalid_argument("run_trial: experiment has no sweep semantics: " +
                                cfg.experiment);
  }
  r.abs_error = std::abs(r.estimate - r.true_value);
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

struct GridSummary {
  GridPoint point;
  std::int64_t trials = 0;
  double mean_abs_error = 0.0;
  double se_abs_error = 0.0;
  double success_rate = 0.0;  // |err| <= threshold; decision: correct at 1/2
  double se_success_rate = 0.0;
  double mean_estimate = 0.0;
  double mean_copies_used = 0.0;
  double mean_pairs = 0.0;
  double copies_per_pair = 0.0;
  double mean_qubit_equivalents = 0.0;
  double mean_classical_bits = 0.0;
  std::int64_t no_estimate_trials = 0;
};

struct SweepResult {
  std::vector<TrialRecord> records;  // ordered by (grid index, trial)
  std::vector<GridSummary> summaries;
};

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<GridPoint> grid = expand_grid(cfg);
  const std::int64_t trials = cfg.trials;
  const std::int64_t total = static_cast<std::int64_t>(grid.size()) * trials;

  SweepResult result;
  result.records.resize(total);
  // Slot addressing by (grid, trial) index keeps the output order fixed no
  // matter how the workers interleave.
  std::atomic<std::int64_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      std::int64_t i = next.fetch_add(1);
      if (i >= total) return;
      try {
        result.records[i] = run_trial(cfg, grid[i / trials], i % trials);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const int jobs = std::min<std::int64_t>(std::max(1, cfg.jobs), total);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (const GridPoint& g : grid) {
    GridSummary s;
    s.point = g;
    s.trials = trials;
    dipesim::detail::MeanAcc err, est;
    std::int64_t ok = 0, copies = 0, pairs = 0, qubits = 0, classical = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
      const TrialRecord& r = result.records[g.index * trials + t];
      if (std::isfinite(r.abs_error)) {
        err.add(r.abs_error);
        est.add(r.estimate);
      } else {
        ++s.no_estimate_trials;
      }
      bool success;
      if (cfg.experiment == "decision")
        success = (r.estimate >= 0.5) == (t % 2 == 0);
      else
        // Slack admits errors that equal the threshold exactly in rational
        // arithmetic (e.g. 2*13/20 - 1 = 0.3) but round up in binary.
        success = std::isfinite(r.abs_error) &&
                  r.abs_error <= cfg.threshold + kThresholdSlack;
      if (success) ++ok;
      copies += r.copies_used;
      pairs += r.m;
      qubits += r.qubit_equivalents;
      classical += r.classical_bits;
    }
    double nan = std::numeric_limits<double>::quiet_NaN();
    s.mean_abs_error = err.n > 0 ? err.mean() : nan;
    s.se_abs_error = err.std_error();
    s.mean_estimate = est.n > 0 ? est.mean() : nan;
    s.success_rate = static_cast<double>(ok) / trials;
    s.se_success_rate =
        std::sqrt(s.success_rate * (1.0 - s.success_rate) / trials);
    s.mean_copies_used = static_cast<double>(copies) / trials;
    s.mean_pairs = static_cast<double>(pairs) / trials;
    s.copies_per_pair = pairs > 0 ? static_cast<double>(copies) / pairs : nan;
    s.mean_qubit_equivalents = static_cast<double>(qubits) / trials;
    s.mean_classical_bits = static_cast<double>(classical) / trials;
    result.summaries.push_back(std::move(s));
  }
  return result;
}

// First line is always a timestamp comment; reproducibility comparisons skip
// it and compare the rest byte for byte.
inline void write_trial_csv(const std::string& path,
                            const std::vector<TrialRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  std::time_t now = std::time(nullptr);
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  out << "# timestamp " << stamp << "\n";
  out << kTrialCsvHeader << "\n";
  for (const TrialRecord& r : records) out << csv_row(r) << "\n";
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline nlohmann::json summary_json(const ExperimentConfig& cfg,
                                   const SweepResult& result) {
  nlohmann::json points = nlohmann::json::array();
  for (const GridSummary& s : result.summaries) {
    points.push_back({{"d", s.point.d},
                      {"q", s.point.q},
                      {"k", s.point.k},
                      {"epsilon", s.point.epsilon},
                      {"trials", s.trials},
                      {"mean_abs_error", s.mean_abs_error},
                      {"se_abs_error", s.se_abs_error},
                      {"success_rate", s.success_rate},
                      {"se_success_rate", s.se_success_rate},
                      {"mean_estimate", s.mean_estimate},
                      {"mean_copies_used", s.mean_copies_used},
                      {"mean_pairs", s.mean_pairs},
                      {"copies_per_pair", s.copies_per_pair},
                      {"mean_qubit_equivalents", s.mean_qubit_equivalents},
                      {"mean_classical_bits", s.mean_classical_bits},
                      {"no_estimate_trials", s.no_estimate_trials}});
  }
  return nlohmann::json{{"config", config_to_json(cfg)}, {"grid", points}};
}

inline SweepResult run_sweep_to_files(const ExperimentConfig& cfg) {
  if (cfg.out.empty())
    throw std::invalid_argument("run_sweep_to_files: output path not set");
  SweepResult result = run_sweep(cfg);
  write_trial_csv(cfg.out, result.records);
  std::ofstream js(cfg.out + ".summary.json");
  if (!js) throw std::runtime_error("cannot write summary: " + cfg.out + ".summary.json");
  js << summary_json(cfg, result).dump(2) << "\n";
  return result;
}

// ---------------------------------------------------------------------------
// Verification suites

struct VerifyCheck {
  std::string suite;
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string kind;  // exact | bound | atleast | factor
  bool pass = false;
  bool skipped = false;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass = true;
};

namespace detail {

inline VerifyCheck exact(const char* suite, const std::string& name, double obs,
                         double exp, double tol) {
  return {suite, name, obs, exp, tol, "exact", std::abs(obs - exp) <= tol, false};
}
inline VerifyCheck bound(const char* suite, const std::string& name, double obs,
                         double exp, double tol) {
  return {suite, name, obs, exp, tol, "bound", obs <= exp + tol, false};
}
inline VerifyCheck atleast(const char* suite, const std::string& name, double obs,
                           double exp) {
  return {suite, name, obs, exp, 0.0, "atleast", obs >= exp, false};
}
// Pass when observed is within the given multiplicative factor of expected.
inline VerifyCheck factor(const char* suite, const std::string& name, double obs,
                          double exp, double fac) {
  bool ok = obs <= exp * fac && obs >= exp / fac;
  return {suite, name, obs, exp, fac, "factor", ok, false};
}

inline void verify_haar(std::uint64_t seed, bool quick, std::vector<VerifyCheck>& out) {
  Stream rng = Stream(seed).child("verify").child("haar");
  const int d = 8;
  const std::int64_t n = quick ? 20000 : 200000;
  Mat acc1 = Mat::Zero(d, d);
  Mat acc2 = Mat::Zero(d * d, d * d);
  Vec w(d * d);
  for (std::int64_t i = 0; i < n; ++i) {
    PureState psi = haar_state(d, rng);
    acc1 += psi.vec() * psi.vec().adjoint();
    for (int a = 0; a < d; ++a) w.segment(a * d, d) = psi.vec()[a] * psi.vec();
    acc2 += w * w.adjoint();
  }
  acc1 /= static_cast<double>(n);
  acc2 /= static_cast<double>(n);
  Mat target2 = Mat::Identity(d * d, d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) target2(a * d + b, b * d + a) += 1.0;
  target2 /= static_cast<double>(d) * (d + 1);
  double scale = std::sqrt(200000.0 / n);
  out.push_back(bound("haar", "first_moment_frobenius",
                      (acc1 - Mat::Identity(d, d) / d).norm(), 0.01 * scale, 0.0));
  out.push_back(bound("haar", "second_moment_frobenius", (acc2 - target2).norm(),
                      0.02 * scale, 0.0));

  const std::int64_t nb = quick ? 20000 : 100000;
  const int db = 6;
  const double eps_prime = 1.0;
  std::int64_t hits = 0;
  double cos_e = std::cos(eps_prime);
  for (std::int64_t i = 0; i < nb; ++i) {
    PureState psi = haar_state(db, rng);
    PureState phi = haar_state(db, rng);
    if (std::abs(inner(phi, psi)) >= cos_e) ++hits;
  }
  double ball_expected = std::pow(std::sin(eps_prime), 2.0 * db - 2.0);
  out.push_back(exact("haar", "ball_measure_d6", static_cast<double>(hits) / nb,
                      ball_expected, 0.010 * std::sqrt(100000.0 / nb)));

  NormConcentration tight =
      haar_norm_concentration_check(1024, 256, quick ? 500 : 5000, 0.5, rng);
  out.push_back(bound("haar", "norm_concentration_d1024_b256", tight.failure_rate,
                      tight.bound, 0.0));
  NormConcentration loose =
      haar_norm_concentration_check(64, 16, quick ? 2000 : 20000, 0.5, rng);
  out.push_back(bound("haar", "norm_concentration_d64_b16", loose.failure_rate,
                      loose.bound, 0.0));
}

inline void verify_povm(std::uint64_t seed, bool quick, std::vector<VerifyCheck>& out) {
  Stream rng = Stream(seed).child("verify").child("povm");
  std::vector<int> dims, copies;
  if (quick) {
    dims = {2, 4, 8};
    copies = {0, 3, 6};
  } else {
    dims = {2, 3, 4, 5, 6, 7, 8};
    copies = {0, 1, 2, 3, 4, 5, 6};
  }
  const std::int64_t n = quick ? 20000 : 100000;
  for (int dw : dims)
    for (int s : copies) {
      dipesim::detail::MeanAcc a2, a4, c2;
      for (std::int64_t i = 0; i < n; ++i) {
        auto [alpha_sq, phase] = dipesim::detail::povm_coefficients(dw, s, rng);
        (void)phase;
        a2.add(alpha_sq);
        a4.add(alpha_sq * alpha_sq);
        c2.add((1.0 - alpha_sq) * (1.0 - alpha_sq));
      }
      std::string tag = "_d" + std::to_string(dw) + "_s" + std::to_string(s);
      out.push_back(exact("povm", "alpha_sq" + tag, a2.mean(),
                          povm_alpha_sq_mean(dw, s), 4 * a2.std_error() + 1e-12));
      out.push_back(exact("povm", "alpha_4" + tag, a4.mean(),
                          povm_alpha_4_mean(dw, s), 4 * a4.std_error() + 1e-12));
      out.push_back(exact("povm", "complement_sq" + tag, c2.mean(),
                          povm_complement_sq_mean(dw, s), 4 * c2.std_error() + 1e-12));
    }
}

inline void verify_spectral(std::uint64_t seed, bool quick,
                            std::vector<VerifyCheck>& out) {
  Stream rng = Stream(seed).child("verify").child("spectral");
  const int d = 8;
  const std::int64_t n = quick ? 100 : 1000;
  double max_excess = -std::numeric_limits<double>::infinity();
  double max_idem = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    HermitianObservable m = random_bounded_observable(d, rng);
    double eps = std::max(2.0 * rng.uniform(), 1e-3);
    SpectralTruncation t = truncate(m, eps);
    PureState a = haar_state(d, rng);
    PureState b = haar_state(d, rng);
    max_excess = std::max(max_excess, truncation_gap(m, t, a, b) - 0.5 * eps);
    if (t.support_dim > 0) {
      const Mat& p = t.support.mat();
      max_idem = std::max(max_idem, (p * p - p).cwiseAbs().maxCoeff());
    }
  }
  out.push_back(bound("spectral", "max_gap_minus_half_eps", max_excess, 0.0, 1e-8));
  out.push_back(bound("spectral", "support_projector_idempotence", max_idem, 0.0,
                      100 * kStructureTol));
}

inline void verify_gdipe_mean(std::uint64_t seed, bool quick,
                              std::vector<VerifyCheck>& out) {
  Stream base = Stream(seed).child("verify").child("gdipe-mean");
  const int d = 8, k = 25;
  const double eps = 0.3;
  const int instances = quick ? 3 : 8;
  const std::int64_t n = quick ? 20000 : 100000;
  for (int inst = 0; inst < instances; ++inst) {
    Stream gen = base.child("instance", static_cast<std::uint64_t>(inst));
    HermitianObservable m = random_bounded_observable(d, gen);
    SpectralTruncation t = truncate(m, eps);
    PureState psi = haar_state(d, gen);
    PureState phi = haar_state(d, gen);
    Stream mc = base.child("mc", static_cast<std::uint64_t>(inst));
    dipesim::detail::MeanAcc acc;
    for (std::int64_t i = 0; i < n; ++i)
      acc.add(run_gdipe(t, psi, phi, k, mc).w);
    std::string tag = "_inst" + std::to_string(inst);
    out.push_back(exact("gdipe-mean", "protocol_mean" + tag, acc.mean(),
                        estimator_mean_closed_form(t, psi, phi, k),
                        4 * acc.std_error() + 1e-12));

    // Conditional mean at fixed success counts (uniform POVM at s = 0 included
    // in the formula's domain; here both counts are positive).
    auto [c_psi, p] = dipesim::detail::support_coords(t, psi);
    auto [c_phi, qq] = dipesim::detail::support_coords(t, phi);
    if (p > 1e-12 && qq > 1e-12 && t.support_dim > 0) {
      Vec ca = c_psi / c_psi.norm();
      Vec cb = c_phi / c_phi.norm();
      const std::int64_t s_a = 2, s_b = 3;
      dipesim::detail::MeanAcc cond;
      double dsup = static_cast<double>(t.support_dim);
      for (std::int64_t i = 0; i < n; ++i) {
        auto ua = dipesim::detail::povm_sample_coords(ca, s_a, mc);
        auto vb = dipesim::detail::povm_sample_coords(cb, s_b, mc);
        double x = std::norm(dipesim::detail::weighted_inner(t, ua.outcome, vb.outcome));
        cond.add(((dsup + s_a) * (dsup + s_b) * x - t.hs_norm_sq) /
                 (static_cast<double>(k) * k));
      }
      out.push_back(exact("gdipe-mean", "conditional_mean" + tag, cond.mean(),
                          conditional_mean(t, psi, phi, k, s_a, s_b),
                          4 * cond.std_error() + 1e-12));
    }
  }
}

inline void verify_gdipe_var(std::uint64_t seed, bool quick,
                             std::vector<VerifyCheck>& out) {
  Stream base = Stream(seed).child("verify").child("gdipe-var");
  std::vector<int> dims = quick ? std::vector<int>{4, 8} : std::vector<int>{4, 8, 16};
  std::vector<int> ks = quick ? std::vector<int>{10, 40} : std::vector<int>{10, 40, 160};
  const std::int64_t n = quick ? 20000 : 200000;
  for (int dsup : dims)
    for (int k : ks) {
      Stream gen = base.child("instance", static_cast<std::uint64_t>(dsup * 1000 + k));
      HermitianObservable m = random_spread_observable(dsup, 0.2, gen);
      SpectralTruncation t = truncate(m, 0.3);
      PureState psi = haar_state(dsup, gen);
      PureState phi = haar_state(dsup, gen);
      Stream mc = base.child("mc", static_cast<std::uint64_t>(dsup * 1000 + k));
      dipesim::detail::MeanAcc acc;
      for (std::int64_t i = 0; i < n; ++i) acc.add(run_gdipe(t, psi, phi, k, mc).w);
      double mean = acc.mean();
      double var = std::max(0.0, (acc.sum_sq - acc.n * mean * mean) / (acc.n - 1));
      out.push_back(bound("gdipe-var",
                          "var_d" + std::to_string(dsup) + "_k" + std::to_string(k),
                          var, variance_bound(t, k), 0.0));
    }
}

inline void verify_gdipe_moments(std::uint64_t seed, bool quick,
                                 std::vector<VerifyCheck>& out) {
  Stream base = Stream(seed).child("verify").child("gdipe-moments");
  const int d = 8;
  const int instances = quick ? 5 : 20;
  const std::int64_t samples = quick ? 20000 : 100000;
  for (int inst = 0; inst < instances; ++inst) {
    Stream gen = base.child("instance", static_cast<std::uint64_t>(inst));
    HermitianObservable m = random_bounded_observable(d, gen);
    SpectralTruncation t = truncate(m, 0.3);
    PureState psi = haar_state(d, gen);
    PureState phi = haar_state(d, gen);
    std::int64_t s_a = static_cast<std::int64_t>(gen.bits() % 5);
    std::int64_t s_b = static_cast<std::int64_t>(gen.bits() % 5);
    Stream mc = base.child("mc", static_cast<std::uint64_t>(inst));
    std::vector<MomentReport> reports =
        term_evaluators(t, psi, phi, s_a, s_b, samples, mc);
    std::string tag = "inst" + std::to_string(inst) + "_";
    for (const MomentReport& r : reports) {
      VerifyCheck c;
      c.suite = "gdipe-moments";
      c.name = tag + r.name;
      c.observed = r.mc_estimate;
      c.expected = r.closed_form;
      c.tolerance = 4 * r.mc_std_error + 1e-12;
      c.kind = r.kind;
      c.skipped = r.skipped;
      if (r.skipped)
        c.pass = true;
      else if (r.kind == "exact")
        c.pass = std::abs(c.observed - c.expected) <= c.tolerance;
      else
        c.pass = c.observed <= c.expected + c.tolerance;
      out.push_back(std::move(c));
    }
  }
}

inline void verify_dipe(std::uint64_t seed, bool quick, std::vector<VerifyCheck>& out) {
  Stream base = Stream(seed).child("verify").child("dipe");
  const int d = 64, q = 16, target = 20, max_rounds = 64;
  const int runs = quick ? 30 : 200;
  const double overlaps[] = {0.0, 0.5, 1.0};
  for (double x : overlaps) {
    std::uint64_t xtag = static_cast<std::uint64_t>(x * 2.0);
    int ok = 0, exact_one = 0;
    double coll_obs = 0.0, coll_exp = 0.0;
    for (int i = 0; i < runs; ++i) {
      Stream ts = base.child("overlap", xtag).child("run", static_cast<std::uint64_t>(i));
      Stream gen = ts.child("states");
      auto [psi, phi] = make_state_pair(d, StateRecipe::kPlanted, x, gen);
      DipeEstimate e = run_dipe(psi, phi, q, target, max_rounds, ts.child("protocol"));
      double truth = overlap(psi, phi);
      if (std::isfinite(e.estimate) &&
          std::abs(e.estimate - truth) <= 0.3 + kThresholdSlack)
        ++ok;
      if (e.estimate == 1.0) ++exact_one;
      coll_obs += e.collision_count;
      coll_exp += e.expected_collision_sum;
    }
    std::string tag = "_x" + std::to_string(xtag);  // 2x the planted overlap
    out.push_back(atleast("dipe", "success_rate" + tag,
                          static_cast<double>(ok) / runs, 0.90));
    if (x == 1.0)
      out.push_back(exact("dipe", "exact_one_rate" + tag,
                          static_cast<double>(exact_one) / runs, 1.0, 0.0));
    out.push_back(factor("dipe", "collision_ratio" + tag, coll_obs / coll_exp, 1.0,
                         2.0));
  }
}

inline void verify_scaling(std::uint64_t seed, bool quick,
                           std::vector<VerifyCheck>& out) {
  Stream base = Stream(seed).child("verify").child("scaling");
  const int d = 64, target = 20, max_rounds = 64;
  const int runs = quick ? 10 : 50;
  const int qs[] = {4, 16, 64};
  double ratios[3] = {0, 0, 0};
  for (int qi = 0; qi < 3; ++qi) {
    int q = qs[qi];
    std::int64_t copies = 0, pairs = 0;
    for (int i = 0; i < runs; ++i) {
      Stream ts = base.child("q", static_cast<std::uint64_t>(q))
                      .child("run", static_cast<std::uint64_t>(i));
      Stream gen = ts.child("states");
      auto [psi, phi] = make_state_pair(d, StateRecipe::kPlanted, 0.5, gen);
      DipeEstimate e = run_dipe(psi, phi, q, target, max_rounds, ts.child("protocol"));
      copies += e.ledger.alice_copies + e.ledger.bob_copies;
      pairs += e.pairs;
    }
    double per_pair = static_cast<double>(copies) / std::max<std::int64_t>(1, pairs);
    ratios[qi] = per_pair / std::sqrt(static_cast<double>(d) / q);
  }
  double fitted = std::cbrt(ratios[0] * ratios[1] * ratios[2]);
  for (int qi = 0; qi < 3; ++qi)
    out.push_back(factor("scaling", "copies_per_pair_q" + std::to_string(qs[qi]),
                         ratios[qi], fitted, 2.0));
}

inline void verify_decision(std::uint64_t seed, bool quick,
                            std::vector<VerifyCheck>& out) {
  Stream base = Stream(seed).child("verify").child("decision");
  const int d = 32;
  const int trials = quick ? 30 : 200;
  DecisionRates full = decision_experiment(DecisionProtocol::kDipe, d, d, trials,
                                           base.child("block-full"));
  out.push_back(exact("decision", "yes_accept_block32", full.yes_accept_rate, 1.0, 0.0));
  out.push_back(atleast("decision", "no_reject_block32", full.no_reject_rate, 0.95));
  DecisionRates half = decision_experiment(DecisionProtocol::kDipe, d, 16, trials,
                                           base.child("block-half"));
  out.push_back(atleast("decision", "yes_accept_block16", half.yes_accept_rate,
                        2.0 / 3.0));
  out.push_back(atleast("decision", "no_reject_block16", half.no_reject_rate,
                        2.0 / 3.0));
}

}  // namespace detail

inline const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names = {
      "haar",      "povm",      "spectral", "gdipe-mean", "gdipe-var",
      "gdipe-moments", "dipe",  "scaling",  "decision"};
  return names;
}

inline VerifyReport run_verify(const std::string& selector, std::uint64_t seed,
                               bool quick) {
  const auto& names = verify_suites();
  if (selector != "all" &&
      std::find(names.begin(), names.end(), selector) == names.end())
    throw std::invalid_argument("unknown verify suite: " + selector);
  auto want = [&](const char* s) { return selector == "all" || selector == s; };
  VerifyReport rep;
  if (want("haar")) detail::verify_haar(seed, quick, rep.checks);
  if (want("povm")) detail::verify_povm(seed, quick, rep.checks);
  if (want("spectral")) detail::verify_spectral(seed, quick, rep.checks);
  if (want("gdipe-mean")) detail::verify_gdipe_mean(seed, quick, rep.checks);
  if (want("gdipe-var")) detail::verify_gdipe_var(seed, quick, rep.checks);
  if (want("gdipe-moments")) detail::verify_gdipe_moments(seed, quick, rep.checks);
  if (want("dipe")) detail::verify_dipe(seed, quick, rep.checks);
  if (want("scaling")) detail::verify_scaling(seed, quick, rep.checks);
  if (want("decision")) detail::verify_decision(seed, quick, rep.checks);
  for (const VerifyCheck& c : rep.checks)
    if (!c.pass) rep.all_pass = false;
  return rep;
}

inline nlohmann::json verify_report_json(const std::string& selector,
                                         std::uint64_t seed, bool quick,
                                         const VerifyReport& rep) {
  nlohmann::json checks = nlohmann::json::array();
  for (const VerifyCheck& c : rep.checks)
    checks.push_back({{"suite", c.suite},
                      {"name", c.name},
                      {"observed", c.observed},
                      {"expected", c.expected},
                      {"tolerance", c.tolerance},
                      {"kind", c.kind},
                      {"pass", c.pass},
                      {"skipped", c.skipped}});
  return nlohmann::json{{"selector", selector},
                        {"seed", seed},
                        {"quick", quick},
                        {"all_pass", rep.all_pass},
                        {"checks", checks}};
}

}  // namespace dipesim::harness
