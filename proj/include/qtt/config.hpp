#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "qtt/grid.hpp"

namespace qtt {

enum class RunMode { run, oracle_grid, oracle_fock, validate };

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::run: return "run";
    case RunMode::oracle_grid: return "oracle-grid";
    case RunMode::oracle_fock: return "oracle-fock";
    case RunMode::validate: return "validate";
  }
  return "run";
}

// Full experiment description. Parsed from flat key = value lines plus
// [pump] / [signal] sections; unknown keys are rejected.
struct SimConfig {
  double alpha = 0.0;
  QuadratureGrid pump;
  QuadratureGrid signal;
  double delta_tau = 0.0;
  long long n_steps = 0;
  int chi_max = 30;
  double sv_cutoff = 1e-12;
  int max_sweeps = 8;
  double residual_tol = 1e-8;
  bool renormalize = true;
  long long observe_every = 1;
  int fock_cutoff_pump = 0;
  int fock_cutoff_signal = 0;
  int n_ref_bits = 25;
  std::string output_dir = "runs/out";
  long long checkpoint_every = 0;
  RunMode mode = RunMode::run;

  ModeLayout layout() const { return ModeLayout{pump, signal}; }

  void validate() const {
    if (alpha < 0.0) throw std::invalid_argument("config: alpha must be >= 0");
    pump.validate();
    signal.validate();
    if (delta_tau <= 0.0) throw std::invalid_argument("config: delta_tau must be > 0");
    if (n_steps < 0) throw std::invalid_argument("config: n_steps must be >= 0");
    if (chi_max < 1) throw std::invalid_argument("config: chi_max must be >= 1");
    if (sv_cutoff < 0.0 || sv_cutoff >= 1.0)
      throw std::invalid_argument("config: sv_cutoff must be in [0, 1)");
    if (max_sweeps < 1) throw std::invalid_argument("config: max_sweeps must be >= 1");
    if (residual_tol <= 0.0) throw std::invalid_argument("config: residual_tol must be > 0");
    if (observe_every < 1) throw std::invalid_argument("config: observe_every must be >= 1");
    if (fock_cutoff_pump < 0 || fock_cutoff_signal < 0)
      throw std::invalid_argument("config: fock cutoffs must be >= 0");
    if (n_ref_bits < 1) throw std::invalid_argument("config: n_ref_bits must be >= 1");
    if (checkpoint_every < 0) throw std::invalid_argument("config: checkpoint_every must be >= 0");
    if (output_dir.empty()) throw std::invalid_argument("config: output_dir must not be empty");
  }

  // Canonical text form; parse(serialize()) is the identity.
  std::string serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "alpha = " << alpha << "\n"
       << "delta_tau = " << delta_tau << "\n"
       << "n_steps = " << n_steps << "\n"
       << "chi_max = " << chi_max << "\n"
       << "sv_cutoff = " << sv_cutoff << "\n"
       << "max_sweeps = " << max_sweeps << "\n"
       << "residual_tol = " << residual_tol << "\n"
       << "renormalize = " << (renormalize ? "true" : "false") << "\n"
       << "observe_every = " << observe_every << "\n"
       << "fock_cutoff_pump = " << fock_cutoff_pump << "\n"
       << "fock_cutoff_signal = " << fock_cutoff_signal << "\n"
       << "n_ref_bits = " << n_ref_bits << "\n"
       << "output_dir = " << output_dir << "\n"
       << "checkpoint_every = " << checkpoint_every << "\n"
       << "mode = " << to_string(mode) << "\n\n"
       << "[pump]\n"
       << "x_min = " << pump.x_min << "\n"
       << "x_max = " << pump.x_max << "\n"
       << "bits = " << pump.n_bits << "\n\n"
       << "[signal]\n"
       << "x_min = " << signal.x_min << "\n"
       << "x_max = " << signal.x_max << "\n"
       << "bits = " << signal.n_bits << "\n";
    return os.str();
  }

  // Hash of the physics-relevant fields (output_dir and checkpoint cadence
  // excluded); checkpoints refuse to resume when it changes.
  uint64_t physics_hash() const {
    std::ostringstream os;
    os.precision(17);
    os << alpha << '|' << pump.x_min << '|' << pump.x_max << '|' << pump.n_bits << '|'
       << signal.x_min << '|' << signal.x_max << '|' << signal.n_bits << '|' << delta_tau << '|'
       << n_steps << '|' << chi_max << '|' << sv_cutoff << '|' << max_sweeps << '|'
       << residual_tol << '|' << renormalize << '|' << observe_every << '|' << n_ref_bits << '|'
       << static_cast<int>(mode);
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : os.str()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Parser {
  std::map<std::string, std::string> kv;  // fully-qualified key -> value
  std::map<std::string, int> lines;

  void ingest(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw std::invalid_argument("config line " + std::to_string(lineno) +
                                      ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section != "pump" && section != "signal")
          throw std::invalid_argument("config line " + std::to_string(lineno) +
                                      ": unknown section [" + section + "]");
        continue;
      }
      const size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key.empty() || val.empty())
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": empty key or value");
      const std::string full = section.empty() ? key : section + "." + key;
      if (kv.count(full))
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key " +
                                    full);
      kv[full] = val;
      lines[full] = lineno;
    }
  }

  std::optional<std::string> take(const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  }

  template <typename T>
  static T parse_number(const std::string& key, const std::string& text) {
    std::istringstream is(text);
    T v{};
    is >> v;
    if (is.fail() || !(is >> std::ws).eof())
      throw std::invalid_argument("config: bad numeric value for " + key + ": '" + text + "'");
    return v;
  }

  static bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw std::invalid_argument("config: bad boolean value for " + key + ": '" + text + "'");
  }
};

}  // namespace config_detail

inline SimConfig parse_config(const std::string& text) {
  config_detail::Parser p;
  p.ingest(text);
  SimConfig c;

  auto require = [&](const std::string& key) {
    auto v = p.take(key);
    if (!v) throw std::invalid_argument("config: missing required key '" + key + "'");
    return *v;
  };
  using P = config_detail::Parser;

  c.alpha = P::parse_number<double>("alpha", require("alpha"));
  c.delta_tau = P::parse_number<double>("delta_tau", require("delta_tau"));
  c.n_steps = P::parse_number<long long>("n_steps", require("n_steps"));
  c.pump.x_min = P::parse_number<double>("pump.x_min", require("pump.x_min"));
  c.pump.x_max = P::parse_number<double>("pump.x_max", require("pump.x_max"));
  c.pump.n_bits = P::parse_number<int>("pump.bits", require("pump.bits"));
  c.signal.x_min = P::parse_number<double>("signal.x_min", require("signal.x_min"));
  c.signal.x_max = P::parse_number<double>("signal.x_max", require("signal.x_max"));
  c.signal.n_bits = P::parse_number<int>("signal.bits", require("signal.bits"));

  if (auto v = p.take("chi_max")) c.chi_max = P::parse_number<int>("chi_max", *v);
  if (auto v = p.take("sv_cutoff")) c.sv_cutoff = P::parse_number<double>("sv_cutoff", *v);
  if (auto v = p.take("max_sweeps")) c.max_sweeps = P::parse_number<int>("max_sweeps", *v);
  if (auto v = p.take("residual_tol")) c.residual_tol = P::parse_number<double>("residual_tol", *v);
  if (auto v = p.take("renormalize")) c.renormalize = P::parse_bool("renormalize", *v);
  if (auto v = p.take("observe_every"))
    c.observe_every = P::parse_number<long long>("observe_every", *v);
  if (auto v = p.take("fock_cutoff_pump"))
    c.fock_cutoff_pump = P::parse_number<int>("fock_cutoff_pump", *v);
  if (auto v = p.take("fock_cutoff_signal"))
    c.fock_cutoff_signal = P::parse_number<int>("fock_cutoff_signal", *v);
  if (auto v = p.take("n_ref_bits")) c.n_ref_bits = P::parse_number<int>("n_ref_bits", *v);
  if (auto v = p.take("output_dir")) c.output_dir = *v;
  if (auto v = p.take("checkpoint_every"))
    c.checkpoint_every = P::parse_number<long long>("checkpoint_every", *v);
  if (auto v = p.take("mode")) {
    if (*v == "run") c.mode = RunMode::run;
    else if (*v == "oracle-grid") c.mode = RunMode::oracle_grid;
    else if (*v == "oracle-fock") c.mode = RunMode::oracle_fock;
    else if (*v == "validate") c.mode = RunMode::validate;
    else throw std::invalid_argument("config: unknown mode '" + *v + "'");
  }

  if (!p.kv.empty()) {
    const auto& bad = *p.kv.begin();
    throw std::invalid_argument("config line " + std::to_string(p.lines[bad.first]) +
                                ": unknown key '" + bad.first + "'");
  }
  c.validate();
  return c;
}

// Table-1 presets.
inline SimConfig preset_config(const std::string& name) {
  SimConfig c;
  if (name == "alpha10") {
    c.alpha = 10.0;
    c.pump = {-24.0, 24.0, 12};
    c.signal = {-10.0, 10.0, 13};
    c.delta_tau = 1e-4;
    c.n_steps = 3000;
    c.observe_every = 25;
    c.fock_cutoff_pump = 160;
    c.fock_cutoff_signal = 320;
    c.output_dir = "runs/alpha10";
    c.checkpoint_every = 250;
  } else if (name == "alpha100") {
    c.alpha = 100.0;
    c.pump = {-151.0, 151.0, 15};
    c.signal = {-10.0, 10.0, 15};
    c.delta_tau = 2e-5;
    c.n_steps = 2200;
    c.observe_every = 20;
    c.fock_cutoff_pump = 0;  // Fock baseline infeasible at this amplitude
    c.fock_cutoff_signal = 0;
    c.output_dir = "runs/alpha100";
    c.checkpoint_every = 200;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "' (expected alpha10 or alpha100)");
  }
  c.chi_max = 30;
  c.sv_cutoff = 1e-12;
  c.max_sweeps = 8;
  c.residual_tol = 1e-8;
  c.renormalize = true;
  c.n_ref_bits = 25;
  c.mode = RunMode::run;
  return c;
}

}  // namespace qtt
