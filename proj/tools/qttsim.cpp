// Command-line driver: run | report | validate | preset.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qtt/config.hpp"
#include "qtt/evolve.hpp"
#include "qtt/io.hpp"
#include "qtt/oracles.hpp"
#include "qtt/validate.hpp"

namespace fs = std::filesystem;
using namespace qtt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSolverBreakdown = 1;
constexpr int kExitConfigError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string resolve_output_dir(const SimConfig& cfg) {
  const char* root = std::getenv("QTTSIM_OUTPUT_ROOT");
  fs::path dir(cfg.output_dir);
  if (root && *root && dir.is_relative()) dir = fs::path(root) / dir;
  return dir.string();
}

void write_manifest(const std::string& dir, const SimConfig& cfg, double wall_seconds,
                    const std::string& status) {
  std::ofstream man(dir + "/manifest.txt", std::ios::trunc);
  man << "qttsim version: 1.0\n"
      << "checkpoint format: QTTS v" << kCheckpointVersion << "\n"
      << "config hash: " << cfg.physics_hash() << "\n"
      << "status: " << status << "\n"
      << "wall clock seconds: " << wall_seconds << "\n";
}

int cmd_run(const std::string& config_path) {
  SimConfig cfg = parse_config(read_file(config_path));
  const std::string dir = resolve_output_dir(cfg);
  DirectoryLock lock(dir);
  {
    std::ofstream echo(dir + "/config.txt", std::ios::trunc);
    echo << cfg.serialize();
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const std::string csv_path = dir + "/trajectory.csv";
  const std::string ckpt_path = dir + "/checkpoint.qtts";

  EvolutionConfig ecfg;
  ecfg.delta_tau = cfg.delta_tau;
  ecfg.n_steps = cfg.n_steps;
  ecfg.renormalize_each_step = cfg.renormalize;
  ecfg.observe_every = cfg.observe_every;
  ecfg.n_ref_bits = cfg.n_ref_bits;

  if (cfg.mode == RunMode::oracle_grid) {
    auto records = dense_grid_evolve(cfg.layout(), cfg.alpha, ecfg);
    write_trajectory_csv(csv_path, records);
    write_manifest(dir, cfg, wall(), "completed");
    std::cout << "oracle-grid trajectory written to " << csv_path << "\n";
    return kExitOk;
  }
  if (cfg.mode == RunMode::oracle_fock) {
    if (cfg.fock_cutoff_pump < 2 || cfg.fock_cutoff_signal < 3)
      throw std::invalid_argument("oracle-fock mode needs fock_cutoff_pump/signal");
    auto traj = fock_evolve(cfg.alpha, cfg.fock_cutoff_pump, cfg.fock_cutoff_signal, ecfg);
    write_trajectory_csv(csv_path, traj.records);
    write_manifest(dir, cfg, wall(), traj.cutoff_warning ? "completed (cutoff warning)" : "completed");
    if (traj.cutoff_warning)
      std::cerr << "warning: Fock cutoff saturated (top-level occupation > 1e-6)\n";
    std::cout << "oracle-fock trajectory written to " << csv_path << "\n";
    return kExitOk;
  }
  if (cfg.mode == RunMode::validate) {
    const bool ok = run_desk_validation(cfg).pass();
    write_manifest(dir, cfg, wall(), ok ? "validate pass" : "validate fail");
    return ok ? kExitOk : kExitSolverBreakdown;
  }

  // mode = run
  SystemOperators ops = build_system_operators(cfg.layout(), cfg.delta_tau);
  SolverConfig scfg;
  scfg.max_sweeps = cfg.max_sweeps;
  scfg.rel_residual_tol = cfg.residual_tol;
  scfg.truncation = TruncationPolicy{cfg.chi_max, cfg.sv_cutoff};

  const TruncationPolicy encode_policy{cfg.chi_max, cfg.sv_cutoff};
  Mps psi;
  long long start_step = 0;
  std::vector<TrajectoryRecord> records;
  if (fs::exists(ckpt_path)) {
    Checkpoint cp = read_checkpoint(ckpt_path);
    if (cp.config_hash != cfg.physics_hash()) {
      std::cerr << "error: checkpoint in " << dir << " belongs to a different configuration; "
                << "refusing to resume\n";
      return kExitConfigError;
    }
    psi = std::move(cp.state);
    start_step = static_cast<long long>(cp.step);
    if (fs::exists(csv_path)) {
      for (const auto& r : read_trajectory_csv(csv_path))
        if (r.step <= start_step) records.push_back(r);
    }
    std::cout << "resuming from checkpoint at step " << start_step << "\n";
  } else {
    psi = initial_system_state(cfg.layout(), cfg.alpha, encode_policy);
  }

  auto persist_csv = [&] { write_trajectory_csv(csv_path, records); };
  StepObserver observer = [&](const TrajectoryRecord& r, const Mps&, const StepReport&) {
    records.push_back(r);
    persist_csv();
    std::cout << "step " << r.step << " tau " << r.tau << " n_pump " << r.n_pump << " n_signal "
              << r.n_signal << " bond " << r.max_bond << " residual " << r.residual_normalized
              << std::endl;
  };
  StepHook hook;
  if (cfg.checkpoint_every > 0) {
    hook = [&](long long step, const Mps& state) {
      if (step % cfg.checkpoint_every == 0)
        write_checkpoint(ckpt_path, state, cfg.physics_hash(), static_cast<uint64_t>(step));
    };
  }

  EvolutionResult res = evolve(psi, ops, ecfg, scfg, observer, start_step, hook);
  if (!res.completed) {
    write_checkpoint(ckpt_path, res.final_state, cfg.physics_hash(),
                     static_cast<uint64_t>(start_step));
    write_manifest(dir, cfg, wall(), "solver breakdown: " + res.error);
    std::cerr << "solver breakdown: " << res.error << " (partial trajectory retained)\n";
    return kExitSolverBreakdown;
  }
  write_checkpoint(ckpt_path, res.final_state, cfg.physics_hash(),
                   static_cast<uint64_t>(cfg.n_steps));
  write_manifest(dir, cfg, wall(), "completed");
  std::cout << "trajectory written to " << csv_path << "\n";
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& paths) {
  for (const auto& path : paths) {
    auto records = read_trajectory_csv(path);
    if (records.empty()) {
      std::cout << path << ": empty trajectory\n";
      continue;
    }
    const double e0 = records.front().energy;
    const double np0 = records.front().n_pump;
    double max_drift = 0.0, max_depletion = 0.0, min_var = records.front().var_x_signal;
    double min_var_tau = records.front().tau, max_resid = 0.0;
    double min_ic = std::numeric_limits<double>::infinity(), max_ic = 0.0;
    long long peak_bond = 0;
    for (const auto& r : records) {
      max_drift = std::max(max_drift, std::abs(r.energy - e0) / std::max(1e-300, std::abs(e0)));
      if (np0 > 0.0) max_depletion = std::max(max_depletion, 1.0 - r.n_pump / np0);
      if (r.var_x_signal < min_var) {
        min_var = r.var_x_signal;
        min_var_tau = r.tau;
      }
      peak_bond = std::max(peak_bond, r.max_bond);
      if (r.inverse_compression >= 0.0) {
        min_ic = std::min(min_ic, r.inverse_compression);
        max_ic = std::max(max_ic, r.inverse_compression);
      }
      max_resid = std::max(max_resid, r.residual_normalized);
    }
    std::cout << path << ":\n"
              << "  records                  " << records.size() << " (tau up to "
              << records.back().tau << ")\n"
              << "  max energy drift         " << max_drift << "\n"
              << "  max pump depletion       " << max_depletion << "\n"
              << "  min var_x_signal         " << min_var << " at tau " << min_var_tau << "\n"
              << "  peak max_bond            " << peak_bond << "\n";
    if (max_ic > 0.0)
      std::cout << "  inverse compression      min " << min_ic << ", max " << max_ic << "\n";
    std::cout << "  max normalized residual  " << max_resid << "\n";
  }
  return kExitOk;
}

int cmd_validate(const std::string& config_path) {
  SimConfig cfg = parse_config(read_file(config_path));
  return run_desk_validation(cfg).pass() ? kExitOk : kExitSolverBreakdown;
}

int cmd_preset(const std::string& name) {
  std::cout << preset_config(name).serialize();
  return kExitOk;
}

void usage() {
  std::cerr << "usage: qttsim run <config>\n"
            << "       qttsim report <trajectory.csv...>\n"
            << "       qttsim validate <config>\n"
            << "       qttsim preset <alpha10|alpha100>\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) {
    usage();
    return kExitConfigError;
  }
  try {
    const std::string& cmd = args[0];
    if (cmd == "run" && args.size() == 2) return cmd_run(args[1]);
    if (cmd == "report" && args.size() >= 2)
      return cmd_report({args.begin() + 1, args.end()});
    if (cmd == "validate" && args.size() == 2) return cmd_validate(args[1]);
    if (cmd == "preset" && args.size() == 2) return cmd_preset(args[1]);
    usage();
    return kExitConfigError;
  } catch (const solver_breakdown_error& e) {
    std::cerr << "solver breakdown: " << e.what() << "\n";
    return kExitSolverBreakdown;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}
