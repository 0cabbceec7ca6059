#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <unistd.h>
#include <vector>

#include "qtt/config.hpp"
#include "qtt/mps.hpp"
#include "qtt/observables.hpp"

namespace qtt {

inline constexpr const char* kCsvHeader =
    "step,tau,n_pump,n_signal,energy,var_x_signal,max_bond,param_count,"
    "inverse_compression,residual_raw,residual_normalized,norm_drift";

namespace io_detail {

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace io_detail

inline std::string csv_row(const TrajectoryRecord& r) {
  using io_detail::format_double;
  std::string out;
  out += std::to_string(r.step);
  out += ',';
  out += format_double(r.tau);
  out += ',';
  out += format_double(r.n_pump);
  out += ',';
  out += format_double(r.n_signal);
  out += ',';
  out += format_double(r.energy);
  out += ',';
  out += format_double(r.var_x_signal);
  out += ',';
  out += std::to_string(r.max_bond);
  out += ',';
  out += std::to_string(r.param_count);
  out += ',';
  out += format_double(r.inverse_compression);
  out += ',';
  out += format_double(r.residual_raw);
  out += ',';
  out += format_double(r.residual_normalized);
  out += ',';
  out += format_double(r.norm_drift);
  return out;
}

inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<TrajectoryRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << kCsvHeader << '\n';
  for (const auto& r : records) out << csv_row(r) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<TrajectoryRecord> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  if (line != kCsvHeader) throw std::runtime_error("unexpected CSV header in " + path);
  std::vector<TrajectoryRecord> records;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    size_t pos = 0;
    while (true) {
      size_t c = line.find(',', pos);
      f.push_back(line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
      if (c == std::string::npos) break;
      pos = c + 1;
    }
    if (f.size() != 12)
      throw std::runtime_error(path + " line " + std::to_string(lineno) + ": malformed row");
    auto num = [&](const std::string& s) {
      double v{};
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size())
        throw std::runtime_error(path + " line " + std::to_string(lineno) + ": bad number '" + s +
                                 "'");
      return v;
    };
    TrajectoryRecord r;
    r.step = static_cast<long long>(num(f[0]));
    r.tau = num(f[1]);
    r.n_pump = num(f[2]);
    r.n_signal = num(f[3]);
    r.energy = num(f[4]);
    r.var_x_signal = num(f[5]);
    r.max_bond = static_cast<long long>(num(f[6]));
    r.param_count = static_cast<long long>(num(f[7]));
    r.inverse_compression = num(f[8]);
    r.residual_raw = num(f[9]);
    r.residual_normalized = num(f[10]);
    r.norm_drift = num(f[11]);
    records.push_back(r);
  }
  return records;
}

// Checkpoint format (little-endian): "QTTS" | u32 version | u64 config hash |
// u64 step | u32 n_sites | per site { u32 r_left, u32 phys(=2), u32 r_right,
// complex<double> data in (left, physical, right) index order }.
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Mps state;
  uint64_t config_hash = 0;
  uint64_t step = 0;
};

namespace io_detail {

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace io_detail

inline void write_checkpoint(const std::string& path, const Mps& psi, uint64_t config_hash,
                             uint64_t step) {
  namespace fs = std::filesystem;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out.write("QTTS", 4);
    io_detail::put(out, kCheckpointVersion);
    io_detail::put(out, config_hash);
    io_detail::put(out, step);
    io_detail::put(out, static_cast<uint32_t>(psi.n_sites()));
    for (const auto& s : psi.sites) {
      io_detail::put(out, static_cast<uint32_t>(s.left()));
      io_detail::put(out, static_cast<uint32_t>(2));
      io_detail::put(out, static_cast<uint32_t>(s.right()));
      for (Eigen::Index l = 0; l < s.left(); ++l)
        for (int p = 0; p < 2; ++p)
          for (Eigen::Index r = 0; r < s.right(); ++r) {
            const cxd v = s.a[p](l, r);
            io_detail::put(out, std::real(v));
            io_detail::put(out, std::imag(v));
          }
    }
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "QTTS")
    throw std::runtime_error("checkpoint: bad magic in " + path);
  Checkpoint cp;
  const uint32_t version = io_detail::get<uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  cp.config_hash = io_detail::get<uint64_t>(in);
  cp.step = io_detail::get<uint64_t>(in);
  const uint32_t n = io_detail::get<uint32_t>(in);
  cp.state.sites.resize(n);
  for (uint32_t j = 0; j < n; ++j) {
    const uint32_t rl = io_detail::get<uint32_t>(in);
    const uint32_t phys = io_detail::get<uint32_t>(in);
    const uint32_t rr = io_detail::get<uint32_t>(in);
    if (phys != 2) throw std::runtime_error("checkpoint: physical dimension must be 2");
    for (int p = 0; p < 2; ++p) cp.state.sites[j].a[p].resize(rl, rr);
    for (uint32_t l = 0; l < rl; ++l)
      for (int p = 0; p < 2; ++p)
        for (uint32_t r = 0; r < rr; ++r) {
          const double re = io_detail::get<double>(in);
          const double im = io_detail::get<double>(in);
          cp.state.sites[j].a[p](l, r) = cxd(re, im);
        }
  }
  cp.state.check_consistent();
  return cp;
}

// One writer per run directory; the lock file holds the owning pid and is
// treated as stale when that process is gone.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::string& dir) : path_(dir + "/.lock") {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    if (fs::exists(path_)) {
      std::ifstream in(path_);
      long pid = 0;
      in >> pid;
      if (pid > 0 && fs::exists("/proc/" + std::to_string(pid)))
        throw std::runtime_error("run directory locked by pid " + std::to_string(pid) + ": " + dir);
      fs::remove(path_);  // stale
    }
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot create lock file: " + path_);
    out << ::getpid() << '\n';
    held_ = true;
  }
  ~DirectoryLock() {
    if (held_) {
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::string path_;
  bool held_ = false;
};

}  // namespace qtt
