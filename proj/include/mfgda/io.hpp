#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfgda/diagnostics.hpp"
#include "mfgda/measure.hpp"
#include "mfgda/particles.hpp"

namespace mfgda {

inline constexpr const char* kVersion = "0.1.0";

/// Shortest-exact decimal rendering of a double; round-trips bit-exactly and
/// never depends on locale, so repeated runs emit byte-identical files.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// FNV-1a 64-bit content hash, reported as fixed-width hex.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- GridMeasure: a CSV column of density values plus a JSON header ---------

inline std::string measure_csv(const GridMeasure& m) {
  std::string out = "density\n";
  for (double v : m.density) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

inline nlohmann::json grid_header(const TorusGrid& g) {
  nlohmann::json j;
  j["dim"] = g.dim;
  j["n"] = g.n;
  if (g.dim == 1)
    j["L"] = g.length[0];
  else
    j["L"] = {g.length[0], g.length[1]};
  return j;
}

inline TorusGrid grid_from_header(const nlohmann::json& j) {
  const int dim = j.at("dim").get<int>();
  const int n = j.at("n").get<int>();
  std::array<double, 2> L{kTwoPi, kTwoPi};
  if (j.at("L").is_array()) {
    auto arr = j.at("L");
    L[0] = arr.at(0).get<double>();
    L[1] = arr.size() > 1 ? arr.at(1).get<double>() : L[0];
  } else {
    L[0] = L[1] = j.at("L").get<double>();
  }
  return TorusGrid(dim, n, L);
}

/// Writes <base>.csv (density column) and <base>.json (grid header).
inline void write_measure(const std::filesystem::path& base, const GridMeasure& m) {
  write_file(base.string() + ".csv", measure_csv(m));
  write_file(base.string() + ".json", grid_header(m.grid).dump(2) + "\n");
}

inline GridMeasure read_measure(const std::filesystem::path& base) {
  const TorusGrid g = grid_from_header(nlohmann::json::parse(read_file(base.string() + ".json")));
  std::istringstream in(read_file(base.string() + ".csv"));
  std::string line;
  if (!std::getline(in, line) || line != "density")
    throw std::runtime_error("measure csv: bad header in " + base.string());
  std::vector<double> vals;
  vals.reserve(g.cells());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    vals.push_back(std::stod(line));
  }
  if (vals.size() != g.cells()) throw std::runtime_error("measure csv: cell count mismatch");
  return {g, std::move(vals)};
}

// --- diagnostics CSV ---------------------------------------------------------

inline constexpr const char* kDiagnosticsHeader =
    "t,tau,eta,E_tau,L1,L2,L3,L4,L,Ltilde,KL_mu_star,KL_nu_star,NI,fisher_mu,fisher_nu";

inline std::string diagnostics_csv(std::span<const DiagnosticsRecord> series) {
  std::string out = kDiagnosticsHeader;
  out += '\n';
  for (const DiagnosticsRecord& r : series) {
    const double cols[] = {r.t,  r.tau,        r.eta,        r.e_tau,     r.l1,
                           r.l2, r.l3,         r.l4,         r.lyap,      r.lyap_tilde,
                           r.kl_mu_star, r.kl_nu_star, r.ni, r.fisher_mu, r.fisher_nu};
    bool first = true;
    for (double c : cols) {
      if (!first) out += ',';
      out += format_double(c);
      first = false;
    }
    out += '\n';
  }
  return out;
}

/// Sandwich-inequality report over a trajectory: for each checkpoint, the
/// lower bound, the gap functional and the upper bound of both entropy
/// sandwiches, with the worst margin.
inline nlohmann::json sandwich_report_json(std::span<const DiagnosticsRecord> series) {
  nlohmann::json mu_rows = nlohmann::json::array();
  nlohmann::json nu_rows = nlohmann::json::array();
  for (const DiagnosticsRecord& r : series) {
    const double mu_lhs = r.tau * r.kl_mu_star, mu_rhs = r.tau * r.kl_mu_chain;
    const double nu_lhs = r.tau * r.kl_nu_star, nu_rhs = r.tau * r.kl_nu_chain;
    mu_rows.push_back({{"t", r.t},
                       {"lhs", mu_lhs},
                       {"mid", r.l1},
                       {"rhs", mu_rhs},
                       {"margin", std::min(r.l1 - mu_lhs, mu_rhs - r.l1)}});
    nu_rows.push_back({{"t", r.t},
                       {"lhs", nu_lhs},
                       {"mid", r.l3},
                       {"rhs", nu_rhs},
                       {"margin", std::min(r.l3 - nu_lhs, nu_rhs - r.l3)}});
  }
  return {{"mu", mu_rows}, {"nu", nu_rows}};
}

// --- particle ensemble CSV ----------------------------------------------------

inline std::string ensemble_csv(const ParticleEnsemble& e) {
  std::string out = "index";
  for (int a = 0; a < e.x_grid.dim; ++a) out += ",x" + std::to_string(a);
  for (int a = 0; a < e.y_grid.dim; ++a) out += ",y" + std::to_string(a);
  out += '\n';
  for (std::size_t i = 0; i < e.size(); ++i) {
    out += std::to_string(i);
    for (int a = 0; a < e.x_grid.dim; ++a) {
      out += ',';
      out += format_double(e.xs[i][a]);
    }
    for (int a = 0; a < e.y_grid.dim; ++a) {
      out += ',';
      out += format_double(e.ys[i][a]);
    }
    out += '\n';
  }
  return out;
}

// --- output manifest -----------------------------------------------------------

/// Every output directory carries a manifest echoing the full configuration,
/// the seeds, and a content hash per emitted file; re-running the same config
/// must reproduce identical hashes.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& path() const { return dir_; }

  void emit(const std::string& name, std::string_view content) {
    write_file(dir_ / name, content);
    hashes_[name] = fnv1a_hex(content);
  }

  void emit_measure(const std::string& base, const GridMeasure& m) {
    emit(base + ".csv", measure_csv(m));
    emit(base + ".json", grid_header(m.grid).dump(2) + "\n");
  }

  void finalize(const nlohmann::json& config_echo, const nlohmann::json& extra = {}) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["config"] = config_echo;
    j["config_hash"] = fnv1a_hex(config_echo.dump());
    j["files"] = hashes_;
    if (!extra.is_null() && !extra.empty()) j["run"] = extra;
    write_file(dir_ / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> hashes_;
};

}  // namespace mfgda
