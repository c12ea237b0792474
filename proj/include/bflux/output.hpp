/// @file output.hpp
/// @brief CSV emission, the calibrated-constants table and the run manifest.
///
/// Numbers are written with 17 significant digits so files round-trip and
/// identical runs produce identical bytes.

#pragma once

#include <bflux/asymptotics.hpp>
#include <bflux/cascade.hpp>
#include <bflux/error.hpp>
#include <bflux/integrator.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace bflux {

/// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

[[nodiscard]] inline std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

[[nodiscard]] inline std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex(fnv1a(ss.str()));
}

/// Output stream that throws ConfigError when the file cannot be opened.
class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& header) : out_(path) {
    if (!out_) throw ConfigError("cannot write '" + path.string() + "'");
    out_ << std::setprecision(17) << header << '\n';
  }

  template <typename... Ts>
  void row(const Ts&... cols) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cols, first = false), ...);
    out_ << '\n';
  }

  std::ostream& stream() { return out_; }

 private:
  std::ofstream out_;
};

inline void write_norms_csv(const std::filesystem::path& path, const Trajectory& tr) {
  CsvFile csv(path, "t,sigma,norm");
  for (const auto& ns : tr.norm_series)
    for (std::size_t j = 0; j < ns.values.size(); ++j) csv.row(tr.times[j], ns.sigma, ns.values[j]);
}

inline void write_energy_csv(const std::filesystem::path& path, const Trajectory& tr,
                             std::span<const EnergyConstants> constants) {
  CsvFile csv(path, "t,sigma,residual,bound_B");
  for (const auto& k : constants)
    for (const auto& e : tr.energy_series)
      if (e.sigma == k.sigma) csv.row(e.t, e.sigma, e.residual(k.A, k.B), k.B);
}

inline void write_snapshots_csv(const std::filesystem::path& path, const Trajectory& tr) {
  const std::size_t n = tr.final_state().size();
  std::string header;
  for (std::size_t i = 0; i < n; ++i) header += (i ? ",x_" : "x_") + std::to_string(i);
  CsvFile csv(path, header);
  auto& os = csv.stream();
  for (const auto& s : tr.snapshots) {
    for (std::size_t i = 0; i < n; ++i) os << (i ? "," : "") << s[i];
    os << '\n';
  }
}

inline void write_cascade_csv(const std::filesystem::path& path, const CascadeResult& res) {
  CsvFile csv(path, "K_low,K_high,sigma,gap");
  for (const auto& g : res.cauchy_gaps) csv.row(g.K_low, g.K_high, g.sigma, g.gap);
}

inline void write_equilibria_csv(const std::filesystem::path& path, const ExtremalPair& pair,
                                 std::span<const Equilibrium> found) {
  std::string header = "x,phi_min,phi_max";
  for (std::size_t k = 0; k < found.size(); ++k) header += ",newton_" + std::to_string(k);
  CsvFile csv(path, header);
  auto& os = csv.stream();
  const Field& lo = pair.phi_min.field;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    os << lo.mesh().node(i) << ',' << lo[i] << ',' << pair.phi_max.field[i];
    for (const auto& e : found) os << ',' << e.field[i];
    os << '\n';
  }
}

/// Calibrated constants keyed by (preset, sigma).
class ConstantsTable {
 public:
  struct Row {
    double A{}, B{}, beta{}, gamma{}, trace_C{};
  };

  void put(const std::string& preset, double sigma, Row row) { rows_[{preset, sigma}] = row; }

  [[nodiscard]] const Row& at(const std::string& preset, double sigma) const {
    const auto it = rows_.find({preset, sigma});
    if (it == rows_.end()) {
      std::ostringstream os;
      os << "no calibrated constants for (" << preset << ", sigma = " << sigma << ")";
      throw ConfigError(os.str());
    }
    return it->second;
  }

  [[nodiscard]] bool empty() const { return rows_.empty(); }

  void save(const std::filesystem::path& path) const {
    CsvFile csv(path, "preset,sigma,A,B,beta,gamma,trace_C");
    for (const auto& [key, r] : rows_)
      csv.row(key.first, key.second, r.A, r.B, r.beta, r.gamma, r.trace_C);
  }

  /// Missing file gives an empty table; malformed rows are a ConfigError.
  [[nodiscard]] static ConstantsTable load(const std::filesystem::path& path) {
    ConstantsTable t;
    std::ifstream in(path);
    if (!in) return t;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string preset, cell;
      std::getline(ss, preset, ',');
      double v[6];
      for (double& x : v) {
        if (!std::getline(ss, cell, ',')) throw ConfigError("malformed constants row: " + line);
        try {
          x = std::stod(cell);
        } catch (const std::exception&) {
          throw ConfigError("malformed constants row: " + line);
        }
      }
      t.put(preset, v[0], {v[1], v[2], v[3], v[4], v[5]});
    }
    return t;
  }

 private:
  std::map<std::pair<std::string, double>, Row> rows_;
};

struct CheckResult {
  std::string name;
  std::string property;  // the mathematical statement the check tests
  bool passed{};
  double value{};
  double tolerance{};
  std::string detail;
};

struct RunManifest {
  std::string preset;
  std::string config_hash;
  std::string constants_hash;
  std::vector<CheckResult> checks;
  std::vector<std::pair<std::string, double>> wall_times;
  bool unexpected_blowup{false};

  void add(CheckResult c) { checks.push_back(std::move(c)); }

  [[nodiscard]] bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  /// 0 all checks pass, 2 a check failed, 3 blow-up in a dissipative preset.
  [[nodiscard]] int exit_code() const {
    if (unexpected_blowup) return 3;
    return all_passed() ? 0 : 2;
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["preset"] = preset;
    j["config_hash"] = config_hash;
    j["constants_hash"] = constants_hash;
    j["exit_code"] = exit_code();
    auto& arr = j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
      nlohmann::ordered_json e;
      e["name"] = c.name;
      e["passed"] = c.passed;
      e["value"] = c.value;
      e["tolerance"] = c.tolerance;
      if (!c.passed) e["property"] = c.property;
      if (!c.detail.empty()) e["detail"] = c.detail;
      arr.push_back(std::move(e));
    }
    auto& wt = j["wall_times_s"] = nlohmann::ordered_json::object();
    for (const auto& [stage, s] : wall_times) wt[stage] = s;
    return j;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace bflux
