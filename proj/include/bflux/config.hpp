/// @file config.hpp
/// @brief INI experiment configuration, `section.key=value` overrides,
/// data-spec parsing and pre-run validation.

#pragma once

#include <bflux/data.hpp>
#include <bflux/error.hpp>
#include <bflux/grid.hpp>
#include <bflux/nonlinearity.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace bflux {

namespace pt = boost::property_tree;

enum class Preset { Smoothing, Dichotomy, Cascade, Equilibria, Calibrate };

[[nodiscard]] inline const char* to_string(Preset p) {
  switch (p) {
    case Preset::Smoothing: return "smoothing";
    case Preset::Dichotomy: return "dichotomy";
    case Preset::Cascade: return "cascade";
    case Preset::Equilibria: return "equilibria";
    case Preset::Calibrate: return "calibrate";
  }
  return "?";
}

[[nodiscard]] inline Preset parse_preset(const std::string& s) {
  for (Preset p : {Preset::Smoothing, Preset::Dichotomy, Preset::Cascade, Preset::Equilibria,
                   Preset::Calibrate})
    if (s == to_string(p)) return p;
  throw ConfigError("unknown preset '" + s + "'");
}

/// Initial datum description, e.g. "flat:5", "random:10:7", "random:3:2:pos",
/// "singular:0.4", "singular:0.45:1:0.3" (exponent, scale, center).
struct DataSpec {
  std::string text;

  [[nodiscard]] Field build(Mesh1D mesh) const {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    auto num = [&](std::size_t i, double fallback) {
      if (i >= parts.size()) return fallback;
      char* end = nullptr;
      const double v = std::strtod(parts[i].c_str(), &end);
      if (end == parts[i].c_str() || *end != '\0')
        throw ConfigError("bad number '" + parts[i] + "' in data spec '" + text + "'");
      return v;
    };
    if (parts.empty()) throw ConfigError("empty data spec");
    const std::string& kind = parts[0];
    if (kind == "flat" && parts.size() == 2) return data::flat(mesh, num(1, 0.0));
    if (kind == "random" && parts.size() >= 3 && parts.size() <= 4) {
      const bool positive = parts.size() == 4 && parts[3] == "pos";
      if (parts.size() == 4 && !positive) throw ConfigError("bad data spec '" + text + "'");
      return data::random_smooth(mesh, num(1, 1.0), static_cast<unsigned long long>(num(2, 0.0)),
                                 positive);
    }
    if (kind == "singular" && parts.size() >= 2 && parts.size() <= 4)
      return data::singular(mesh, num(1, 0.0), num(2, 1.0), num(3, -1.0));
    throw ConfigError("bad data spec '" + text + "'");
  }
};

struct ExperimentConfig {
  Preset preset{Preset::Smoothing};
  std::string output_dir{"out"};
  std::string constants_file{"constants.csv"};
  std::vector<unsigned long long> seeds{1, 2, 3};

  std::size_t n{257};
  double length{1.0};
  PowerNonlinearity f{1.0, 3.0, 0.0, 0.0};
  PowerNonlinearity g{1.0, 1.5, 0.0, 0.0};

  double dt{1e-3};
  double T{1.0};
  double epsilon{0.1};
  int save_every{1};
  double growth_rate{0.0};

  double r{2.0};
  std::vector<double> sigma_list;  // empty: {r, 2r, 4r}

  std::vector<DataSpec> data;              // run / hold-out suite
  std::vector<DataSpec> calibration_data;  // calibration suite

  struct {
    double t_lo{1e-3};
    double energy_tol{1e-3};
    double decay_lo{0.0};  // decay fit window; disabled when decay_hi <= decay_lo
    double decay_hi{0.0};
    double decay_tol{0.15};
  } smoothing;

  struct {
    std::vector<double> k_schedule;  // empty: default schedule from g and the datum
    double alpha{1.5};
    double interior_fraction{0.5};
    int continuity_j_lo{3};
    int continuity_j_hi{10};
    int gronwall_pairs{0};
    double gronwall_K{4.0};
  } cascade;

  struct {
    std::vector<double> p_list{2.5, 3.0, 4.0};
    std::vector<double> q_list{1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6};
    double level{10.0};
    double confirm_p{0.0};  // disabled when 0
    double confirm_q{0.0};
    std::vector<double> dt_schedule{1e-3, 2.5e-4, 6.25e-5};
  } dichotomy;

  struct {
    double M{0.0};  // 0: twice the absorbing level
    double T_max{100.0};
    double settle_tol{1e-8};
    std::size_t refine_n{0};
    std::vector<double> guesses;
    std::vector<double> absorbing_levels{1.0, 10.0, 100.0, 1000.0, 10000.0};
    double absorbing_factor{2.0};
  } equilibria;

  struct {
    double safety{2.0};
    std::string target{"smoothing"};
  } calibrate;

  [[nodiscard]] Mesh1D mesh() const { return Mesh1D(n, length); }
  [[nodiscard]] std::vector<double> sigmas() const {
    return sigma_list.empty() ? std::vector<double>{r, 2.0 * r, 4.0 * r} : sigma_list;
  }
};

namespace detail {

inline constexpr auto kKnownKeys = std::to_array<std::string_view>({
    "experiment.preset",        "experiment.output_dir",     "experiment.constants_file",
    "experiment.seeds",         "mesh.n",                    "mesh.length",
    "f.c",                      "f.p",                       "f.d",
    "f.e",                      "g.c",                       "g.q",
    "g.d",                      "g.e",                       "time.dt",
    "time.T",                   "time.epsilon",              "time.save_every",
    "time.growth_rate",         "norms.r",                   "norms.sigma_list",
    "data.suite",               "calibration.suite",         "calibration.safety",
    "calibration.target",       "smoothing.t_lo",            "smoothing.energy_tol",
    "smoothing.decay_lo",       "smoothing.decay_hi",        "smoothing.decay_tol",
    "cascade.k_schedule",       "cascade.alpha",             "cascade.interior_fraction",
    "cascade.continuity_j_lo",  "cascade.continuity_j_hi",   "cascade.gronwall_pairs",
    "cascade.gronwall_K",       "dichotomy.p_list",          "dichotomy.q_list",
    "dichotomy.level",          "dichotomy.confirm_p",       "dichotomy.confirm_q",
    "dichotomy.dt_schedule",    "equilibria.M",              "equilibria.T_max",
    "equilibria.settle_tol",    "equilibria.refine_n",       "equilibria.guesses",
    "equilibria.absorbing_levels", "equilibria.absorbing_factor"});

inline bool known_key(std::string_view k) {
  return std::find(kKnownKeys.begin(), kKnownKeys.end(), k) != kKnownKeys.end();
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <typename T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  const auto node = tree.get_child_optional(key);
  if (!node) return fallback;
  const auto v = node->get_value_optional<T>();
  if (!v) throw ConfigError("bad value for '" + key + "': '" + node->data() + "'");
  return *v;
}

template <typename T>
std::vector<T> get_list(const pt::ptree& tree, const std::string& key, std::vector<T> fallback) {
  const auto raw = tree.get_optional<std::string>(key);
  if (!raw) return fallback;
  std::vector<T> out;
  for (const auto& item : split_list(*raw)) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw ConfigError("bad list entry '" + item + "' for '" + key + "'");
    out.push_back(v);
  }
  return out;
}

inline std::vector<DataSpec> get_data(const pt::ptree& tree, const std::string& key) {
  std::vector<DataSpec> out;
  if (const auto raw = tree.get_optional<std::string>(key))
    for (auto& s : split_list(*raw)) out.push_back({std::move(s)});
  return out;
}

}  // namespace detail

/// Reads an INI file into a property tree; IO and syntax errors become ConfigError.
[[nodiscard]] inline pt::ptree read_config_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return tree;
}

/// Applies one `section.key=value` override.
inline void apply_override(pt::ptree& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  tree.put(assignment.substr(0, eq), assignment.substr(eq + 1));
}

/// Canonical text of the tree (sorted sections and keys) used for hashing.
[[nodiscard]] inline std::string canonical_text(const pt::ptree& tree) {
  std::vector<std::string> lines;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      lines.push_back(section + "=" + body.data());
      continue;
    }
    for (const auto& [key, value] : body) lines.push_back(section + "." + key + "=" + value.data());
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

[[nodiscard]] inline ExperimentConfig parse_config(const pt::ptree& tree) {
  using detail::get;
  using detail::get_list;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' must live inside a section");
    for (const auto& kv : body)
      if (!detail::known_key(section + "." + kv.first))
        throw ConfigError("unknown key '" + section + "." + kv.first + "'");
  }
  ExperimentConfig c;
  c.preset = parse_preset(get<std::string>(tree, "experiment.preset", to_string(c.preset)));
  c.output_dir = get(tree, "experiment.output_dir", c.output_dir);
  c.constants_file = get(tree, "experiment.constants_file", c.constants_file);
  c.seeds = get_list(tree, "experiment.seeds", c.seeds);
  c.n = get(tree, "mesh.n", c.n);
  c.length = get(tree, "mesh.length", c.length);
  c.f = {get(tree, "f.c", c.f.c), get(tree, "f.p", c.f.p), get(tree, "f.d", c.f.d),
         get(tree, "f.e", c.f.e)};
  c.g = {get(tree, "g.c", c.g.c), get(tree, "g.q", c.g.p), get(tree, "g.d", c.g.d),
         get(tree, "g.e", c.g.e)};
  c.dt = get(tree, "time.dt", c.dt);
  c.T = get(tree, "time.T", c.T);
  c.epsilon = get(tree, "time.epsilon", c.epsilon);
  c.save_every = get(tree, "time.save_every", c.save_every);
  c.growth_rate = get(tree, "time.growth_rate", c.growth_rate);
  c.r = get(tree, "norms.r", c.r);
  c.sigma_list = get_list(tree, "norms.sigma_list", c.sigma_list);
  c.data = detail::get_data(tree, "data.suite");
  c.calibration_data = detail::get_data(tree, "calibration.suite");
  c.calibrate.safety = get(tree, "calibration.safety", c.calibrate.safety);
  c.calibrate.target = get(tree, "calibration.target", c.calibrate.target);

  auto& s = c.smoothing;
  s.t_lo = get(tree, "smoothing.t_lo", s.t_lo);
  s.energy_tol = get(tree, "smoothing.energy_tol", s.energy_tol);
  s.decay_lo = get(tree, "smoothing.decay_lo", s.decay_lo);
  s.decay_hi = get(tree, "smoothing.decay_hi", s.decay_hi);
  s.decay_tol = get(tree, "smoothing.decay_tol", s.decay_tol);

  auto& k = c.cascade;
  k.k_schedule = get_list(tree, "cascade.k_schedule", k.k_schedule);
  k.alpha = get(tree, "cascade.alpha", k.alpha);
  k.interior_fraction = get(tree, "cascade.interior_fraction", k.interior_fraction);
  k.continuity_j_lo = get(tree, "cascade.continuity_j_lo", k.continuity_j_lo);
  k.continuity_j_hi = get(tree, "cascade.continuity_j_hi", k.continuity_j_hi);
  k.gronwall_pairs = get(tree, "cascade.gronwall_pairs", k.gronwall_pairs);
  k.gronwall_K = get(tree, "cascade.gronwall_K", k.gronwall_K);

  auto& d = c.dichotomy;
  d.p_list = get_list(tree, "dichotomy.p_list", d.p_list);
  d.q_list = get_list(tree, "dichotomy.q_list", d.q_list);
  d.level = get(tree, "dichotomy.level", d.level);
  d.confirm_p = get(tree, "dichotomy.confirm_p", d.confirm_p);
  d.confirm_q = get(tree, "dichotomy.confirm_q", d.confirm_q);
  d.dt_schedule = get_list(tree, "dichotomy.dt_schedule", d.dt_schedule);

  auto& e = c.equilibria;
  e.M = get(tree, "equilibria.M", e.M);
  e.T_max = get(tree, "equilibria.T_max", e.T_max);
  e.settle_tol = get(tree, "equilibria.settle_tol", e.settle_tol);
  e.refine_n = get(tree, "equilibria.refine_n", e.refine_n);
  e.guesses = get_list(tree, "equilibria.guesses", e.guesses);
  e.absorbing_levels = get_list(tree, "equilibria.absorbing_levels", e.absorbing_levels);
  e.absorbing_factor = get(tree, "equilibria.absorbing_factor", e.absorbing_factor);
  return c;
}

/// Reads `path`, applies overrides in order, then BFLUX_OUT.
[[nodiscard]] inline ExperimentConfig load_config(const std::string& path,
                                                  const std::vector<std::string>& overrides,
                                                  pt::ptree* tree_out = nullptr) {
  pt::ptree tree = read_config_tree(path);
  for (const auto& o : overrides) apply_override(tree, o);
  if (const char* out = std::getenv("BFLUX_OUT"); out && *out)
    tree.put("experiment.output_dir", out);
  ExperimentConfig cfg = parse_config(tree);
  if (tree_out) *tree_out = std::move(tree);
  return cfg;
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

/// Empty iff the configuration is runnable.
[[nodiscard]] inline std::vector<std::string> validate(const ExperimentConfig& c) {
  using detail::fmt;
  std::vector<std::string> v;
  if (c.n < 3) v.push_back("mesh.n = " + std::to_string(c.n) + " < 3");
  if (!(c.length > 0.0)) v.push_back("mesh.length must be positive");
  if (!(c.dt > 0.0)) v.push_back("time.dt must be positive");
  if (!(c.T > 0.0)) v.push_back("time.T must be positive");
  if (c.save_every < 1) v.push_back("time.save_every must be >= 1");
  if (c.growth_rate < 0.0) v.push_back("time.growth_rate must be >= 0");
  if (!(c.r > 1.0)) v.push_back("r = " + fmt(c.r) + " ≤ 1");
  for (double s : c.sigmas())
    if (!(s >= 1.0)) v.push_back("sigma = " + fmt(s) + " < 1");
  if (!c.f.satisfies_growth()) v.push_back("f: needs c > 0 and p > 1");
  if (!(c.g.c >= 0.0 && c.g.p > 1.0)) v.push_back("g: needs c >= 0 and q > 1");
  for (const auto& d : c.data) try {
      (void)d.build(Mesh1D(3, 1.0));
    } catch (const ConfigError& e) {
      v.push_back(e.what());
    }

  const BalanceReport bal = classify_balance(c.f, c.g, 1);
  if (c.preset != Preset::Dichotomy && bal.classification != Balance::Dissipative)
    v.push_back(bal.classification == Balance::Critical ? "p+1 = 2q: not Dissipative"
                                                        : "p+1 < 2q: not Dissipative");

  switch (c.preset) {
    case Preset::Cascade:
      if (bal.r0 <= 1.0)
        v.push_back("r0 = " + fmt(bal.r0) + " ≤ 1: no supercritical range");
      else if (!(c.r < bal.r0))
        v.push_back("r = " + fmt(c.r) + " >= r0 = " + fmt(bal.r0) + ": not supercritical");
      if (!(c.epsilon > 0.0 && c.epsilon < c.T)) v.push_back("need 0 < epsilon < T");
      if (c.data.empty()) v.push_back("data.suite is empty");
      if (!(c.cascade.alpha >= 1.0 && c.cascade.alpha < c.r))
        v.push_back("cascade.alpha must lie in [1, r)");
      if (c.cascade.continuity_j_hi <= c.cascade.continuity_j_lo)
        v.push_back("cascade continuity window is empty");
      if (!c.cascade.k_schedule.empty() && c.cascade.k_schedule.size() < 3)
        v.push_back("cascade.k_schedule needs at least 3 entries");
      break;
    case Preset::Smoothing:
      if (c.data.empty()) v.push_back("data.suite is empty");
      if (!(c.smoothing.t_lo > 0.0 && c.smoothing.t_lo < c.T)) v.push_back("need 0 < t_lo < T");
      break;
    case Preset::Calibrate:
      if (c.calibration_data.empty()) v.push_back("calibration.suite is empty");
      if (!(c.calibrate.safety >= 1.0)) v.push_back("calibration.safety must be >= 1");
      for (const auto& d : c.calibration_data) {
        try {
          (void)d.build(Mesh1D(3, 1.0));
        } catch (const ConfigError& e) {
          v.push_back(e.what());
        }
        for (const auto& h : c.data)
          if (h.text == d.text)
            v.push_back("datum '" + d.text + "' is in both the calibration and hold-out suites");
      }
      break;
    case Preset::Dichotomy:
      if (c.dichotomy.p_list.empty() || c.dichotomy.q_list.empty())
        v.push_back("dichotomy grid is empty");
      if (c.dichotomy.confirm_p > 0.0 && c.dichotomy.dt_schedule.size() < 3)
        v.push_back("dichotomy.dt_schedule needs at least 3 entries");
      break;
    case Preset::Equilibria:
      if (!(c.equilibria.settle_tol > 0.0)) v.push_back("equilibria.settle_tol must be positive");
      if (c.equilibria.M < 0.0) v.push_back("equilibria.M must be >= 0");
      if (c.equilibria.M == 0.0 && c.equilibria.absorbing_levels.empty())
        v.push_back("equilibria.M = 0 needs absorbing_levels");
      if (!(c.epsilon > 0.0 && c.epsilon < c.T)) v.push_back("need 0 < epsilon < T");
      break;
  }
  return v;
}

}  // namespace bflux
