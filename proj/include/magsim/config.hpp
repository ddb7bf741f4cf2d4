#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "magsim/filter.hpp"
#include "magsim/model.hpp"

// Scenario configuration: flat `key = value` files with `#` comments, plus
// flag overrides applied on top. All inputs are SI (B-related quantities in
// tesla); only the output layer converts to pT.

namespace magsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Subcommand { kDeriveParams, kVariance, kTrajectory, kEnsemble, kVerify };
enum class ParamSource { kPhysical, kEffective };

struct ScenarioConfig {
  Subcommand subcommand = Subcommand::kVariance;
  ParamSource source = ParamSource::kPhysical;

  PhysicalParams physical;  // defaults: canonical cesium probing scenario
  double kappa_sq = 0.0;    // s^-1, effective source
  double mu = 0.0;          // (s T)^-1, effective source
  double eta = 0.0;         // s^-1, effective source

  double tau = 1e-8;        // s
  double t_final = 1e-2;    // s
  double r = 1.0;
  double delta_b0 = 1e-12;  // T
  double prior_mean = 0.0;  // T
  bool decay = true;
  std::optional<double> sg_time;  // s
  std::optional<double> b_true;   // T
  TruthMode truth_mode = TruthMode::kGroundTruth;
  int n_traj = 100;
  int record_points = 200;
  double record_t_min = 0.0;  // s; 0 = auto
  std::uint64_t seed = 0;
  unsigned threads = 0;       // 0 = hardware default; not part of the result
  std::string out;            // empty = <subcommand>.csv

  /// Where each explicitly-set key came from, for conflict reporting.
  std::map<std::string, std::string> provenance;

  bool is_set(const std::string& key) const { return provenance.count(key) > 0; }

  EffectiveCouplings couplings() const {
    if (source == ParamSource::kEffective) {
      EffectiveCouplings c;
      c.kappa = std::sqrt(kappa_sq);
      c.mu = mu;
      c.eta = eta;
      return c;
    }
    PhysicalParams p = physical;
    p.prior_width = delta_b0;
    p.squeezing = r;
    return derive_couplings(p);
  }

  FilterConfig filter_config() const {
    FilterConfig f;
    f.couplings = couplings();
    f.tau = tau;
    f.t_final = t_final;
    f.decay_enabled = decay;
    f.r = r;
    f.prior_width = delta_b0;
    f.prior_mean = prior_mean;
    f.sg_time = sg_time;
    f.truth_mode = truth_mode;
    f.b_true = b_true;
    f.seed = seed;
    f.record_points = record_points;
    f.record_t_min = record_t_min;
    return f;
  }
};

namespace detail {

inline const std::vector<std::string>& physical_keys() {
  static const std::vector<std::string> keys = {
      "wavelength", "dipole_moment", "decay_width", "detuning",
      "beam_area",  "photon_flux",   "atom_number", "beta"};
  return keys;
}

inline const std::vector<std::string>& effective_keys() {
  static const std::vector<std::string> keys = {"kappa_sq", "mu", "eta"};
  return keys;
}

inline double parse_double(const std::string& value, const std::string& where) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse number '" + value + "'");
  }
  while (pos < value.size() && std::isspace(static_cast<unsigned char>(value[pos])))
    ++pos;
  if (pos != value.size())
    throw ConfigError(where + ": cannot parse number '" + value + "'");
  return v;
}

inline bool parse_bool(const std::string& value, const std::string& where) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError(where + ": cannot parse boolean '" + value + "'");
}

}  // namespace detail

/// Apply one key/value pair; `where` identifies the source for error
/// messages and conflict reporting ("file:line" or "command line").
inline void apply_key(ScenarioConfig& cfg, const std::string& key,
                      const std::string& value, const std::string& where) {
  using detail::parse_bool;
  using detail::parse_double;
  auto num = [&] { return parse_double(value, where); };

  if (key == "wavelength") cfg.physical.wavelength = num();
  else if (key == "dipole_moment") cfg.physical.dipole_moment = num();
  else if (key == "decay_width") cfg.physical.decay_width = num();
  else if (key == "detuning") cfg.physical.detuning = num();
  else if (key == "beam_area") cfg.physical.beam_area = num();
  else if (key == "photon_flux") cfg.physical.photon_flux = num();
  else if (key == "atom_number") cfg.physical.atom_number = num();
  else if (key == "beta") cfg.physical.magnetic_moment = num();
  else if (key == "kappa_sq") cfg.kappa_sq = num();
  else if (key == "mu") cfg.mu = num();
  else if (key == "eta") cfg.eta = num();
  else if (key == "tau") cfg.tau = num();
  else if (key == "t_final") cfg.t_final = num();
  else if (key == "r") cfg.r = num();
  else if (key == "delta_b0") cfg.delta_b0 = num();
  else if (key == "prior_mean") cfg.prior_mean = num();
  else if (key == "decay") cfg.decay = parse_bool(value, where);
  else if (key == "sg_time") cfg.sg_time = num();
  else if (key == "b_true") cfg.b_true = num();
  else if (key == "truth_mode") {
    if (value == "innovation") cfg.truth_mode = TruthMode::kInnovationDraw;
    else if (value == "ground-truth") cfg.truth_mode = TruthMode::kGroundTruth;
    else throw ConfigError(where + ": truth_mode must be 'innovation' or 'ground-truth'");
  }
  else if (key == "n") cfg.n_traj = static_cast<int>(num());
  else if (key == "record_points") cfg.record_points = static_cast<int>(num());
  else if (key == "record_t_min") cfg.record_t_min = num();
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(num());
  else if (key == "threads") cfg.threads = static_cast<unsigned>(num());
  else if (key == "out") cfg.out = value;
  else throw ConfigError(where + ": unknown key '" + key + "'");

  cfg.provenance[key] = where;
}

/// Parse a `key = value` config file into cfg (later sources override).
inline void parse_config_file(ScenarioConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    std::string stripped = line.substr(0, line.find('#'));
    auto first = stripped.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    auto last = stripped.find_last_not_of(" \t\r\n");
    stripped = stripped.substr(first, last - first + 1);

    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    apply_key(cfg, key, value, where);
  }
}

/// Decide the parameter source and reject mixed physical/effective input.
inline void resolve_source(ScenarioConfig& cfg) {
  std::vector<std::string> eff, phys;
  for (const auto& k : detail::effective_keys())
    if (cfg.is_set(k)) eff.push_back(k + " (" + cfg.provenance.at(k) + ")");
  for (const auto& k : detail::physical_keys())
    if (cfg.is_set(k)) phys.push_back(k + " (" + cfg.provenance.at(k) + ")");

  if (!eff.empty() && !phys.empty()) {
    std::ostringstream msg;
    msg << "conflicting parameter sources: effective " << eff.front()
        << " vs physical " << phys.front();
    throw ConfigError(msg.str());
  }
  if (!eff.empty()) {
    cfg.source = ParamSource::kEffective;
    if (!cfg.is_set("kappa_sq") || !cfg.is_set("mu"))
      throw ConfigError("effective parameter source requires both kappa_sq and mu");
    if (cfg.decay && !cfg.is_set("eta"))
      throw ConfigError("decay enabled but eta not given (effective source)");
    if (cfg.kappa_sq < 0.0 || cfg.mu < 0.0 || cfg.eta < 0.0)
      throw ConfigError("effective couplings must be >= 0");
  } else {
    cfg.source = ParamSource::kPhysical;
  }
}

}  // namespace magsim
