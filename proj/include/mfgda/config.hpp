#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfgda/dynamics.hpp"
#include "mfgda/io.hpp"
#include "mfgda/kernel.hpp"
#include "mfgda/schedule.hpp"

namespace mfgda {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key-value store parsed from the TOML-style config format:
/// [section] headers, key = value lines, # comments. Values are strings,
/// numbers or booleans; keys are addressed as "section.key".
class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text) {
    ConfigMap cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": bad section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
  }

  void merge(const ConfigMap& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw ConfigError("");
      return v;
    } catch (...) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + it->second + "'");
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw ConfigError("");
      return v;
    } catch (...) {
      throw ConfigError("config key '" + key + "': expected an integer, got '" + it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw ConfigError("config key '" + key + "': expected true or false");
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& items() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

/// Fully resolved experiment configuration. Parsing applies defaults first,
/// then an optional preset, then the user file, then CLI overrides.
struct ExperimentConfig {
  // game
  std::string game_name = "separable";
  BuiltinParams game_params{};
  std::string activation = "sin";      // gan / petrov_galerkin
  int gan_samples = 8;
  std::uint64_t gan_sample_seed = 11;
  double pg_v_const = 1.0;
  double pg_f_const = 0.0;
  int pg_quad_nodes = 64;
  // grids
  TorusGrid x_grid{1, 64};
  TorusGrid y_grid{1, 64};
  // solver
  double tau = 1.0;
  double gamma = 0.5;
  double theta = 0.5;
  double tol = 1e-10;
  int max_iter = 10000;
  GdaRegime regime = GdaRegime::fast_ascent;
  double custom_eta = 1.0;
  ScheduleKind schedule = ScheduleKind::fixed;
  double xi = 3.0;
  double xi_star = 0.0;  // 0 selects the model default 2||K||inf
  double big_m = 10.0;
  double t0 = 7.389056098930650;
  double tau_end = 0.0;  // annealed runs: stop when tau reaches this (0 = use t_end)
  double lambda0 = 1.0;
  // integrator
  double dt = 0.0;  // 0 = auto
  double t_end = 10.0;
  int record_every = 1000;
  double dt_floor = 1e-9;
  std::string init = "bump";  // uniform | bump
  double init_conc = 2.0;
  double init_center_x = 1.5707963267948966;
  double init_center_y = 3.141592653589793;
  double stop_lyap = 0.0;
  double stop_lyap_tilde = 0.0;
  bool save_checkpoints = false;
  // particles
  std::size_t n_particles = 2000;
  std::uint64_t seed = 1;
  double bandwidth = 0.0;
  double particle_dt = 1e-3;
  bool paired_pde = true;
  NoiseConvention convention = NoiseConvention::wgda;
  int particle_record_every = 200;
  // output
  std::string out_dir = "out";
  bool write_densities = true;
  // verify
  int verify_n = 16;
  bool verify_fast = true;
  std::string inject_fault;

  ConfigMap raw;  // the effective key-value view, echoed into manifests
};

inline std::string default_config_text() {
  return R"([game]
name = "separable"        # cos_diff | separable | trig_poly | gan | petrov_galerkin
a = 1.0
b = 0.5
p = 1
q = 1
seed = 7                  # trig_poly coefficient seed
modes = 5
activation = "sin"        # gan / petrov_galerkin: sin | tanh
gan_samples = 8
gan_sample_seed = 11
pg_v_const = 1.0
pg_f_const = 0.0
pg_quad_nodes = 64

[grids]
dim_x = 1
n_x = 64
l_x = 6.283185307179586
l_x2 = 0.0                # second-axis circumference for 2D grids (0 = l_x)
dim_y = 1
n_y = 64
l_y = 6.283185307179586
l_y2 = 0.0

[solver]
tau = 1.0
gamma = 0.5
theta = 0.5               # fixed-point damping
tol = 1e-10
max_iter = 10000
regime = "fast_ascent"    # fast_ascent | fast_descent | custom
eta = 1.0                 # used when regime = custom
schedule = "fixed"        # fixed | annealed_fast_ascent | annealed_fast_descent
xi = 3.0
xi_star = 0.0             # 0 = model default 2*supK
m_big = 10.0
t0 = 7.389056098930650
tau_end = 0.0             # annealed: run until tau reaches this (0 = use t_end)
lambda0 = 1.0

[integrator]
dt = 0.0                  # 0 = auto from the stability bound
t_end = 10.0
record_every = 1000
dt_floor = 1e-9
init = "bump"             # uniform | bump
init_conc = 2.0
init_center_x = 1.5707963267948966
init_center_y = 3.141592653589793
stop_lyap = 0.0
stop_lyap_tilde = 0.0
save_checkpoints = false

[particles]
n = 2000
seed = 1
bandwidth = 0.0           # 0 = Silverman
dt = 1e-3
paired_pde = true
convention = "wgda"       # wgda | literal
record_every = 200

[output]
dir = "out"
write_densities = true

[verify]
n = 16
fast = true
inject_fault = ""
)";
}

/// Built-in experiment presets, addressable from the CLI.
inline std::string preset_text(const std::string& name) {
  if (name == "fast-ascent-separable") {
    return "[solver]\nregime = \"fast_ascent\"\nschedule = \"fixed\"\ntau = 1.0\ngamma = 0.5\n"
           "[integrator]\nt_end = 400\nstop_lyap = 5e-7\nrecord_every = 5000\n";
  }
  if (name == "fast-descent-separable") {
    return "[solver]\nregime = \"fast_descent\"\nschedule = \"fixed\"\ntau = 1.0\ngamma = 0.5\n"
           "[integrator]\nt_end = 2500\nrecord_every = 2000\n";
  }
  if (name == "annealed-separable") {
    return "[solver]\nschedule = \"annealed_fast_ascent\"\nxi_star = 1.0\nxi = 3.0\n"
           "m_big = 10.0\ntau_end = 0.25\ngamma = 0.5\n"
           "[integrator]\nrecord_every = 4000\n";
  }
  if (name == "particles-separable") {
    return "[solver]\nregime = \"custom\"\neta = 1.0\ntau = 1.0\n"
           "[particles]\nn = 2000\ndt = 1e-3\npaired_pde = true\n"
           "[integrator]\nt_end = 2\n";
  }
  throw ConfigError("unknown preset '" + name + "'");
}

inline ExperimentConfig resolve_config(const ConfigMap& m) {
  ExperimentConfig c;
  c.raw = m;
  c.game_name = m.get_string("game.name", c.game_name);
  c.game_params.a = m.get_double("game.a", c.game_params.a);
  c.game_params.b = m.get_double("game.b", c.game_params.b);
  c.game_params.p = static_cast<int>(m.get_int("game.p", c.game_params.p));
  c.game_params.q = static_cast<int>(m.get_int("game.q", c.game_params.q));
  c.game_params.seed = static_cast<std::uint64_t>(m.get_int("game.seed", 7));
  c.game_params.modes = static_cast<int>(m.get_int("game.modes", c.game_params.modes));
  c.activation = m.get_string("game.activation", c.activation);
  c.gan_samples = static_cast<int>(m.get_int("game.gan_samples", c.gan_samples));
  c.gan_sample_seed = static_cast<std::uint64_t>(m.get_int("game.gan_sample_seed", 11));
  c.pg_v_const = m.get_double("game.pg_v_const", c.pg_v_const);
  c.pg_f_const = m.get_double("game.pg_f_const", c.pg_f_const);
  c.pg_quad_nodes = static_cast<int>(m.get_int("game.pg_quad_nodes", c.pg_quad_nodes));

  const int dim_x = static_cast<int>(m.get_int("grids.dim_x", 1));
  const int n_x = static_cast<int>(m.get_int("grids.n_x", 64));
  const double l_x = m.get_double("grids.l_x", kTwoPi);
  const double l_x2 = m.get_double("grids.l_x2", 0.0);  // 0 = same as l_x
  const int dim_y = static_cast<int>(m.get_int("grids.dim_y", 1));
  const int n_y = static_cast<int>(m.get_int("grids.n_y", 64));
  const double l_y = m.get_double("grids.l_y", kTwoPi);
  const double l_y2 = m.get_double("grids.l_y2", 0.0);
  try {
    c.x_grid = TorusGrid(dim_x, n_x, {l_x, l_x2 > 0.0 ? l_x2 : l_x});
    c.y_grid = TorusGrid(dim_y, n_y, {l_y, l_y2 > 0.0 ? l_y2 : l_y});
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("grids: ") + e.what());
  }

  c.tau = m.get_double("solver.tau", c.tau);
  c.gamma = m.get_double("solver.gamma", c.gamma);
  c.theta = m.get_double("solver.theta", c.theta);
  c.tol = m.get_double("solver.tol", c.tol);
  c.max_iter = static_cast<int>(m.get_int("solver.max_iter", c.max_iter));
  const std::string regime = m.get_string("solver.regime", "fast_ascent");
  if (regime == "fast_ascent") c.regime = GdaRegime::fast_ascent;
  else if (regime == "fast_descent") c.regime = GdaRegime::fast_descent;
  else if (regime == "custom") c.regime = GdaRegime::custom;
  else throw ConfigError("solver.regime: unknown value '" + regime + "'");
  c.custom_eta = m.get_double("solver.eta", c.custom_eta);
  const std::string sched = m.get_string("solver.schedule", "fixed");
  if (sched == "fixed") c.schedule = ScheduleKind::fixed;
  else if (sched == "annealed_fast_ascent") c.schedule = ScheduleKind::annealed_fast_ascent;
  else if (sched == "annealed_fast_descent") c.schedule = ScheduleKind::annealed_fast_descent;
  else throw ConfigError("solver.schedule: unknown value '" + sched + "'");
  c.xi = m.get_double("solver.xi", c.xi);
  c.xi_star = m.get_double("solver.xi_star", c.xi_star);
  c.big_m = m.get_double("solver.m_big", c.big_m);
  c.t0 = m.get_double("solver.t0", c.t0);
  c.tau_end = m.get_double("solver.tau_end", c.tau_end);
  c.lambda0 = m.get_double("solver.lambda0", c.lambda0);

  c.dt = m.get_double("integrator.dt", c.dt);
  c.t_end = m.get_double("integrator.t_end", c.t_end);
  c.record_every = static_cast<int>(m.get_int("integrator.record_every", c.record_every));
  c.dt_floor = m.get_double("integrator.dt_floor", c.dt_floor);
  c.init = m.get_string("integrator.init", c.init);
  if (c.init != "uniform" && c.init != "bump")
    throw ConfigError("integrator.init: unknown value '" + c.init + "'");
  c.init_conc = m.get_double("integrator.init_conc", c.init_conc);
  c.init_center_x = m.get_double("integrator.init_center_x", c.init_center_x);
  c.init_center_y = m.get_double("integrator.init_center_y", c.init_center_y);
  c.stop_lyap = m.get_double("integrator.stop_lyap", c.stop_lyap);
  c.stop_lyap_tilde = m.get_double("integrator.stop_lyap_tilde", c.stop_lyap_tilde);
  c.save_checkpoints = m.get_bool("integrator.save_checkpoints", c.save_checkpoints);

  const std::int64_t n_particles = m.get_int("particles.n", static_cast<std::int64_t>(c.n_particles));
  if (n_particles < 1) throw ConfigError("particles.n: need at least one particle");
  c.n_particles = static_cast<std::size_t>(n_particles);
  c.seed = static_cast<std::uint64_t>(m.get_int("particles.seed", 1));
  c.bandwidth = m.get_double("particles.bandwidth", c.bandwidth);
  c.particle_dt = m.get_double("particles.dt", c.particle_dt);
  c.paired_pde = m.get_bool("particles.paired_pde", c.paired_pde);
  const std::string conv = m.get_string("particles.convention", "wgda");
  if (conv == "wgda") c.convention = NoiseConvention::wgda;
  else if (conv == "literal") c.convention = NoiseConvention::literal;
  else throw ConfigError("particles.convention: unknown value '" + conv + "'");
  c.particle_record_every = static_cast<int>(m.get_int("particles.record_every", c.particle_record_every));

  c.out_dir = m.get_string("output.dir", c.out_dir);
  c.write_densities = m.get_bool("output.write_densities", c.write_densities);

  c.verify_n = static_cast<int>(m.get_int("verify.n", c.verify_n));
  c.verify_fast = m.get_bool("verify.fast", c.verify_fast);
  c.inject_fault = m.get_string("verify.inject_fault", "");

  if (!(c.tau > 0.0)) throw ConfigError("solver.tau must be positive");
  if (!(c.gamma > 0.0) || !(c.gamma < 1.0)) throw ConfigError("solver.gamma must lie in (0,1)");
  if (!(c.theta > 0.0) || c.theta > 1.0) throw ConfigError("solver.theta must lie in (0,1]");
  if (c.schedule != ScheduleKind::fixed && !(c.xi > 0.0)) throw ConfigError("solver.xi must be positive");
  return c;
}

/// Construct the configured game kernel.
inline GameKernel make_kernel(const ExperimentConfig& c) {
  if (c.game_name == "cos_diff" || c.game_name == "separable" || c.game_name == "trig_poly")
    return builtin_kernel(c.game_name, c.game_params, c.x_grid, c.y_grid);
  if (c.game_name == "gan") {
    const Activation act = c.activation == "tanh" ? tanh_activation() : sin_activation();
    CounterRng rng{c.gan_sample_seed};
    std::vector<double> samples(static_cast<std::size_t>(c.gan_samples));
    for (std::size_t i = 0; i < samples.size(); ++i)
      samples[i] = rng.uniform01(0, i, 0) * c.x_grid.length[0];
    GanOptions opts;
    opts.x_grid = c.x_grid;
    opts.y_grid = c.y_grid;
    opts.input_map = c.activation == "tanh" ? InputMap::sine : InputMap::raw;
    return gan_kernel(std::move(samples), act, opts);
  }
  if (c.game_name == "petrov_galerkin") {
    const Activation act = c.activation == "tanh" ? tanh_activation() : sin_activation();
    PetrovGalerkinOptions opts;
    opts.x_grid = c.x_grid;
    opts.y_grid = c.y_grid;
    opts.quad_nodes = c.pg_quad_nodes;
    const double v = c.pg_v_const, f = c.pg_f_const;
    return petrov_galerkin_kernel([v](double) { return v; }, [f](double) { return f; }, act, act,
                                  opts);
  }
  throw ConfigError("game.name: unknown value '" + c.game_name + "'");
}

/// Initial measures for a run: uniform, or a Gibbs bump exp(conc cos(x - x0)).
inline GridMeasure make_initial(const TorusGrid& g, const std::string& kind, double conc,
                                double center) {
  if (kind == "uniform") return uniform(g);
  std::vector<double> pot(g.cells());
  for (std::size_t i = 0; i < g.cells(); ++i) {
    const auto p = g.node_coords(i);
    double s = 0.0;
    for (int a = 0; a < g.dim; ++a) s += std::cos((p[a] - center) * kTwoPi / g.length[a]);
    pot[i] = conc * s;
  }
  return gibbs(g, pot, +1, 1.0);
}

/// The schedule described by the config (annealed xi* falls back to the
/// Holley-Stroock model value for the given kernel).
inline ScaleSchedule make_schedule(const ExperimentConfig& c, const GameKernel& k) {
  if (c.schedule == ScheduleKind::fixed) {
    const RatePrediction pred = predict_rates(k, c.tau, c.gamma, c.regime, c.custom_eta, c.lambda0);
    return ScaleSchedule::make_fixed(c.tau, pred.eta);
  }
  const double xs = c.xi_star > 0.0 ? c.xi_star : default_xi_star(k);
  return ScaleSchedule::make_annealed(c.schedule, c.xi, xs, c.big_m, c.t0);
}

/// JSON echo of the effective configuration (all resolved keys).
inline nlohmann::json config_echo(const ExperimentConfig& c) {
  nlohmann::json j;
  for (const auto& [k, v] : c.raw.items()) j[k] = v;
  return j;
}

}  // namespace mfgda
