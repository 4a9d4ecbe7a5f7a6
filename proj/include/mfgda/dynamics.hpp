#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mfgda/diagnostics.hpp"
#include "mfgda/equilibrium.hpp"
#include "mfgda/measure.hpp"
#include "mfgda/schedule.hpp"

namespace mfgda {

/// Coupled state of the two-scale mean-field GDA flow: mu descends, nu
/// ascends (nu's generator runs eta times faster).
struct GdaState {
  GridMeasure mu;
  GridMeasure nu;
  double t = 0.0;
};

struct StabilityViolation : std::runtime_error {
  double dt = 0.0;
  double dt_max = 0.0;
  StabilityViolation(double dt_, double dt_max_)
      : std::runtime_error("time step " + std::to_string(dt_) +
                           " exceeds the stability bound " + std::to_string(dt_max_)),
        dt(dt_),
        dt_max(dt_max_) {}
};

inline constexpr double kCfl = 0.4;

/// Drift potential V_nu(x) = int K(x, y) dnu(y) on the x grid. The symmetric
/// operation for the ascent side (sign handled by the caller) is
/// drift_potential_y.
inline std::vector<double> drift_potential_x(const KernelMatrix& m, const GridMeasure& nu) {
  return potential_on_x(m, nu);
}

inline std::vector<double> drift_potential_y(const KernelMatrix& m, const GridMeasure& mu) {
  return potential_on_y(m, mu);
}

namespace fp {

/// Bernoulli function B(p) = p / (e^p - 1) of the exponential fitting.
/// B(-p) = B(p) + p, which keeps the discrete Gibbs state exactly flux-free.
inline double bernoulli(double p) {
  if (std::abs(p) < 1e-8) return 1.0 - 0.5 * p;
  return p / std::expm1(p);
}

/// One explicit Euler step of d rho/dt = div(rho grad U) + tau Lap rho in
/// Chang-Cooper / Scharfetter-Gummel flux form on the periodic grid. Mass
/// telescopes exactly; positivity is checked after the update and a negative
/// cell reports a stability violation. `scratch` must have grid.cells() slots.
inline void step(const TorusGrid& g, std::vector<double>& rho, std::span<const double> u,
                 double tau, double dt, std::vector<double>& scratch) {
  scratch.assign(rho.begin(), rho.end());
  if (g.dim == 1) {
    const double h = g.spacing(0);
    const double a = dt * tau / (h * h);  // fluxes carry dt/h * tau/h up front
    // face i+1/2 sits between cells i and i+1; start from the wrap face (n-1, 0)
    double j_prev;
    {
      const double p = (u[0] - u[g.n - 1]) / tau;
      const double bp = bernoulli(p);
      j_prev = a * (bp * rho[g.n - 1] - (bp + p) * rho[0]);
    }
    double j_wrap = j_prev;
    for (int i = 0; i < g.n; ++i) {
      double j_next;
      if (i == g.n - 1) {
        j_next = j_wrap;
      } else {
        const double p = (u[i + 1] - u[i]) / tau;
        const double bp = bernoulli(p);
        j_next = a * (bp * rho[i] - (bp + p) * rho[i + 1]);
      }
      scratch[i] -= j_next - j_prev;
      j_prev = j_next;
    }
  } else {
    const int n = g.n;
    for (int axis = 0; axis < 2; ++axis) {
      const double h = g.spacing(axis);
      const double a = dt * tau / (h * h);
      const int stride = axis == 0 ? n : 1;
      const int lanes = n;
      for (int lane = 0; lane < lanes; ++lane) {
        const int base = axis == 0 ? lane : lane * n;
        auto cell = [&](int k) { return base + stride * k; };
        const double p0 = (u[cell(0)] - u[cell(n - 1)]) / tau;
        const double b0 = bernoulli(p0);
        const double j_wrap = a * (b0 * rho[cell(n - 1)] - (b0 + p0) * rho[cell(0)]);
        double j_prev = j_wrap;
        for (int k = 0; k < n; ++k) {
          double j_next;
          if (k == n - 1) {
            j_next = j_wrap;
          } else {
            const double p = (u[cell(k + 1)] - u[cell(k)]) / tau;
            const double bp = bernoulli(p);
            j_next = a * (bp * rho[cell(k)] - (bp + p) * rho[cell(k + 1)]);
          }
          scratch[cell(k)] -= j_next - j_prev;
          j_prev = j_next;
        }
      }
    }
  }
  for (double v : scratch)
    if (v < 0.0) throw StabilityViolation(dt, dt);  // positivity lost: dt too large for this state
  rho.swap(scratch);
}

}  // namespace fp

/// Stability bound dt_max = c_CFL h^2 / (max(1, eta) (tau + h max|grad V|)).
/// h is the smallest spacing across the two grids, the gradient bound covers
/// both drifts, and 2D updates halve the budget (two flux axes).
inline double gda_dt_max(const TorusGrid& xg, const TorusGrid& yg, double tau, double eta,
                         double max_grad_v) {
  double h = xg.spacing(0);
  for (int a = 0; a < xg.dim; ++a) h = std::min(h, xg.spacing(a));
  for (int a = 0; a < yg.dim; ++a) h = std::min(h, yg.spacing(a));
  const int dim = std::max(xg.dim, yg.dim);
  const double c = kCfl / dim;
  return c * h * h / (std::max(1.0, eta) * (tau + h * max_grad_v));
}

namespace detail {

inline double max_face_gradient(const TorusGrid& g, std::span<const double> u) {
  double worst = 0.0;
  if (g.dim == 1) {
    const double inv_h = 1.0 / g.spacing(0);
    for (int i = 0; i < g.n; ++i)
      worst = std::max(worst, std::abs(u[g.wrap(i + 1)] - u[i]) * inv_h);
  } else {
    for (int axis = 0; axis < 2; ++axis) {
      const double inv_h = 1.0 / g.spacing(axis);
      for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
          const std::size_t c0 = g.index(i, j);
          const std::size_t c1 = axis == 0 ? g.index(i + 1, j) : g.index(i, j + 1);
          worst = std::max(worst, std::abs(u[c1] - u[c0]) * inv_h);
        }
    }
  }
  return worst;
}

}  // namespace detail

/// One explicit step of the coupled GDA flow,
///   d mu/dt = div(mu grad V_nu) + tau Lap mu
///   d nu/dt = eta (div(nu grad(-V_mu)) + tau Lap nu),
/// with exponential-fitting fluxes. Throws StabilityViolation when dt exceeds
/// the CFL bound for the current drifts.
inline GdaState gda_step(const GdaState& state, const KernelMatrix& m, double tau, double eta,
                         double dt) {
  if (!(tau > 0.0) || !(eta > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("gda_step: tau, eta, dt must be positive");
  auto v_nu = drift_potential_x(m, state.nu);
  auto v_mu = drift_potential_y(m, state.mu);
  const double grad_bound = std::max(detail::max_face_gradient(m.x_grid, v_nu),
                                     detail::max_face_gradient(m.y_grid, v_mu));
  const double dt_max = gda_dt_max(m.x_grid, m.y_grid, tau, eta, grad_bound);
  if (dt > dt_max) throw StabilityViolation(dt, dt_max);

  GdaState next = state;
  std::vector<double> scratch;
  fp::step(m.x_grid, next.mu.density, v_nu, tau, dt, scratch);
  for (double& u : v_mu) u = -u;  // ascent: nu climbs V_mu
  fp::step(m.y_grid, next.nu.density, v_mu, tau, eta * dt, scratch);
  next.t += dt;
  return next;
}

enum class GdaRegime { fast_ascent, fast_descent, custom };

inline const char* to_string(GdaRegime r) {
  switch (r) {
    case GdaRegime::fast_ascent: return "fast_ascent";
    case GdaRegime::fast_descent: return "fast_descent";
    case GdaRegime::custom: return "custom";
  }
  return "?";
}

/// Regime presets for the scale ratio, with the certified decay rates.
struct RatePrediction {
  double lambda_ls = 0.0;
  double kappa = 0.0;
  double eta = 0.0;
  double alpha1 = 0.0;  // fast-ascent rate for L
  double alpha2 = 0.0;  // fast-descent rate for L~
};

inline RatePrediction predict_rates(const GameKernel& k, double tau, double gamma,
                                    GdaRegime regime, double custom_eta = 1.0,
                                    double lambda0 = 1.0) {
  if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("predict_rates: gamma in (0,1)");
  RatePrediction r;
  r.lambda_ls = lsi_lower_bound(k, tau, lambda0);
  r.kappa = condition_kappa(k.kxy_bound, tau, r.lambda_ls);
  const double dy2 = k.y_grid.diameter() * k.y_grid.diameter();
  const double dx2 = k.x_grid.diameter() * k.x_grid.diameter();
  switch (regime) {
    case GdaRegime::fast_ascent:
      r.eta = 2.0 * r.lambda_ls * r.kappa * r.kappa * dy2 / gamma;
      break;
    case GdaRegime::fast_descent:
      r.eta = gamma / (2.0 * r.lambda_ls * r.kappa * r.kappa * dx2 * (1.0 + 3.0 * gamma));
      break;
    case GdaRegime::custom:
      r.eta = custom_eta;
      break;
  }
  r.alpha1 = r.lambda_ls * std::min(0.5 * (1.0 - gamma),
                                    r.kappa * r.kappa * dy2 * (1.0 + 3.0 * gamma) / gamma);
  r.alpha2 = 0.5 * r.lambda_ls * std::min(1.0, r.eta * (1.0 - gamma));
  return r;
}

struct RunOptions {
  double t_end = 10.0;
  double dt = 0.0;              // 0 selects the CFL-derived step
  int record_every = 1000;      // steps between diagnostic records
  double dt_floor = 1e-9;       // warn when the auto step falls below this
  double gamma = 0.5;
  double stop_lyap_below = 0.0;        // fast-ascent stop threshold, 0 = off
  double stop_lyap_tilde_below = 0.0;  // fast-descent stop threshold
  double mne_tol = 1e-10;
  int mne_max_iter = 20000;
  double mne_theta = 0.5;
  bool keep_checkpoints = false;  // retain (mu, nu) snapshots at record times
};

struct Checkpoint {
  double t = 0.0;
  std::size_t step = 0;
  GridMeasure mu, nu;
};

struct RunResult {
  std::vector<DiagnosticsRecord> series;
  std::vector<Checkpoint> checkpoints;
  GdaState final_state;
  std::size_t steps = 0;
  double dt_used = 0.0;  // largest step taken (the nominal step for fixed schedules)
  RatePrediction prediction;
  RateFit lyap_fit;        // fitted on L for ascent-type runs
  RateFit lyap_tilde_fit;  // fitted on L~ for descent-type runs
  bool dt_floor_hit = false;
  bool stopped_early = false;
  MnePair mne;  // equilibrium at the final temperature
};

/// Shared driver for fixed and annealed runs. Records the full diagnostics
/// slate every record_every steps (plus t = 0 and the final step), recomputes
/// the reference MNE whenever tau has moved, and fits the decay rates on the
/// recorded Lyapunov series.
inline RunResult run_gda(const KernelMatrix& m, const ScaleSchedule& sched, GridMeasure mu0,
                         GridMeasure nu0, const RunOptions& opt) {
  if (mu0.grid != m.x_grid || nu0.grid != m.y_grid)
    throw std::invalid_argument("run_gda: initial measures on the wrong grids");
  RunResult out;
  GdaState state{std::move(mu0), std::move(nu0), 0.0};

  MnePair mne;
  double mne_tau = -1.0;
  auto refresh_mne = [&](double tau) {
    if (tau == mne_tau) return;
    BestResponseContext ctx(m, tau);
    if (mne_tau < 0.0)
      mne = fixed_point_mne(ctx, opt.mne_theta, opt.mne_tol, opt.mne_max_iter);
    else
      mne = fixed_point_mne_from(ctx, mne.mu_star, mne.nu_star, opt.mne_theta, opt.mne_tol,
                                 opt.mne_max_iter);
    mne_tau = tau;
  };

  std::vector<double> scratch;
  auto record = [&](std::size_t step) {
    const double tau = sched.tau_at(state.t);
    const double eta = sched.eta_at(state.t);
    refresh_mne(tau);
    BestResponseContext ctx(m, tau);
    DiagnosticsRecord r;
    r.t = state.t;
    r.tau = tau;
    r.eta = eta;
    const EnergyPair e = energy(m, state.mu, state.nu, tau);
    r.e_tau = e.e_tau;
    r.e_0 = e.e_0;
    const GridMeasure bp = k_plus(ctx, state.mu);
    const GridMeasure bm = k_minus(ctx, state.nu);
    const LyapunovSlice s = lyapunov_all(ctx, mne, state.mu, state.nu, opt.gamma);
    r.l1 = s.l1;
    r.l2 = s.l2;
    r.l3 = s.l3;
    r.l4 = s.l4;
    r.lyap = s.lyap;
    r.lyap_tilde = s.lyap_tilde;
    r.kl_mu_star = relative_entropy(state.mu, mne.mu_star);
    r.kl_nu_star = relative_entropy(state.nu, mne.nu_star);
    r.ni = ni_error(m, state.mu, state.nu);
    r.fisher_mu = relative_fisher(state.mu, bm);
    r.fisher_nu = relative_fisher(state.nu, bp);
    const GridMeasure chain_mu = k_minus(ctx, bp);
    const GridMeasure chain_nu = k_plus(ctx, bm);
    r.fisher_mu_chain = relative_fisher(state.mu, chain_mu);
    r.fisher_nu_chain = relative_fisher(state.nu, chain_nu);
    r.kl_nu_br = relative_entropy(state.nu, bp);
    r.kl_mu_br = relative_entropy(state.mu, bm);
    r.kl_mu_chain = relative_entropy(state.mu, chain_mu);
    r.kl_nu_chain = relative_entropy(state.nu, chain_nu);
    r.soft_gap = r.l2 + r.l4;
    out.series.push_back(r);
    if (opt.keep_checkpoints) out.checkpoints.push_back({state.t, step, state.mu, state.nu});
    return r;
  };

  record(0);
  std::size_t step = 0;
  bool stopped = false;
  while (state.t < opt.t_end && !stopped) {
    const double tau = sched.tau_at(state.t);
    const double eta = sched.eta_at(state.t);
    auto v_nu = potential_on_x(m, state.nu);
    auto v_mu = potential_on_y(m, state.mu);
    double dt = opt.dt;
    if (dt <= 0.0) {
      // a-priori bound: per-axis drift gradients never exceed lip
      dt = gda_dt_max(m.x_grid, m.y_grid, tau, eta, m.lip);
      if (dt < opt.dt_floor) out.dt_floor_hit = true;
    } else {
      const double grad_bound = std::max(detail::max_face_gradient(m.x_grid, v_nu),
                                         detail::max_face_gradient(m.y_grid, v_mu));
      const double dt_max = gda_dt_max(m.x_grid, m.y_grid, tau, eta, grad_bound);
      if (dt > dt_max) throw StabilityViolation(dt, dt_max);
    }
    if (state.t + dt > opt.t_end) dt = opt.t_end - state.t;

    fp::step(m.x_grid, state.mu.density, v_nu, tau, dt, scratch);
    for (double& u : v_mu) u = -u;
    fp::step(m.y_grid, state.nu.density, v_mu, tau, eta * dt, scratch);
    state.t += dt;
    ++step;
    out.dt_used = std::max(out.dt_used, dt);

    const bool at_end = state.t >= opt.t_end;
    if (step % static_cast<std::size_t>(std::max(1, opt.record_every)) == 0 || at_end) {
      const DiagnosticsRecord r = record(step);
      if ((opt.stop_lyap_below > 0.0 && r.lyap < opt.stop_lyap_below) ||
          (opt.stop_lyap_tilde_below > 0.0 && r.lyap_tilde < opt.stop_lyap_tilde_below)) {
        stopped = true;
        out.stopped_early = true;
      }
    }
  }

  out.steps = step;
  out.final_state = std::move(state);
  out.mne = std::move(mne);
  if (out.series.size() >= 10) {
    std::vector<double> ts, lv, lt;
    ts.reserve(out.series.size());
    for (const auto& r : out.series) {
      ts.push_back(r.t);
      lv.push_back(r.lyap);
      lt.push_back(r.lyap_tilde);
    }
    out.lyap_fit = rate_fit(ts, lv);
    out.lyap_tilde_fit = rate_fit(ts, lt);
  }
  return out;
}

/// Fixed-temperature run with the regime's eta preset from the convergence
/// theory (or a custom ratio).
inline RunResult run_fixed(const GameKernel& kernel, const KernelMatrix& m, double tau,
                           double gamma, GdaRegime regime, GridMeasure mu0, GridMeasure nu0,
                           RunOptions opt, double custom_eta = 1.0, double lambda0 = 1.0) {
  opt.gamma = gamma;
  const RatePrediction pred = predict_rates(kernel, tau, gamma, regime, custom_eta, lambda0);
  RunResult out = run_gda(m, ScaleSchedule::make_fixed(tau, pred.eta), std::move(mu0),
                          std::move(nu0), opt);
  out.prediction = pred;
  return out;
}

/// Annealed run on a logarithmic cooling schedule.
inline RunResult run_annealed(const KernelMatrix& m, const ScaleSchedule& sched, GridMeasure mu0,
                              GridMeasure nu0, const RunOptions& opt) {
  if (sched.kind == ScheduleKind::fixed)
    throw std::invalid_argument("run_annealed: schedule kind must be annealed");
  return run_gda(m, sched, std::move(mu0), std::move(nu0), opt);
}

/// Default xi* for annealed schedules, from the Holley-Stroock model
/// lambda(tau) >= lambda0 exp(-2 ||K||inf / tau).
inline double default_xi_star(const GameKernel& k) { return 2.0 * k.sup_norm; }

}  // namespace mfgda
