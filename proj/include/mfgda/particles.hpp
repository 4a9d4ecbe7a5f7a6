#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfgda/dynamics.hpp"
#include "mfgda/kernel.hpp"
#include "mfgda/measure.hpp"
#include "mfgda/rng.hpp"

namespace mfgda {

/// N interacting strategy pairs on the product torus, advanced by
/// Euler-Maruyama. Noise is drawn from counter-based streams keyed by
/// (seed, stream_id, step), so trajectories are bitwise reproducible in any
/// evaluation order and permuting particles together with their stream ids
/// permutes the trajectories exactly.
struct ParticleEnsemble {
  TorusGrid x_grid, y_grid;
  std::vector<Point> xs, ys;
  std::vector<std::uint64_t> stream_ids;
  std::uint64_t seed = 0;
  std::uint64_t step_count = 0;
  double t = 0.0;

  std::size_t size() const { return xs.size(); }
};

/// Whether the ascent side's noise runs on the eta-scaled clock (the form the
/// mean-field analysis is stated for) or on the plain clock with eta on the
/// drift only (the literal particle dynamics).
enum class NoiseConvention { wgda, literal };

namespace detail {

/// Inverse-CDF draw from a piecewise-constant density along one axis slice.
/// Cell i is centered on node i*h, matching the midpoint-rule reading of the
/// grid values. `weights` need not be normalized; `u` is uniform in [0,1).
inline double sample_axis(std::span<const double> weights, double u, double h, double length) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = u * total;
  double acc = 0.0;
  const std::size_t n = weights.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double next = acc + weights[i];
    if (target < next || i + 1 == n) {
      const double frac = weights[i] > 0.0 ? (target - acc) / weights[i] : 0.5;
      const double pos =
          (static_cast<double>(i) - 0.5 + std::min(std::max(frac, 0.0), 1.0)) * h;
      const double r = std::fmod(pos, length);
      return r < 0.0 ? r + length : r;
    }
    acc = next;
  }
  return 0.0;
}

/// Ascending-order accumulation: permutation-invariant, so reshuffling the
/// particles (with their noise streams) reproduces the permuted trajectory
/// bit for bit.
inline double sorted_mean(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double v : terms) s += v;
  return s / static_cast<double>(terms.size());
}

}  // namespace detail

/// I.i.d. sample of one torus point from a grid density: inverse CDF in 1D,
/// axis-0 marginal followed by the conditional along axis 1 in 2D.
inline Point sample_measure(const GridMeasure& m, double u0, double u1) {
  const TorusGrid& g = m.grid;
  if (g.dim == 1) return {detail::sample_axis(m.density, u0, g.spacing(0), g.length[0]), 0.0};
  std::vector<double> marginal(g.n, 0.0);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) marginal[i] += m.density[g.index(i, j)];
  const double x0 = detail::sample_axis(marginal, u0, g.spacing(0), g.length[0]);
  const int row = g.wrap(static_cast<int>(std::floor(x0 / g.spacing(0) + 0.5)));
  std::vector<double> cond(g.n);
  for (int j = 0; j < g.n; ++j) cond[j] = m.density[g.index(row, j)];
  return {x0, detail::sample_axis(cond, u1, g.spacing(1), g.length[1])};
}

inline ParticleEnsemble init_ensemble(std::size_t n, const GridMeasure& mu0,
                                      const GridMeasure& nu0, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("init_ensemble: need at least one particle");
  ParticleEnsemble e;
  e.x_grid = mu0.grid;
  e.y_grid = nu0.grid;
  e.seed = seed;
  e.xs.resize(n);
  e.ys.resize(n);
  e.stream_ids.resize(n);
  CounterRng rng{seed};
  for (std::size_t i = 0; i < n; ++i) {
    e.stream_ids[i] = i;
    e.xs[i] = sample_measure(mu0, rng.uniform01(i, 0, 0), rng.uniform01(i, 0, 1));
    e.ys[i] = sample_measure(nu0, rng.uniform01(i, 0, 2), rng.uniform01(i, 0, 3));
  }
  return e;
}

/// One Euler-Maruyama step of the noisy GDA particle dynamics:
///   X_i += -mean_j grad_x K(X_i, Y_j) dt + sqrt(2 tau dt) zeta_i
///   Y_i += +eta mean_j grad_y K(X_j, Y_i) dt + sqrt(2 tau eta dt) zeta'_i
/// (literal convention drops eta from the Y noise clock). Drift sums use the
/// kernel's separable terms when available, otherwise the direct O(N^2) sum.
inline ParticleEnsemble particle_step(const ParticleEnsemble& e, const GameKernel& k, double tau,
                                      double eta, double dt,
                                      NoiseConvention conv = NoiseConvention::wgda) {
  if (!(dt > 0.0)) throw std::invalid_argument("particle_step: dt must be positive");
  if (tau < 0.0 || eta < 0.0) throw std::invalid_argument("particle_step: tau, eta must be >= 0");
  const std::size_t n = e.size();
  ParticleEnsemble out = e;
  std::vector<Point> drift_x(n, Point{0.0, 0.0}), drift_y(n, Point{0.0, 0.0});

  std::vector<double> terms(n);
  if (!k.low_rank.empty()) {
    for (const RankOneTerm& term : k.low_rank) {
      for (std::size_t j = 0; j < n; ++j) terms[j] = term.gy(e.ys[j]);
      const double mean_g = detail::sorted_mean(terms);
      for (std::size_t j = 0; j < n; ++j) terms[j] = term.fx(e.xs[j]);
      const double mean_f = detail::sorted_mean(terms);
      for (std::size_t i = 0; i < n; ++i) {
        const Point gf = term.fx_grad(e.xs[i]);
        const Point gg = term.gy_grad(e.ys[i]);
        for (int a = 0; a < 2; ++a) {
          drift_x[i][a] += gf[a] * mean_g;
          drift_y[i][a] += mean_f * gg[a];
        }
      }
    }
  } else {
    std::vector<double> t2(n), t3(n), t4(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const Point gxv = k.grad_x(e.xs[i], e.ys[j]);
        const Point gyv = k.grad_y(e.xs[j], e.ys[i]);
        terms[j] = gxv[0];
        t2[j] = gxv[1];
        t3[j] = gyv[0];
        t4[j] = gyv[1];
      }
      drift_x[i][0] = detail::sorted_mean(terms);
      drift_x[i][1] = detail::sorted_mean(t2);
      drift_y[i][0] = detail::sorted_mean(t3);
      drift_y[i][1] = detail::sorted_mean(t4);
    }
  }

  const CounterRng rng{e.seed};
  const std::uint64_t step_key = 1 + e.step_count;  // step 0 is the init draw
  const double sx = std::sqrt(2.0 * tau * dt);
  const double sy = conv == NoiseConvention::wgda ? std::sqrt(2.0 * tau * eta * dt)
                                                  : std::sqrt(2.0 * tau * dt);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t sid = e.stream_ids[i];
    for (int a = 0; a < e.x_grid.dim; ++a) {
      const double z = rng.gaussian(sid, step_key, static_cast<std::uint64_t>(a));
      out.xs[i][a] = e.x_grid.wrap_coord(a, e.xs[i][a] - drift_x[i][a] * dt + sx * z);
    }
    for (int a = 0; a < e.y_grid.dim; ++a) {
      const double z = rng.gaussian(sid, step_key, static_cast<std::uint64_t>(2 + a));
      out.ys[i][a] = e.y_grid.wrap_coord(a, e.ys[i][a] + eta * drift_y[i][a] * dt + sy * z);
    }
  }
  out.step_count = e.step_count + 1;
  out.t = e.t + dt;
  return out;
}

/// Silverman bandwidth per axis on the circle: 1.06 sigma N^{-1/5} with sigma
/// the standard deviation of deviations from the circular mean.
inline double silverman_bandwidth(std::span<const Point> pts, const TorusGrid& g, int axis) {
  const std::size_t n = pts.size();
  double cs = 0.0, sn = 0.0;
  const double scale = kTwoPi / g.length[axis];
  for (const Point& p : pts) {
    cs += std::cos(p[axis] * scale);
    sn += std::sin(p[axis] * scale);
  }
  const double mean = g.wrap_coord(axis, std::atan2(sn, cs) / scale);
  double var = 0.0;
  for (const Point& p : pts) {
    const double d = g.wrap_diff(axis, p[axis], mean);
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double sigma = std::sqrt(var);
  const double bw = 1.06 * sigma * std::pow(static_cast<double>(n), -0.2);
  const double lo = 0.5 * g.spacing(axis);
  const double hi = 0.25 * g.length[axis];
  return std::min(std::max(bw, lo), hi);
}

/// Wrapped-Gaussian kernel density estimate of a point cloud on the grid,
/// truncated at five standard deviations and normalized. bandwidth <= 0
/// selects the Silverman rule per axis.
inline GridMeasure kde_wrapped(std::span<const Point> pts, const TorusGrid& g,
                               double bandwidth = 0.0) {
  if (pts.empty()) throw std::invalid_argument("kde_wrapped: empty point set");
  std::array<double, 2> bw{bandwidth, bandwidth};
  if (bandwidth <= 0.0)
    for (int a = 0; a < g.dim; ++a) bw[a] = silverman_bandwidth(pts, g, a);

  GridMeasure out{g, std::vector<double>(g.cells(), 0.0)};
  if (g.dim == 1) {
    const double h = g.spacing(0);
    const int window = std::min(g.n / 2, static_cast<int>(std::ceil(5.0 * bw[0] / h)));
    const double inv2b2 = 1.0 / (2.0 * bw[0] * bw[0]);
    for (const Point& p : pts) {
      const int c = static_cast<int>(std::floor(p[0] / h));
      for (int k = c - window; k <= c + window; ++k) {
        const double d = g.wrap_diff(0, g.spacing(0) * k, p[0]);
        out.density[g.wrap(k)] += std::exp(-d * d * inv2b2);
      }
    }
  } else {
    const double h0 = g.spacing(0), h1 = g.spacing(1);
    const int w0 = std::min(g.n / 2, static_cast<int>(std::ceil(5.0 * bw[0] / h0)));
    const int w1 = std::min(g.n / 2, static_cast<int>(std::ceil(5.0 * bw[1] / h1)));
    const double i0 = 1.0 / (2.0 * bw[0] * bw[0]), i1 = 1.0 / (2.0 * bw[1] * bw[1]);
    for (const Point& p : pts) {
      const int c0 = static_cast<int>(std::floor(p[0] / h0));
      const int c1 = static_cast<int>(std::floor(p[1] / h1));
      for (int k = c0 - w0; k <= c0 + w0; ++k) {
        const double d0 = g.wrap_diff(0, h0 * k, p[0]);
        const double e0 = std::exp(-d0 * d0 * i0);
        for (int l = c1 - w1; l <= c1 + w1; ++l) {
          const double d1 = g.wrap_diff(1, h1 * l, p[1]);
          out.density[g.index(k, l)] += e0 * std::exp(-d1 * d1 * i1);
        }
      }
    }
  }
  double total = 0.0;
  for (double v : out.density) total += v;
  const double z = total * g.cell_volume();
  for (double& v : out.density) v /= z;
  return out;
}

inline GridMeasure empirical_density_x(const ParticleEnsemble& e, double bandwidth = 0.0) {
  return kde_wrapped(e.xs, e.x_grid, bandwidth);
}
inline GridMeasure empirical_density_y(const ParticleEnsemble& e, double bandwidth = 0.0) {
  return kde_wrapped(e.ys, e.y_grid, bandwidth);
}

struct ParticleRunOptions {
  double t_end = 2.0;
  double dt = 1e-3;
  int record_every = 200;
  double bandwidth = 0.0;  // 0 = Silverman
  bool paired_pde = false;
  NoiseConvention convention = NoiseConvention::wgda;
};

struct ParticleComparisonRow {
  double t = 0.0;
  double kl_mu = 0.0, tv_mu = 0.0;  // KDE(ensemble x) against the PDE mu_t
  double kl_nu = 0.0, tv_nu = 0.0;
};

struct ParticleRunResult {
  ParticleEnsemble final_ensemble;
  std::vector<ParticleEnsemble> checkpoints;
  std::vector<ParticleComparisonRow> comparison;  // filled when paired_pde
  std::size_t steps = 0;
};

/// Euler-Maruyama run on a (possibly annealed) schedule, optionally paired
/// with the mean-field PDE integrated on the same clock. The PDE sub-steps
/// whenever the particle dt exceeds its own stability bound, so checkpoint
/// times align exactly.
inline ParticleRunResult run_particles(const GameKernel& kernel, const KernelMatrix* matrix,
                                       std::size_t n, const ScaleSchedule& sched,
                                       const GridMeasure& mu0, const GridMeasure& nu0,
                                       std::uint64_t seed, const ParticleRunOptions& opt) {
  if (opt.paired_pde && matrix == nullptr)
    throw std::invalid_argument("run_particles: paired PDE run needs the kernel matrix");
  ParticleRunResult out;
  ParticleEnsemble ens = init_ensemble(n, mu0, nu0, seed);
  GdaState pde{mu0, nu0, 0.0};
  std::vector<double> scratch;

  auto compare = [&]() {
    if (!opt.paired_pde) return;
    ParticleComparisonRow row;
    row.t = ens.t;
    const GridMeasure kx = empirical_density_x(ens, opt.bandwidth);
    const GridMeasure ky = empirical_density_y(ens, opt.bandwidth);
    row.kl_mu = relative_entropy(kx, pde.mu);
    row.tv_mu = total_variation(kx, pde.mu);
    row.kl_nu = relative_entropy(ky, pde.nu);
    row.tv_nu = total_variation(ky, pde.nu);
    out.comparison.push_back(row);
  };

  out.checkpoints.push_back(ens);
  compare();

  std::size_t step = 0;
  while (ens.t < opt.t_end) {
    double dt = opt.dt;
    if (ens.t + dt > opt.t_end) dt = opt.t_end - ens.t;
    const double tau = sched.tau_at(ens.t);
    const double eta = sched.eta_at(ens.t);
    ens = particle_step(ens, kernel, tau, eta, dt, opt.convention);
    if (opt.paired_pde) {
      const double dt_max = gda_dt_max(matrix->x_grid, matrix->y_grid, tau, eta, matrix->lip);
      const int sub = std::max(1, static_cast<int>(std::ceil(dt / dt_max)));
      const double sdt = dt / sub;
      for (int s = 0; s < sub; ++s) {
        auto v_nu = potential_on_x(*matrix, pde.nu);
        auto v_mu = potential_on_y(*matrix, pde.mu);
        fp::step(matrix->x_grid, pde.mu.density, v_nu, tau, sdt, scratch);
        for (double& u : v_mu) u = -u;
        fp::step(matrix->y_grid, pde.nu.density, v_mu, tau, eta * sdt, scratch);
      }
      pde.t = ens.t;
    }
    ++step;
    const bool at_end = ens.t >= opt.t_end;
    if (step % static_cast<std::size_t>(std::max(1, opt.record_every)) == 0 || at_end) {
      out.checkpoints.push_back(ens);
      compare();
    }
  }
  out.final_ensemble = std::move(ens);
  out.steps = step;
  return out;
}

}  // namespace mfgda
