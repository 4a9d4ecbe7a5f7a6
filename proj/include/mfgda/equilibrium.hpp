#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mfgda/kernel.hpp"
#include "mfgda/measure.hpp"

namespace mfgda {

/// Payoff kernel tabulated on the product grid, values[i*cy + j] = K(x_i, y_j).
/// A transposed copy is kept so both potential contractions stream memory
/// sequentially. Gradient tables are optional.
struct KernelMatrix {
  TorusGrid x_grid, y_grid;
  std::vector<double> values;             // cx * cy, row-major in x
  std::vector<double> values_t;           // cy * cx transpose
  std::vector<double> gradx_values;       // dim_x * cx * cy when built
  std::vector<double> grady_values;       // dim_y * cx * cy when built
  double sup_norm = 0.0, kxy_bound = 0.0, lip = 0.0;

  std::size_t cx() const { return x_grid.cells(); }
  std::size_t cy() const { return y_grid.cells(); }
};

inline KernelMatrix make_kernel_matrix(const GameKernel& k, bool with_gradients = false) {
  KernelMatrix m;
  m.x_grid = k.x_grid;
  m.y_grid = k.y_grid;
  m.sup_norm = k.sup_norm;
  m.kxy_bound = k.kxy_bound;
  m.lip = k.lip;
  const std::size_t cx = m.cx(), cy = m.cy();
  m.values.resize(cx * cy);
  m.values_t.resize(cx * cy);
  if (with_gradients) {
    m.gradx_values.resize(static_cast<std::size_t>(k.x_grid.dim) * cx * cy);
    m.grady_values.resize(static_cast<std::size_t>(k.y_grid.dim) * cx * cy);
  }
  for (std::size_t i = 0; i < cx; ++i) {
    const Point xi = k.x_grid.node_coords(i);
    for (std::size_t j = 0; j < cy; ++j) {
      const Point yj = k.y_grid.node_coords(j);
      const double v = k.eval(xi, yj);
      m.values[i * cy + j] = v;
      m.values_t[j * cx + i] = v;
      if (with_gradients) {
        const Point gx = k.grad_x(xi, yj);
        const Point gy = k.grad_y(xi, yj);
        for (int a = 0; a < k.x_grid.dim; ++a) m.gradx_values[(a * cx + i) * cy + j] = gx[a];
        for (int a = 0; a < k.y_grid.dim; ++a) m.grady_values[(a * cx + i) * cy + j] = gy[a];
      }
    }
  }
  return m;
}

/// V_nu(x_i) = int K(x_i, y) dnu(y), one value per x node.
inline std::vector<double> potential_on_x(const KernelMatrix& m, const GridMeasure& nu) {
  if (nu.grid != m.y_grid) throw std::invalid_argument("potential_on_x: grid mismatch");
  const std::size_t cx = m.cx(), cy = m.cy();
  const double vol = m.y_grid.cell_volume();
  std::vector<double> out(cx);
  for (std::size_t i = 0; i < cx; ++i) {
    const double* row = m.values.data() + i * cy;
    double s = 0.0;
    for (std::size_t j = 0; j < cy; ++j) s += row[j] * nu.density[j];
    out[i] = s * vol;
  }
  return out;
}

/// V_mu(y_j) = int K(x, y_j) dmu(x), one value per y node.
inline std::vector<double> potential_on_y(const KernelMatrix& m, const GridMeasure& mu) {
  if (mu.grid != m.x_grid) throw std::invalid_argument("potential_on_y: grid mismatch");
  const std::size_t cx = m.cx(), cy = m.cy();
  const double vol = m.x_grid.cell_volume();
  std::vector<double> out(cy);
  for (std::size_t j = 0; j < cy; ++j) {
    const double* col = m.values_t.data() + j * cx;
    double s = 0.0;
    for (std::size_t i = 0; i < cx; ++i) s += col[i] * mu.density[i];
    out[j] = s * vol;
  }
  return out;
}

/// Best-response context: the tabulated kernel plus the temperature.
struct BestResponseContext {
  const KernelMatrix* matrix = nullptr;
  double tau = 1.0;

  BestResponseContext(const KernelMatrix& m, double tau_) : matrix(&m), tau(tau_) {
    if (!(tau > 0.0)) throw std::invalid_argument("BestResponseContext: tau must be positive");
  }
};

/// K+ mu: Gibbs measure on Y proportional to exp(+ V_mu / tau).
inline GridMeasure k_plus(const BestResponseContext& ctx, const GridMeasure& mu) {
  const auto v = potential_on_y(*ctx.matrix, mu);
  return gibbs(ctx.matrix->y_grid, v, +1, ctx.tau);
}

/// K- nu: Gibbs measure on X proportional to exp(- V_nu / tau).
inline GridMeasure k_minus(const BestResponseContext& ctx, const GridMeasure& nu) {
  const auto v = potential_on_x(*ctx.matrix, nu);
  return gibbs(ctx.matrix->x_grid, v, -1, ctx.tau);
}

namespace detail {

inline double log_sum_exp_cells(const std::vector<double>& g, double vol) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : g) m = std::max(m, v);
  double s = 0.0;
  for (double v : g) s += std::exp(v - m);
  return m + std::log(s * vol);
}

}  // namespace detail

/// log Z+(mu) = log int exp(V_mu / tau) dy, evaluated by log-sum-exp.
inline double log_partition_plus(const BestResponseContext& ctx, const GridMeasure& mu) {
  auto v = potential_on_y(*ctx.matrix, mu);
  for (double& x : v) x /= ctx.tau;
  return detail::log_sum_exp_cells(v, ctx.matrix->y_grid.cell_volume());
}

/// log Z-(nu) = log int exp(-V_nu / tau) dx.
inline double log_partition_minus(const BestResponseContext& ctx, const GridMeasure& nu) {
  auto v = potential_on_x(*ctx.matrix, nu);
  for (double& x : v) x /= -ctx.tau;
  return detail::log_sum_exp_cells(v, ctx.matrix->x_grid.cell_volume());
}

/// Mixed Nash equilibrium of the entropy-regularized game, as the fixed point
/// mu* = K-(nu*), nu* = K+(mu*). residual is the max of the two best-response
/// TV gaps at the returned iterate.
struct MnePair {
  GridMeasure mu_star;
  GridMeasure nu_star;
  double tau = 1.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped alternating best response from a caller-supplied starting pair.
/// Each sweep does nu <- (1-theta) nu + theta K+(mu), then the same for mu.
inline MnePair fixed_point_mne_from(const BestResponseContext& ctx, GridMeasure mu, GridMeasure nu,
                                    double theta = 0.5, double tol = 1e-10, int max_iter = 10000) {
  if (!(theta > 0.0) || theta > 1.0) throw std::invalid_argument("fixed_point_mne: theta in (0,1]");
  MnePair out;
  out.tau = ctx.tau;
  GridMeasure bp = k_plus(ctx, mu);
  for (int it = 1; it <= max_iter; ++it) {
    nu = mix(nu, bp, theta);
    const GridMeasure bm = k_minus(ctx, nu);
    mu = mix(mu, bm, theta);
    bp = k_plus(ctx, mu);
    const double res = std::max(total_variation(mu, k_minus(ctx, nu)), total_variation(nu, bp));
    out.iterations = it;
    out.residual = res;
    if (res < tol) {
      out.converged = true;
      break;
    }
  }
  out.mu_star = std::move(mu);
  out.nu_star = std::move(nu);
  return out;
}

inline MnePair fixed_point_mne(const BestResponseContext& ctx, double theta = 0.5,
                               double tol = 1e-10, int max_iter = 10000) {
  return fixed_point_mne_from(ctx, uniform(ctx.matrix->x_grid), uniform(ctx.matrix->y_grid),
                              theta, tol, max_iter);
}

/// Holley-Stroock lower bound on the log-Sobolev constant of the Gibbs
/// best-response family: lambda0 * exp(-2 ||K||inf / tau). lambda0 is the LSI
/// constant of the uniform measure, 1 on the 2pi torus and scaled by
/// (2pi/L)^2 per axis; the minimum over both state spaces is used.
inline double lsi_lower_bound(double sup_norm, double tau, const TorusGrid& x_grid,
                              const TorusGrid& y_grid, double lambda0 = 1.0) {
  if (!(tau > 0.0) || !(lambda0 > 0.0))
    throw std::invalid_argument("lsi_lower_bound: tau and lambda0 must be positive");
  double scale = std::numeric_limits<double>::infinity();
  for (int a = 0; a < x_grid.dim; ++a)
    scale = std::min(scale, (kTwoPi / x_grid.length[a]) * (kTwoPi / x_grid.length[a]));
  for (int a = 0; a < y_grid.dim; ++a)
    scale = std::min(scale, (kTwoPi / y_grid.length[a]) * (kTwoPi / y_grid.length[a]));
  return lambda0 * scale * std::exp(-2.0 * sup_norm / tau);
}

inline double lsi_lower_bound(const GameKernel& k, double tau, double lambda0 = 1.0) {
  return lsi_lower_bound(k.sup_norm, tau, k.x_grid, k.y_grid, lambda0);
}

/// Effective condition number kappa = K_xy / (tau * lambda_LS).
inline double condition_kappa(double kxy_bound, double tau, double lambda_ls) {
  if (!(tau > 0.0) || !(lambda_ls > 0.0) || !(kxy_bound > 0.0))
    throw std::invalid_argument("condition_kappa: inputs must be positive");
  return kxy_bound / (tau * lambda_ls);
}

/// Epsilon-Nash temperature threshold: the regularized MNE at any tau below
/// tau_max is an epsilon-Nash equilibrium of the unregularized game. The ball
/// volume V_delta is evaluated exactly on the flat torus as the product of
/// per-axis interval volumes, minimized over the two state spaces.
struct EpsilonNash {
  double epsilon = 0.0;
  double delta = 0.0;
  double v_delta = 0.0;
  double tau_max = 0.0;
};

inline double torus_ball_volume_fraction(const TorusGrid& g, double delta) {
  double v = 1.0;
  for (int a = 0; a < g.dim; ++a) v *= std::min(2.0 * delta, g.length[a]) / g.length[a];
  return v;
}

inline EpsilonNash epsilon_nash_tau(double epsilon, const GameKernel& k) {
  if (!(epsilon > 0.0) || epsilon >= 4.0 * k.sup_norm)
    throw std::invalid_argument("epsilon_nash_tau: need 0 < epsilon < 4 ||K||inf");
  EpsilonNash r;
  r.epsilon = epsilon;
  r.delta = epsilon / (2.0 * k.lip);
  r.v_delta = std::min(torus_ball_volume_fraction(k.x_grid, r.delta),
                       torus_ball_volume_fraction(k.y_grid, r.delta));
  const double arg = 2.0 * (1.0 - r.v_delta) / r.v_delta * (4.0 * k.sup_norm / epsilon - 1.0);
  if (!(arg > 1.0)) throw std::invalid_argument("epsilon_nash_tau: epsilon too large, log argument <= 1");
  r.tau_max = epsilon / (4.0 * std::log(arg));
  return r;
}

/// Inverse map: epsilon(tau) = beta * tau * log(1/tau), valid for small tau
/// with beta exceeding max(dim_X, dim_Y) + 1.
inline double epsilon_of_tau(double tau, double beta) {
  if (!(tau > 0.0) || tau >= 1.0) throw std::invalid_argument("epsilon_of_tau: need tau in (0,1)");
  return beta * tau * std::log(1.0 / tau);
}

/// Default beta for epsilon_of_tau: dim_X v dim_Y + 1 plus a unit margin.
inline double epsilon_nash_beta(const GameKernel& k, double margin = 1.0) {
  return std::max(k.x_grid.dim, k.y_grid.dim) + 1.0 + margin;
}

}  // namespace mfgda
