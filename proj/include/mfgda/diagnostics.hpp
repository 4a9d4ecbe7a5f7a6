#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfgda/equilibrium.hpp"
#include "mfgda/measure.hpp"

namespace mfgda {

/// Scalar functionals recorded along a trajectory. The CSV schema exposes
/// t..fisher_nu; the chain Fisher terms feed the derivative-inequality
/// checks and stay internal.
struct DiagnosticsRecord {
  double t = 0.0, tau = 0.0, eta = 0.0;
  double e_tau = 0.0, e_0 = 0.0;
  double l1 = 0.0, l2 = 0.0, l3 = 0.0, l4 = 0.0;
  double lyap = 0.0;        // L  = L1 + gamma L2
  double lyap_tilde = 0.0;  // L~ = L3 + gamma L4
  double kl_mu_star = 0.0, kl_nu_star = 0.0;
  double ni = 0.0;
  double fisher_mu = 0.0;        // I(mu | K- nu)
  double fisher_nu = 0.0;        // I(nu | K+ mu)
  double fisher_mu_chain = 0.0;  // I(mu | K-(K+ mu))
  double fisher_nu_chain = 0.0;  // I(nu | K+(K- nu))
  double kl_nu_br = 0.0;         // H(nu | K+ mu) = l2 / tau
  double kl_mu_br = 0.0;         // H(mu | K- nu) = l4 / tau
  double kl_mu_chain = 0.0;      // H(mu | K-(K+ mu)), sandwich upper bound / tau
  double kl_nu_chain = 0.0;      // H(nu | K+(K- nu))
  double soft_gap = 0.0;         // L2 + L4, the regularized duality gap
};

/// E_0 = int int K dnu dmu and E_tau = E_0 - tau H(mu) + tau H(nu).
struct EnergyPair {
  double e_tau = 0.0;
  double e_0 = 0.0;
};

inline EnergyPair energy(const KernelMatrix& m, const GridMeasure& mu, const GridMeasure& nu,
                         double tau) {
  const auto v = potential_on_x(m, nu);
  double e0 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) e0 += v[i] * mu.density[i];
  e0 *= mu.grid.cell_volume();
  return {e0 - tau * entropy(mu) + tau * entropy(nu), e0};
}

/// E1(mu) = max_nu E_tau(mu, nu) = -tau H(mu) + tau log Z+(mu).
inline double best_response_energy_mu(const BestResponseContext& ctx, const GridMeasure& mu) {
  return -ctx.tau * entropy(mu) + ctx.tau * log_partition_plus(ctx, mu);
}

/// E2(nu) = min_mu E_tau(mu, nu) = tau H(nu) - tau log Z-(nu).
inline double best_response_energy_nu(const BestResponseContext& ctx, const GridMeasure& nu) {
  return ctx.tau * entropy(nu) - ctx.tau * log_partition_minus(ctx, nu);
}

struct LyapunovSlice {
  double l1 = 0.0, l2 = 0.0, l3 = 0.0, l4 = 0.0;
  double lyap = 0.0, lyap_tilde = 0.0;
};

/// All four gap functionals at (mu, nu), measured against the supplied MNE:
///   L1 = E1(mu) - E1(mu*)          L2 = tau H(nu | K+ mu)
///   L3 = E2(nu*) - E2(nu)          L4 = tau H(mu | K- nu)
/// plus the gamma-weighted Lyapunov combinations.
inline LyapunovSlice lyapunov_all(const BestResponseContext& ctx, const MnePair& mne,
                                  const GridMeasure& mu, const GridMeasure& nu, double gamma) {
  if (mne.tau != ctx.tau) throw std::invalid_argument("lyapunov_all: tau mismatch between ctx and MNE");
  LyapunovSlice s;
  s.l1 = best_response_energy_mu(ctx, mu) - best_response_energy_mu(ctx, mne.mu_star);
  s.l2 = ctx.tau * relative_entropy(nu, k_plus(ctx, mu));
  s.l3 = best_response_energy_nu(ctx, mne.nu_star) - best_response_energy_nu(ctx, nu);
  s.l4 = ctx.tau * relative_entropy(mu, k_minus(ctx, nu));
  s.lyap = s.l1 + gamma * s.l2;
  s.lyap_tilde = s.l3 + gamma * s.l4;
  return s;
}

/// L2 evaluated from its definition max_nu E - E rather than through the
/// relative-entropy identity; the two routes must agree to round-off.
inline double l2_definitional(const BestResponseContext& ctx, const KernelMatrix& m,
                              const GridMeasure& mu, const GridMeasure& nu) {
  const double max_e = best_response_energy_mu(ctx, mu);
  return max_e - energy(m, mu, nu, ctx.tau).e_tau;
}

/// L4 from its definition E - min_mu E.
inline double l4_definitional(const BestResponseContext& ctx, const KernelMatrix& m,
                              const GridMeasure& mu, const GridMeasure& nu) {
  const double min_e = best_response_energy_nu(ctx, nu);
  return energy(m, mu, nu, ctx.tau).e_tau - min_e;
}

namespace detail {

/// Max (or min) of nodal values refined by a per-axis 3-point quadratic fit
/// around the best node. Improves pure-strategy extremes to O(h^2) without
/// off-grid kernel evaluations.
inline double refined_extreme(const TorusGrid& g, std::span<const double> v, bool want_max) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (want_max ? v[i] > v[best] : v[i] < v[best]) best = i;
  const double f0 = v[best];
  double out = f0;
  auto axis_correction = [&](double fm, double fp) {
    const double denom = fm - 2.0 * f0 + fp;
    if (want_max ? denom >= -1e-300 : denom <= 1e-300) return 0.0;
    const double d = fp - fm;
    return -d * d / (8.0 * denom);
  };
  if (g.dim == 1) {
    const int i = static_cast<int>(best);
    out += axis_correction(v[g.wrap(i - 1)], v[g.wrap(i + 1)]);
  } else {
    const int i = static_cast<int>(best) / g.n;
    const int j = static_cast<int>(best) % g.n;
    out += axis_correction(v[g.index(i - 1, j)], v[g.index(i + 1, j)]);
    out += axis_correction(v[g.index(i, j - 1)], v[g.index(i, j + 1)]);
  }
  return out;
}

}  // namespace detail

/// Nikaido-Isoda error of the unregularized game. The sup/inf over measures
/// is attained at Dirac masses by linearity, so it reduces to grid extremes
/// of the two interaction potentials.
inline double ni_error(const KernelMatrix& m, const GridMeasure& mu, const GridMeasure& nu) {
  const auto v_mu = potential_on_y(m, mu);
  const auto v_nu = potential_on_x(m, nu);
  const double hi = detail::refined_extreme(m.y_grid, v_mu, true);
  const double lo = detail::refined_extreme(m.x_grid, v_nu, false);
  return hi - lo;
}

/// Entropy sandwich margins: tau H(mu|mu*) <= L1(mu) <= tau H(mu|K-(K+ mu))
/// and the mirrored chain for nu. Margins are (mid - lhs) and (rhs - mid);
/// both must be nonnegative up to round-off.
struct SandwichReport {
  double mu_lhs = 0, mu_mid = 0, mu_rhs = 0;
  double nu_lhs = 0, nu_mid = 0, nu_rhs = 0;
  double worst_margin = 0;
};

inline SandwichReport sandwich_check(const BestResponseContext& ctx, const MnePair& mne,
                                     const GridMeasure& mu, const GridMeasure& nu) {
  SandwichReport r;
  r.mu_lhs = ctx.tau * relative_entropy(mu, mne.mu_star);
  r.mu_mid = best_response_energy_mu(ctx, mu) - best_response_energy_mu(ctx, mne.mu_star);
  r.mu_rhs = ctx.tau * relative_entropy(mu, k_minus(ctx, k_plus(ctx, mu)));
  r.nu_lhs = ctx.tau * relative_entropy(nu, mne.nu_star);
  r.nu_mid = best_response_energy_nu(ctx, mne.nu_star) - best_response_energy_nu(ctx, nu);
  r.nu_rhs = ctx.tau * relative_entropy(nu, k_plus(ctx, k_minus(ctx, nu)));
  r.worst_margin = std::min({r.mu_mid - r.mu_lhs, r.mu_rhs - r.mu_mid,
                             r.nu_mid - r.nu_lhs, r.nu_rhs - r.nu_mid});
  return r;
}

/// Least-squares fit of log(value) against t after discarding a burn-in
/// fraction of the points. alpha_hat is the negated slope. Non-positive
/// values after burn-in truncate the fit to the positive prefix.
struct RateFit {
  double alpha_hat = 0.0;
  double r_squared = 0.0;
  int points_used = 0;
  bool truncated = false;
};

inline RateFit rate_fit(std::span<const double> ts, std::span<const double> vs,
                        double burn_in_frac = 0.2) {
  if (ts.size() != vs.size()) throw std::invalid_argument("rate_fit: length mismatch");
  if (ts.size() < 10) throw std::invalid_argument("rate_fit: need at least 10 points");
  RateFit fit;
  const std::size_t start = static_cast<std::size_t>(burn_in_frac * ts.size());
  std::size_t end = ts.size();
  for (std::size_t i = start; i < ts.size(); ++i) {
    if (!(vs[i] > 0.0)) {
      end = i;
      fit.truncated = true;
      break;
    }
  }
  const std::size_t n = end > start ? end - start : 0;
  fit.points_used = static_cast<int>(n);
  if (n < 2) return fit;

  double st = 0, sy = 0;
  for (std::size_t i = start; i < end; ++i) {
    st += ts[i];
    sy += std::log(vs[i]);
  }
  const double mt = st / n, my = sy / n;
  double stt = 0, sty = 0, syy = 0;
  for (std::size_t i = start; i < end; ++i) {
    const double dt = ts[i] - mt, dy = std::log(vs[i]) - my;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (stt <= 0.0) return fit;
  const double slope = sty / stt;
  fit.alpha_hat = -slope;
  fit.r_squared = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
  return fit;
}

/// Cross entropy bound along a trajectory record:
/// tau H(nu|nu*) <= 2 tau H(nu|K+ mu) + (4 ||K||^2 / tau) H(mu|mu*) + slack.
inline bool cross_entropy_bound_holds(const DiagnosticsRecord& r, double sup_norm,
                                      double slack = 1e-8) {
  const double lhs = r.tau * r.kl_nu_star;
  const double rhs = 2.0 * r.l2 + (4.0 * sup_norm * sup_norm / r.tau) * r.kl_mu_star;
  return lhs <= rhs + slack;
}

/// Finite-difference audit of the dissipation inequalities along a recorded
/// trajectory. For consecutive records the forward difference of each gap
/// functional must not exceed its right-hand side, evaluated at the left
/// record, within the discretization-aware tolerance
/// 10 (dt + h^2) (1 + |rhs|).
struct DerivativeCheck {
  int total = 0;
  int passed = 0;
  double worst_excess = 0.0;  // max of lhs - (rhs + tol), negative when clean
  double pass_fraction() const { return total == 0 ? 1.0 : static_cast<double>(passed) / total; }
};

namespace detail {

inline void tally(DerivativeCheck& c, double lhs, double rhs, double base_tol) {
  const double tol = base_tol * (1.0 + std::abs(rhs));
  ++c.total;
  if (lhs <= rhs + tol) ++c.passed;
  c.worst_excess = std::max(c.worst_excess, lhs - rhs - tol);
}

}  // namespace detail

/// Descent-side inequalities (fast-ascent runs track these):
///   dL1/dt <= -tau/2 I(mu|K-(K+mu)) + Kxy^2 Diam(Y)^2 / tau * H(nu|K+mu)
///   dL2/dt <= -tau eta I(nu|K+mu) + tau/2 I(mu|K-(K+mu)) + 3 Kxy^2 Diam(Y)^2 / tau * H(nu|K+mu)
inline std::pair<DerivativeCheck, DerivativeCheck> check_ascent_derivatives(
    std::span<const DiagnosticsRecord> series, double kxy, double diam_y, double dt, double h) {
  DerivativeCheck c1, c2;
  const double base_tol = 10.0 * (dt + h * h);
  for (std::size_t i = 0; i + 1 < series.size(); ++i) {
    const DiagnosticsRecord& a = series[i];
    const DiagnosticsRecord& b = series[i + 1];
    const double dtt = b.t - a.t;
    if (!(dtt > 0.0)) continue;
    const double coupling = kxy * kxy * diam_y * diam_y / a.tau * a.kl_nu_br;
    detail::tally(c1, (b.l1 - a.l1) / dtt, -0.5 * a.tau * a.fisher_mu_chain + coupling, base_tol);
    detail::tally(c2, (b.l2 - a.l2) / dtt,
                  -a.tau * a.eta * a.fisher_nu + 0.5 * a.tau * a.fisher_mu_chain + 3.0 * coupling,
                  base_tol);
  }
  return {c1, c2};
}

/// Ascent-side inequalities (fast-descent runs track these):
///   dL3/dt <= -eta tau/2 I(nu|K+(K-nu)) + eta Kxy^2 Diam(X)^2 / tau * H(mu|K-nu)
///   dL4/dt <= -tau I(mu|K-nu) + eta tau/2 I(nu|K+(K-nu)) + 3 eta Kxy^2 Diam(X)^2 / tau * H(mu|K-nu)
inline std::pair<DerivativeCheck, DerivativeCheck> check_descent_derivatives(
    std::span<const DiagnosticsRecord> series, double kxy, double diam_x, double dt, double h) {
  DerivativeCheck c3, c4;
  const double base_tol = 10.0 * (dt + h * h);
  for (std::size_t i = 0; i + 1 < series.size(); ++i) {
    const DiagnosticsRecord& a = series[i];
    const DiagnosticsRecord& b = series[i + 1];
    const double dtt = b.t - a.t;
    if (!(dtt > 0.0)) continue;
    const double coupling = a.eta * kxy * kxy * diam_x * diam_x / a.tau * a.kl_mu_br;
    detail::tally(c3, (b.l3 - a.l3) / dtt, -0.5 * a.eta * a.tau * a.fisher_nu_chain + coupling,
                  base_tol);
    detail::tally(c4, (b.l4 - a.l4) / dtt,
                  -a.tau * a.fisher_mu + 0.5 * a.eta * a.tau * a.fisher_nu_chain + 3.0 * coupling,
                  base_tol);
  }
  return {c3, c4};
}

}  // namespace mfgda
