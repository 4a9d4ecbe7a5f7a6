#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfgda/torus.hpp"

namespace mfgda {

/// Probability measure on a torus grid, stored as the density value dmu/dx
/// at each node. Invariants: density[i] >= 0 and sum(density) * cell_volume
/// equals 1 up to round-off. All reductions over cells run in fixed index
/// order so results are bitwise deterministic.
struct GridMeasure {
  TorusGrid grid;
  std::vector<double> density;

  double mass() const {
    double s = 0.0;
    for (double v : density) s += v;
    return s * grid.cell_volume();
  }
};

namespace detail {

inline void require_same_grid(const GridMeasure& a, const GridMeasure& b) {
  if (a.grid != b.grid) throw std::invalid_argument("measure operation: grid mismatch");
}

/// Sum in ascending value order. A circular shift of the input permutes the
/// per-cell terms, so value-ordered accumulation makes the functionals below
/// bitwise invariant under shifts while staying deterministic.
inline double sorted_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double v : terms) s += v;
  return s;
}

}  // namespace detail

/// The uniform measure, density identically 1/L^dim.
inline GridMeasure uniform(const TorusGrid& grid) {
  double vol = 1.0;
  for (int a = 0; a < grid.dim; ++a) vol *= grid.length[a];
  return {grid, std::vector<double>(grid.cells(), 1.0 / vol)};
}

/// Gibbs measure with density proportional to exp(sign * potential / tau).
/// Normalized by the plain cell sum; overflow is guarded by subtracting the
/// max exponent before exponentiation. Output is strictly positive.
inline GridMeasure gibbs(const TorusGrid& grid, std::span<const double> potential,
                         int sign, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("gibbs: tau must be positive");
  if (potential.size() != grid.cells()) throw std::invalid_argument("gibbs: potential size mismatch");
  if (sign != 1 && sign != -1) throw std::invalid_argument("gibbs: sign must be +1 or -1");

  const std::size_t m = potential.size();
  std::vector<double> g(m);
  double gmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(potential[i])) throw std::invalid_argument("gibbs: potential must be finite");
    g[i] = sign * potential[i] / tau;
    gmax = std::max(gmax, g[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    g[i] = std::exp(g[i] - gmax);
    sum += g[i];
  }
  const double z = sum * grid.cell_volume();
  for (std::size_t i = 0; i < m; ++i) g[i] /= z;
  return {grid, std::move(g)};
}

/// Shannon entropy -sum rho log rho * vol, with 0 log 0 := 0.
inline double entropy(const GridMeasure& mu) {
  std::vector<double> terms;
  terms.reserve(mu.density.size());
  for (double r : mu.density)
    if (r > 0.0) terms.push_back(-r * std::log(r));
  return detail::sorted_sum(terms) * mu.grid.cell_volume();
}

/// KL divergence H(mu1 | mu2). Returns +inf when mu1 puts mass where mu2
/// vanishes; tiny negative round-off is clamped to 0.
inline double relative_entropy(const GridMeasure& mu1, const GridMeasure& mu2) {
  detail::require_same_grid(mu1, mu2);
  std::vector<double> terms;
  terms.reserve(mu1.density.size());
  for (std::size_t i = 0; i < mu1.density.size(); ++i) {
    const double r1 = mu1.density[i];
    if (r1 <= 0.0) continue;
    const double r2 = mu2.density[i];
    if (r2 <= 0.0) return std::numeric_limits<double>::infinity();
    terms.push_back(r1 * std::log(r1 / r2));
  }
  const double s = detail::sorted_sum(terms) * mu1.grid.cell_volume();
  return s < 0.0 ? 0.0 : s;
}

/// Relative Fisher information I(mu1 | mu2) with the discrete gradient taken
/// as central differences with periodic wrap per axis. mu2 must be strictly
/// positive.
inline double relative_fisher(const GridMeasure& mu1, const GridMeasure& mu2) {
  detail::require_same_grid(mu1, mu2);
  const TorusGrid& g = mu1.grid;
  for (double r : mu2.density)
    if (!(r > 0.0)) throw std::invalid_argument("relative_fisher: mu2 must be strictly positive");

  const std::size_t m = mu1.density.size();
  std::vector<double> logr(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double r1 = mu1.density[i];
    logr[i] = r1 > 0.0 ? std::log(r1 / mu2.density[i]) : -std::numeric_limits<double>::infinity();
  }

  std::vector<double> terms;
  terms.reserve(mu1.density.size());
  if (g.dim == 1) {
    const double inv2h = 1.0 / (2.0 * g.spacing(0));
    for (int i = 0; i < g.n; ++i) {
      const double r1 = mu1.density[i];
      if (r1 <= 0.0) continue;
      const double d = (logr[g.wrap(i + 1)] - logr[g.wrap(i - 1)]) * inv2h;
      terms.push_back(d * d * r1);
    }
  } else {
    const double inv2h0 = 1.0 / (2.0 * g.spacing(0));
    const double inv2h1 = 1.0 / (2.0 * g.spacing(1));
    for (int i = 0; i < g.n; ++i) {
      for (int j = 0; j < g.n; ++j) {
        const double r1 = mu1.density[g.index(i, j)];
        if (r1 <= 0.0) continue;
        const double d0 = (logr[g.index(i + 1, j)] - logr[g.index(i - 1, j)]) * inv2h0;
        const double d1 = (logr[g.index(i, j + 1)] - logr[g.index(i, j - 1)]) * inv2h1;
        terms.push_back((d0 * d0 + d1 * d1) * r1);
      }
    }
  }
  return detail::sorted_sum(terms) * g.cell_volume();
}

/// Total variation distance in the 1/2-L1 convention, so Pinsker reads
/// TV <= sqrt(KL/2).
inline double total_variation(const GridMeasure& mu1, const GridMeasure& mu2) {
  detail::require_same_grid(mu1, mu2);
  std::vector<double> terms(mu1.density.size());
  for (std::size_t i = 0; i < mu1.density.size(); ++i)
    terms[i] = std::abs(mu1.density[i] - mu2.density[i]);
  return 0.5 * detail::sorted_sum(terms) * mu1.grid.cell_volume();
}

/// Convex mixture (1-w)*a + w*b of two densities on the same grid.
inline GridMeasure mix(const GridMeasure& a, const GridMeasure& b, double w) {
  detail::require_same_grid(a, b);
  GridMeasure out{a.grid, std::vector<double>(a.density.size())};
  for (std::size_t i = 0; i < a.density.size(); ++i)
    out.density[i] = (1.0 - w) * a.density[i] + w * b.density[i];
  return out;
}

/// Circular shift by k cells per axis (test utility; functionals on the torus
/// are invariant under it).
inline GridMeasure circular_shift(const GridMeasure& mu, int k0, int k1 = 0) {
  const TorusGrid& g = mu.grid;
  GridMeasure out{g, std::vector<double>(mu.density.size())};
  if (g.dim == 1) {
    for (int i = 0; i < g.n; ++i) out.density[g.wrap(i + k0)] = mu.density[i];
  } else {
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        out.density[g.index(i + k0, j + k1)] = mu.density[g.index(i, j)];
  }
  return out;
}

inline double sup_distance(const GridMeasure& a, const GridMeasure& b) {
  detail::require_same_grid(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.density.size(); ++i)
    m = std::max(m, std::abs(a.density[i] - b.density[i]));
  return m;
}

}  // namespace mfgda
