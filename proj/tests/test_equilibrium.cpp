#include <catch2/catch.hpp>

#include <cmath>

#include "mfgda/diagnostics.hpp"
#include "mfgda/equilibrium.hpp"
#include "mfgda/verify.hpp"
#include "oracles.hpp"

using namespace mfgda;

namespace {

const TorusGrid gx(1, 64);
const TorusGrid gy(1, 64);

GridMeasure near_dirac(const TorusGrid& g, int cell) {
  GridMeasure m{g, std::vector<double>(g.cells(), 0.0)};
  m.density[cell] = 1.0 / g.cell_volume();
  return m;
}

/// Scalar self-consistency oracle for the separable game: the fixed point
/// reduces to the two first trigonometric moments, iterated here with plain
/// quadrature entirely outside the library code.
struct SeparableMoments {
  double m1, m2;
};

SeparableMoments separable_moment_oracle(double b, double tau) {
  double m1 = 0.0, m2 = 0.0;
  for (int it = 0; it < 4000; ++it) {
    const double m2n = oracles::vm_mean_cos((m1 + b) / tau);
    const double m1n = oracles::vm_mean_cos(-m2n / tau);
    const double change = std::abs(m1n - m1) + std::abs(m2n - m2);
    m1 = 0.5 * (m1 + m1n);
    m2 = 0.5 * (m2 + m2n);
    if (change < 1e-13) break;
  }
  return {m1, m2};
}

double first_cos_moment(const GridMeasure& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.density.size(); ++i)
    s += std::cos(m.grid.node_coords(i)[0]) * m.density[i];
  return s * m.grid.cell_volume();
}

}  // namespace

TEST_CASE("best-response operators") {
  const GameKernel k = cos_diff_kernel(1.0, gx, gy);
  const KernelMatrix m = make_kernel_matrix(k);
  const BestResponseContext ctx(m, 1.0);

  SECTION("uniform mu maps to uniform nu for cos_diff") {
    const GridMeasure bp = k_plus(ctx, uniform(gx));
    CHECK(sup_distance(bp, uniform(gy)) < 1e-14);
  }

  SECTION("near-Dirac mu maps to the von Mises density") {
    const GridMeasure bp = k_plus(ctx, near_dirac(gx, 0));
    const double z = oracles::vm_partition(1.0);
    for (int j = 0; j < gy.n; j += 7)
      CHECK(bp.density[j] == Approx(std::exp(std::cos(gy.node(0, j))) / z).epsilon(1e-10));
  }

  SECTION("constant kernel maps anything to uniform") {
    const GameKernel flat = separable_kernel(0.0, 0.0, 1, 1, gx, gy);
    const KernelMatrix mf = make_kernel_matrix(flat);
    const BestResponseContext cf(mf, 0.7);
    const GridMeasure bp = k_plus(cf, random_measure(gx, 3));
    CHECK(sup_distance(bp, uniform(gy)) < 1e-14);
  }

  SECTION("outputs are strictly positive probability densities") {
    const GridMeasure bm = k_minus(ctx, random_measure(gy, 9));
    CHECK(bm.mass() == Approx(1.0).margin(1e-13));
    for (double v : bm.density) CHECK(v > 0.0);
  }
}

TEST_CASE("log partition functions") {
  const GameKernel k = cos_diff_kernel(1.0, gx, gy);
  const KernelMatrix m = make_kernel_matrix(k);
  const BestResponseContext ctx(m, 1.0);

  CHECK(log_partition_plus(ctx, uniform(gx)) == Approx(oracles::kLog2Pi).margin(1e-12));
  CHECK(log_partition_plus(ctx, near_dirac(gx, 0)) == Approx(oracles::kLogZ_1).margin(1e-10));
  CHECK(log_partition_minus(ctx, uniform(gy)) == Approx(oracles::kLog2Pi).margin(1e-12));

  SECTION("convexity along random segments") {
    for (int s = 0; s < 50; ++s) {
      const GridMeasure a = random_measure(gx, 900 + s);
      const GridMeasure b = random_measure(gx, 1900 + s);
      const double mid = log_partition_plus(ctx, mix(a, b, 0.5));
      const double avg = 0.5 * (log_partition_plus(ctx, a) + log_partition_plus(ctx, b));
      CHECK(mid <= avg + 1e-12);
    }
  }
}

TEST_CASE("fixed point solver finds the MNE") {
  SECTION("cos_diff has the uniform pair at every tau") {
    const GameKernel k = cos_diff_kernel(1.0, gx, gy);
    const KernelMatrix m = make_kernel_matrix(k);
    for (double tau : {0.3, 1.0, 3.0}) {
      const BestResponseContext ctx(m, tau);
      const MnePair mne = fixed_point_mne(ctx);
      REQUIRE(mne.converged);
      CHECK(mne.residual < 1e-10);
      CHECK(sup_distance(mne.mu_star, uniform(gx)) < 1e-8);
      CHECK(sup_distance(mne.nu_star, uniform(gy)) < 1e-8);
    }
  }

  SECTION("separable game against the scalar moment oracle") {
    const GameKernel k = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
    const KernelMatrix m = make_kernel_matrix(k);
    const BestResponseContext ctx(m, 1.0);
    const MnePair mne = fixed_point_mne(ctx);
    REQUIRE(mne.converged);
    const SeparableMoments want = separable_moment_oracle(0.5, 1.0);
    CHECK(first_cos_moment(mne.mu_star) == Approx(want.m1).margin(1e-8));
    CHECK(first_cos_moment(mne.nu_star) == Approx(want.m2).margin(1e-8));
    // and the pair satisfies the defining fixed-point equations
    CHECK(total_variation(mne.nu_star, k_plus(ctx, mne.mu_star)) < 1e-10);
    CHECK(total_variation(mne.mu_star, k_minus(ctx, mne.nu_star)) < 1e-10);
  }

  SECTION("large tau is a fast contraction") {
    const GameKernel k = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
    const KernelMatrix m = make_kernel_matrix(k);
    const BestResponseContext ctx(m, 10.0);
    const MnePair mne = fixed_point_mne(ctx);
    REQUIRE(mne.converged);
    CHECK(mne.iterations < 50);
  }

  SECTION("minmax equality at the equilibrium") {
    const GameKernel k = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
    const KernelMatrix m = make_kernel_matrix(k);
    const BestResponseContext ctx(m, 1.0);
    const MnePair mne = fixed_point_mne(ctx);
    const double minmax = energy(m, mne.mu_star, k_plus(ctx, mne.mu_star), 1.0).e_tau;
    const double maxmin = energy(m, k_minus(ctx, mne.nu_star), mne.nu_star, 1.0).e_tau;
    CHECK(std::abs(minmax - maxmin) < 1e-8);
  }

  SECTION("damping does not move the equilibrium") {
    const GameKernel k = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
    const KernelMatrix m = make_kernel_matrix(k);
    const BestResponseContext ctx(m, 1.0);
    const MnePair a = fixed_point_mne(ctx, 0.3);
    const MnePair b = fixed_point_mne(ctx, 1.0);
    CHECK(total_variation(a.mu_star, b.mu_star) < 1e-8);
    CHECK(total_variation(a.nu_star, b.nu_star) < 1e-8);
  }

  SECTION("non-convergence is reported, best iterate kept") {
    const GameKernel k = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
    const KernelMatrix m = make_kernel_matrix(k);
    const BestResponseContext ctx(m, 1.0);
    const MnePair mne = fixed_point_mne(ctx, 0.5, 1e-10, 3);
    CHECK_FALSE(mne.converged);
    CHECK(mne.iterations == 3);
    CHECK(mne.mu_star.mass() == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("best response maximizes the regularized payoff") {
  const GameKernel k = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
  const KernelMatrix m = make_kernel_matrix(k);
  const BestResponseContext ctx(m, 1.0);
  for (int s = 0; s < 5; ++s) {
    const GridMeasure mu = random_measure(gx, 100 + s);
    const double best = energy(m, mu, k_plus(ctx, mu), 1.0).e_tau;
    for (int p = 0; p < 20; ++p) {
      const GridMeasure pert = random_measure(gy, 5000 + 20 * s + p);
      CHECK(best >= energy(m, mu, pert, 1.0).e_tau - 1e-10);
    }
  }
}

TEST_CASE("LSI lower bound formula") {
  GameKernel k = cos_diff_kernel(1.0, gx, gy);
  SECTION("no tilt returns lambda0") {
    k.sup_norm = 0.0;
    CHECK(lsi_lower_bound(k, 1.0) == Approx(1.0));
    CHECK(lsi_lower_bound(k, 1.0, 2.5) == Approx(2.5));
  }
  SECTION("unit tilt at unit temperature") {
    CHECK(lsi_lower_bound(k, 1.0) == Approx(std::exp(-2.0)).epsilon(1e-14));
  }
  SECTION("exponential collapse as tau shrinks") {
    CHECK(lsi_lower_bound(k, 0.1) == Approx(std::exp(-20.0)).epsilon(1e-12));
    CHECK(lsi_lower_bound(k, 0.05) < lsi_lower_bound(k, 0.1));
  }
  SECTION("circumference rescales the base constant") {
    const TorusGrid wide(1, 64, 2.0 * kTwoPi);
    const GameKernel kw = cos_diff_kernel(0.0, wide, wide);
    CHECK(lsi_lower_bound(kw, 1.0) == Approx(0.25));
  }
}

TEST_CASE("condition number") {
  CHECK(condition_kappa(1.0, 1.0, 1.0) == Approx(1.0));
  CHECK(condition_kappa(1.0, 1.0, std::exp(-2.0)) == Approx(std::exp(2.0)).epsilon(1e-14));
  CHECK(condition_kappa(2.0, 0.5, 0.1) == Approx(40.0));
}

TEST_CASE("epsilon-Nash temperature threshold") {
  const GameKernel k = cos_diff_kernel(1.0, gx, gy);

  SECTION("worked arithmetic example") {
    const EpsilonNash r = epsilon_nash_tau(0.5, k);
    CHECK(r.delta == Approx(0.25));
    CHECK(r.v_delta == Approx(0.5 / kTwoPi).epsilon(1e-14));
    CHECK(r.tau_max == Approx(0.024571670897225).epsilon(1e-12));
  }

  SECTION("tau_max grows superlinearly in epsilon") {
    const double t1 = epsilon_nash_tau(0.25, k).tau_max;
    const double t2 = epsilon_nash_tau(0.5, k).tau_max;
    CHECK(t2 > 2.0 * t1);
  }

  SECTION("epsilon of tau") {
    CHECK(epsilon_of_tau(0.1, 3.0) == Approx(0.690775527898214).epsilon(1e-14));
    CHECK(epsilon_nash_beta(k) == Approx(3.0));
  }

  SECTION("domain errors") {
    CHECK_THROWS_AS(epsilon_nash_tau(4.0, k), std::invalid_argument);
    CHECK_THROWS_AS(epsilon_nash_tau(-0.1, k), std::invalid_argument);
    CHECK_THROWS_AS(epsilon_of_tau(1.5, 3.0), std::invalid_argument);
  }
}
