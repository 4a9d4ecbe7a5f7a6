#include <catch2/catch.hpp>

#include <cmath>
#include <cstring>

#include "mfgda/config.hpp"
#include "mfgda/particles.hpp"
#include "mfgda/verify.hpp"
#include "oracles.hpp"

using namespace mfgda;

namespace {
const TorusGrid gx(1, 64);
const TorusGrid gy(1, 64);
}  // namespace

TEST_CASE("ensemble initialization") {
  SECTION("deterministic given the seed") {
    const ParticleEnsemble a = init_ensemble(500, uniform(gx), uniform(gy), 12);
    const ParticleEnsemble b = init_ensemble(500, uniform(gx), uniform(gy), 12);
    const ParticleEnsemble c = init_ensemble(500, uniform(gx), uniform(gy), 13);
    bool same = true, diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      same = same && a.xs[i][0] == b.xs[i][0] && a.ys[i][0] == b.ys[i][0];
      diff = diff || a.xs[i][0] != c.xs[i][0];
    }
    CHECK(same);
    CHECK(diff);
  }

  SECTION("uniform init passes a KS test at N = 1e5") {
    const ParticleEnsemble e = init_ensemble(100000, uniform(gx), uniform(gy), 4);
    std::vector<double> xs(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) xs[i] = e.xs[i][0];
    const double ks = oracles::ks_statistic(std::move(xs), [](double x) { return x / kTwoPi; });
    CHECK(ks < 0.01);
  }

  SECTION("a single particle lands at the inverse CDF of its draw") {
    const ParticleEnsemble e = init_ensemble(1, uniform(gx), uniform(gy), 99);
    const CounterRng rng{99};
    // cells are centered on nodes, so the draw maps to u*L - h/2 modulo L
    const double expected =
        gx.wrap_coord(0, rng.uniform01(0, 0, 0) * kTwoPi - 0.5 * gx.spacing(0));
    CHECK(e.xs[0][0] == Approx(expected).epsilon(1e-12));
  }

  SECTION("bump init concentrates near its center") {
    const GridMeasure mu0 = make_initial(gx, "bump", 4.0, 1.0);
    const ParticleEnsemble e = init_ensemble(20000, mu0, uniform(gy), 8);
    double cs = 0.0, sn = 0.0;
    for (const Point& p : e.xs) {
      cs += std::cos(p[0]);
      sn += std::sin(p[0]);
    }
    CHECK(std::atan2(sn, cs) == Approx(1.0).margin(0.05));
  }

  SECTION("2D sampling respects the joint density") {
    const TorusGrid g2(2, 32);
    std::vector<double> pot(g2.cells());
    for (std::size_t i = 0; i < g2.cells(); ++i) {
      const auto p = g2.node_coords(i);
      pot[i] = 2.0 * std::cos(p[0]) + 0.0 * p[1];
    }
    const GridMeasure m2 = gibbs(g2, pot, +1, 1.0);
    const ParticleEnsemble e = init_ensemble(40000, m2, uniform(g2), 5);
    double mean_cos = 0.0;
    for (const Point& p : e.xs) mean_cos += std::cos(p[0]);
    mean_cos /= static_cast<double>(e.size());
    CHECK(mean_cos == Approx(oracles::vm_mean_cos(2.0)).margin(0.01));
  }
}

TEST_CASE("particle step dynamics") {
  const GameKernel k = cos_diff_kernel(1.0, gx, gy);

  SECTION("drift-free symmetric configuration stays put at tau = 0") {
    const std::size_t n = 32;
    ParticleEnsemble e = init_ensemble(n, uniform(gx), uniform(gy), 1);
    for (std::size_t i = 0; i < n; ++i) {
      e.xs[i][0] = kTwoPi * static_cast<double>(i) / n;
      e.ys[i][0] = kTwoPi * static_cast<double>(i) / n;
    }
    const ParticleEnsemble next = particle_step(e, k, 0.0, 1.0, 1e-2);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(gx.wrap_diff(0, next.xs[i][0], e.xs[i][0])) < 1e-13);
      CHECK(std::abs(gy.wrap_diff(0, next.ys[i][0], e.ys[i][0])) < 1e-13);
    }
  }

  SECTION("N = 1 at tau = 0, eta = 0 reduces to the frozen-y ODE") {
    ParticleEnsemble e = init_ensemble(1, uniform(gx), uniform(gy), 2);
    e.xs[0][0] = 2.0;
    e.ys[0][0] = 0.5;
    const double dt = 1e-3;
    double x = 2.0;
    for (int s = 0; s < 100; ++s) {
      e = particle_step(e, k, 0.0, 0.0, dt);
      x = gx.wrap_coord(0, x + std::sin(x - 0.5) * dt);  // explicit Euler of the ODE
      REQUIRE(e.xs[0][0] == Approx(x).margin(1e-12));
      REQUIRE(e.ys[0][0] == 0.5);
    }
  }

  SECTION("trajectories are bitwise reproducible") {
    ParticleEnsemble a = init_ensemble(100, uniform(gx), uniform(gy), 7);
    ParticleEnsemble b = a;
    for (int s = 0; s < 20; ++s) {
      a = particle_step(a, k, 0.7, 2.0, 5e-3);
      b = particle_step(b, k, 0.7, 2.0, 5e-3);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a.xs[i][0] == b.xs[i][0]);
      REQUIRE(a.ys[i][0] == b.ys[i][0]);
    }
  }

  SECTION("low-rank and direct drift sums agree") {
    GameKernel direct = k;
    direct.low_rank.clear();
    ParticleEnsemble a = init_ensemble(40, uniform(gx), uniform(gy), 3);
    ParticleEnsemble b = a;
    for (int s = 0; s < 5; ++s) {
      a = particle_step(a, k, 0.4, 1.5, 1e-2);
      b = particle_step(b, direct, 0.4, 1.5, 1e-2);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.xs[i][0] == Approx(b.xs[i][0]).margin(1e-12));
      CHECK(a.ys[i][0] == Approx(b.ys[i][0]).margin(1e-12));
    }
  }

  SECTION("literal noise convention drops eta from the y clock") {
    ParticleEnsemble e = init_ensemble(50, uniform(gx), uniform(gy), 21);
    const ParticleEnsemble w = particle_step(e, k, 1.0, 4.0, 1e-3, NoiseConvention::wgda);
    const ParticleEnsemble l = particle_step(e, k, 1.0, 4.0, 1e-3, NoiseConvention::literal);
    bool x_same = true, y_diff = false;
    for (std::size_t i = 0; i < e.size(); ++i) {
      x_same = x_same && w.xs[i][0] == l.xs[i][0];
      y_diff = y_diff || w.ys[i][0] != l.ys[i][0];
    }
    CHECK(x_same);
    CHECK(y_diff);
  }

  SECTION("torus containment after many steps") {
    ParticleEnsemble e = init_ensemble(64, uniform(gx), uniform(gy), 17);
    for (int s = 0; s < 200; ++s) e = particle_step(e, k, 2.0, 3.0, 1e-2);
    for (std::size_t i = 0; i < e.size(); ++i) {
      CHECK(e.xs[i][0] >= 0.0);
      CHECK(e.xs[i][0] < gx.length[0]);
      CHECK(e.ys[i][0] >= 0.0);
      CHECK(e.ys[i][0] < gy.length[0]);
    }
  }
}

TEST_CASE("wrapped kernel density estimate") {
  SECTION("single particle peaks at its node and normalizes") {
    ParticleEnsemble e = init_ensemble(1, uniform(gx), uniform(gy), 1);
    e.xs[0][0] = 0.0;
    const GridMeasure kde = empirical_density_x(e, 0.15);
    CHECK(kde.mass() == Approx(1.0).margin(1e-12));
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < kde.density.size(); ++i)
      if (kde.density[i] > kde.density[argmax]) argmax = i;
    CHECK(argmax == 0);
  }

  SECTION("a million uniform samples reconstruct the uniform density") {
    const ParticleEnsemble e = init_ensemble(1000000, uniform(gx), uniform(gy), 6);
    const GridMeasure kde = empirical_density_x(e, 0.2);
    CHECK(sup_distance(kde, uniform(gx)) < 0.01);
  }

  SECTION("shifting particles by one cell shifts the estimate by one cell") {
    ParticleEnsemble e = init_ensemble(500, random_measure(gx, 44), uniform(gy), 9);
    ParticleEnsemble s = e;
    for (auto& p : s.xs) p[0] = gx.wrap_coord(0, p[0] + gx.spacing(0));
    const GridMeasure k1 = circular_shift(empirical_density_x(e, 0.3), 1);
    const GridMeasure k2 = empirical_density_x(s, 0.3);
    CHECK(sup_distance(k1, k2) < 1e-12);
  }

  SECTION("silverman bandwidth is sane and kde stays normalized in 2D") {
    const TorusGrid g2(2, 16);
    const ParticleEnsemble e = init_ensemble(2000, uniform(g2), uniform(g2), 3);
    const GridMeasure kde = kde_wrapped(e.xs, g2, 0.0);
    CHECK(kde.mass() == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("exchangeability under stream-keyed permutation") {
  const GameKernel k = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
  const std::size_t n = 24;
  ParticleEnsemble base = init_ensemble(n, random_measure(gx, 1), random_measure(gy, 2), 5);
  ParticleEnsemble perm = base;
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = (5 * i + 11) % n;
  for (std::size_t i = 0; i < n; ++i) {
    perm.xs[i] = base.xs[p[i]];
    perm.ys[i] = base.ys[p[i]];
    perm.stream_ids[i] = base.stream_ids[p[i]];
  }
  for (int s = 0; s < 10; ++s) {
    base = particle_step(base, k, 0.5, 2.0, 5e-3);
    perm = particle_step(perm, k, 0.5, 2.0, 5e-3);
  }
  for (std::size_t i = 0; i < n; ++i) {
    REQUIRE(perm.xs[i][0] == base.xs[p[i]][0]);
    REQUIRE(perm.ys[i][0] == base.ys[p[i]][0]);
  }
}

TEST_CASE("particle runs") {
  const GameKernel sep = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
  const KernelMatrix m = make_kernel_matrix(sep);
  const GridMeasure mu0 = make_initial(gx, "bump", 2.0, 1.0);
  const GridMeasure nu0 = make_initial(gy, "bump", 2.0, 3.0);

  SECTION("fixed vs annealed with t0 beyond the horizon are identical") {
    ParticleRunOptions po;
    po.t_end = 0.2;
    po.dt = 1e-2;
    po.record_every = 10;
    const ScaleSchedule ann = ScaleSchedule::make_annealed(ScheduleKind::annealed_fast_ascent,
                                                           3.0, 1.0, 10.0, 1e9);
    const ScaleSchedule fix = ScaleSchedule::make_fixed(ann.tau_at(0.0), ann.eta_at(0.0));
    const auto ra = run_particles(sep, nullptr, 128, ann, mu0, nu0, 3, po);
    const auto rf = run_particles(sep, nullptr, 128, fix, mu0, nu0, 3, po);
    REQUIRE(ra.steps == rf.steps);
    for (std::size_t i = 0; i < 128; ++i) {
      REQUIRE(ra.final_ensemble.xs[i][0] == rf.final_ensemble.xs[i][0]);
      REQUIRE(ra.final_ensemble.ys[i][0] == rf.final_ensemble.ys[i][0]);
    }
  }

  SECTION("paired PDE comparison produces a KL column that shrinks with N") {
    ParticleRunOptions po;
    po.t_end = 1.0;
    po.dt = 2e-3;
    po.record_every = 1 << 30;
    po.paired_pde = true;
    const ScaleSchedule fix = ScaleSchedule::make_fixed(1.0, 1.0);
    std::vector<double> small, large;
    for (std::uint64_t s = 1; s <= 3; ++s) {
      small.push_back(run_particles(sep, &m, 100, fix, mu0, nu0, s, po).comparison.back().kl_mu);
      large.push_back(run_particles(sep, &m, 1600, fix, mu0, nu0, s, po).comparison.back().kl_mu);
    }
    std::sort(small.begin(), small.end());
    std::sort(large.begin(), large.end());
    CHECK(large[1] < small[1]);  // medians over three seeds
  }

  SECTION("heat flow pushes the marginals to uniform") {
    const GameKernel flat = separable_kernel(0.0, 0.0, 1, 1, gx, gy);
    ParticleRunOptions po;
    po.t_end = 5.0;
    po.dt = 1e-3;
    po.record_every = 1 << 30;
    const auto r = run_particles(flat, nullptr, 5000, ScaleSchedule::make_fixed(1.0, 1.0), mu0,
                                 nu0, 3, po);
    const GridMeasure kde = empirical_density_x(r.final_ensemble);
    CHECK(relative_entropy(kde, uniform(gx)) < 0.05);
  }
}
