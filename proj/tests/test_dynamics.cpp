#include <catch2/catch.hpp>

#include <cmath>

#include "mfgda/config.hpp"
#include "mfgda/dynamics.hpp"
#include "mfgda/io.hpp"
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

}  // namespace

TEST_CASE("drift potentials") {
  const GameKernel k = cos_diff_kernel(1.0, gx, gy);
  const KernelMatrix m = make_kernel_matrix(k);

  SECTION("uniform nu gives a flat potential for cos_diff") {
    const auto v = drift_potential_x(m, uniform(gy));
    for (double x : v) CHECK(std::abs(x) < 1e-15);
  }

  SECTION("near-Dirac nu reproduces the kernel slice") {
    const auto v = drift_potential_x(m, near_dirac(gy, 0));
    for (int i = 0; i < gx.n; i += 5)
      CHECK(v[i] == Approx(std::cos(gx.node(0, i))).margin(1e-14));
  }

  SECTION("constant kernel gives the constant") {
    const GameKernel flat = separable_kernel(0.0, 0.0, 1, 1, gx, gy);
    GameKernel shifted = flat;
    shifted.eval = [](const Point&, const Point&) { return 2.5; };
    shifted.sup_norm = 2.5;
    const KernelMatrix mf = make_kernel_matrix(shifted);
    const auto v = drift_potential_x(mf, random_measure(gy, 4));
    for (double x : v) CHECK(x == Approx(2.5).margin(1e-13));
  }
}

TEST_CASE("single GDA step") {
  const GameKernel k = cos_diff_kernel(1.0, gx, gy);
  const KernelMatrix m = make_kernel_matrix(k);
  const double dt = 0.5 * gda_dt_max(gx, gy, 1.0, 1.0, k.lip);

  SECTION("the uniform pair is an exact stationary point for cos_diff") {
    const GdaState st{uniform(gx), uniform(gy), 0.0};
    const GdaState next = gda_step(st, m, 1.0, 1.0, dt);
    CHECK(sup_distance(next.mu, st.mu) < 1e-15);
    CHECK(sup_distance(next.nu, st.nu) < 1e-15);
  }

  SECTION("mass is conserved to round-off and positivity holds") {
    GdaState st{random_measure(gx, 31), random_measure(gy, 32), 0.0};
    for (int s = 0; s < 50; ++s) {
      const GdaState next = gda_step(st, m, 1.0, 1.0, dt);
      CHECK(std::abs(next.mu.mass() - st.mu.mass()) <= 1e-14);
      CHECK(std::abs(next.nu.mass() - st.nu.mass()) <= 1e-14);
      for (double v : next.mu.density) REQUIRE(v >= 0.0);
      st = next;
    }
  }

  SECTION("the discrete MNE is stationary within the scheme tolerance") {
    const GameKernel sep = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
    const KernelMatrix ms = make_kernel_matrix(sep);
    const BestResponseContext ctx(ms, 1.0);
    const MnePair mne = fixed_point_mne(ctx);
    const double dts = 0.5 * gda_dt_max(gx, gy, 1.0, 1.0, sep.lip);
    GdaState st{mne.mu_star, mne.nu_star, 0.0};
    const GdaState next = gda_step(st, ms, 1.0, 1.0, dts);
    double l1 = 0.0;
    for (std::size_t i = 0; i < st.mu.density.size(); ++i)
      l1 += std::abs(next.mu.density[i] - st.mu.density[i]);
    l1 *= gx.cell_volume();
    const double h = gx.spacing(0);
    CHECK(l1 <= 5.0 * (h * h + dts));
    // exponential fitting keeps the Gibbs pair flux-free to near round-off
    CHECK(l1 < 1e-10);
  }

  SECTION("oversized steps are rejected") {
    const GdaState st{random_measure(gx, 8), uniform(gy), 0.0};
    CHECK_THROWS_AS(gda_step(st, m, 1.0, 1.0, 1.0), StabilityViolation);
    try {
      (void)gda_step(st, m, 1.0, 1.0, 1.0);
    } catch (const StabilityViolation& e) {
      CHECK(e.dt == 1.0);
      CHECK(e.dt_max < 1.0);
    }
  }

  SECTION("pure heat flow decays KL to uniform monotonically") {
    const GameKernel flat = separable_kernel(0.0, 0.0, 1, 1, gx, gy);
    const KernelMatrix mf = make_kernel_matrix(flat);
    GdaState st{make_initial(gx, "bump", 2.0, 1.0), uniform(gy), 0.0};
    const GridMeasure target = uniform(gx);
    double prev = relative_entropy(st.mu, target);
    const double dtf = 0.5 * gda_dt_max(gx, gy, 1.0, 1.0, 0.0);
    for (int s = 0; s < 400; ++s) {
      st = gda_step(st, mf, 1.0, 1.0, dtf);
      if (s % 40 == 0) {
        const double cur = relative_entropy(st.mu, target);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
      }
    }
    CHECK(prev < relative_entropy(make_initial(gx, "bump", 2.0, 1.0), target));
  }
}

TEST_CASE("run_fixed wires the regime presets") {
  const GameKernel sep = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
  const KernelMatrix m = make_kernel_matrix(sep);
  const double tau = 1.0, gamma = 0.5;

  SECTION("fast-ascent eta matches the formula") {
    const RatePrediction p = predict_rates(sep, tau, gamma, GdaRegime::fast_ascent);
    const double lam = lsi_lower_bound(sep, tau);
    const double kap = condition_kappa(sep.kxy_bound, tau, lam);
    const double dy = gy.diameter();
    CHECK(p.eta == Approx(2.0 * lam * kap * kap * dy * dy / gamma).epsilon(1e-14));
    CHECK(p.alpha1 ==
          Approx(lam * std::min(0.25, kap * kap * dy * dy * 2.5 / gamma)).epsilon(1e-14));
  }

  SECTION("fast-descent eta matches the formula") {
    const RatePrediction p = predict_rates(sep, tau, gamma, GdaRegime::fast_descent);
    const double lam = lsi_lower_bound(sep, tau);
    const double kap = condition_kappa(sep.kxy_bound, tau, lam);
    const double dx = gx.diameter();
    CHECK(p.eta == Approx(gamma / (2.0 * lam * kap * kap * dx * dx * 2.5)).epsilon(1e-14));
    CHECK(p.alpha2 == Approx(0.5 * lam * std::min(1.0, p.eta * 0.5)).epsilon(1e-14));
  }

  SECTION("diagnostics at t=0 match a direct evaluation") {
    RunOptions ro;
    ro.t_end = 20.0 * gda_dt_max(gx, gy, tau, 1.0, sep.lip);
    ro.record_every = 1000000;
    GridMeasure mu0 = make_initial(gx, "bump", 2.0, 1.0);
    GridMeasure nu0 = make_initial(gy, "bump", 2.0, 3.0);
    const RunResult r = run_fixed(sep, m, tau, gamma, GdaRegime::custom, mu0, nu0, ro, 1.0);
    REQUIRE(r.series.size() == 2);  // only t = 0 and the final row
    const BestResponseContext ctx(m, tau);
    const MnePair mne = fixed_point_mne(ctx);
    const LyapunovSlice s = lyapunov_all(ctx, mne, mu0, nu0, gamma);
    CHECK(r.series.front().lyap == Approx(s.lyap).margin(1e-12));
    CHECK(r.series.front().t == 0.0);
    CHECK(r.final_state.t == Approx(ro.t_end));
  }
}

TEST_CASE("short fast-ascent run dissipates the Lyapunov function") {
  const GameKernel sep = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
  const KernelMatrix m = make_kernel_matrix(sep);
  RunOptions ro;
  ro.t_end = 1.5;
  ro.record_every = 500;
  GridMeasure mu0 = make_initial(gx, "bump", 2.0, 1.5707963267948966);
  GridMeasure nu0 = make_initial(gy, "bump", 2.0, 3.141592653589793);
  const RunResult r = run_fixed(sep, m, 1.0, 0.5, GdaRegime::fast_ascent, mu0, nu0, ro);

  const double h = gx.spacing(0);
  const double tol = 1e-8 + 10.0 * h * h;
  for (std::size_t i = 0; i + 1 < r.series.size(); ++i)
    CHECK(r.series[i + 1].lyap <= r.series[i].lyap + tol);
  CHECK(r.series.back().lyap < r.series.front().lyap);
  // the certified rate uses the conservative LSI bound, so the fitted decay
  // must dominate the prediction
  CHECK(r.lyap_fit.alpha_hat >= 0.9 * r.prediction.alpha1);

  SECTION("dissipation inequalities hold at nearly all checkpoints") {
    const auto [c1, c2] =
        check_ascent_derivatives(r.series, sep.kxy_bound, gy.diameter(), r.dt_used, h);
    CHECK(c1.pass_fraction() >= 0.95);
    CHECK(c2.pass_fraction() >= 0.95);
  }

  SECTION("cross entropy bound holds along the trajectory") {
    for (const DiagnosticsRecord& rec : r.series)
      CHECK(cross_entropy_bound_holds(rec, sep.sup_norm));
  }
}

TEST_CASE("annealed schedule mechanics") {
  SECTION("tau follows xi over log t") {
    const ScaleSchedule s = ScaleSchedule::make_annealed(ScheduleKind::annealed_fast_ascent, 1.0,
                                                         0.5, 10.0, std::exp(1.5));
    CHECK(s.tau_at(std::exp(2.0)) == Approx(0.5).epsilon(1e-14));
    CHECK(s.tau_at(0.0) == Approx(1.0 / 1.5).epsilon(1e-14));  // frozen below t0
    CHECK(s.time_for_tau(0.25) == Approx(std::exp(4.0)).epsilon(1e-12));
  }

  SECTION("descent schedule needs xi above twice xi*") {
    CHECK_THROWS_AS(ScaleSchedule::make_annealed(ScheduleKind::annealed_fast_descent, 1.5, 1.0,
                                                 10.0, 7.4),
                    std::invalid_argument);
  }

  SECTION("t0 beyond the horizon reproduces the fixed run bit for bit") {
    const GameKernel sep = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
    const KernelMatrix m = make_kernel_matrix(sep);
    const double t0 = 1e6;
    const ScaleSchedule ann = ScaleSchedule::make_annealed(ScheduleKind::annealed_fast_ascent,
                                                           3.0, 1.0, 10.0, t0);
    const double tau = ann.tau_at(0.0);
    const double eta = ann.eta_at(0.0);
    RunOptions ro;
    ro.t_end = 0.05;
    ro.record_every = 100;
    GridMeasure mu0 = make_initial(gx, "bump", 2.0, 1.0);
    GridMeasure nu0 = make_initial(gy, "bump", 2.0, 3.0);
    const RunResult ra = run_annealed(m, ann, mu0, nu0, ro);
    const RunResult rf = run_gda(m, ScaleSchedule::make_fixed(tau, eta), mu0, nu0, ro);
    REQUIRE(ra.steps == rf.steps);
    CHECK(diagnostics_csv(ra.series) == diagnostics_csv(rf.series));
    for (std::size_t i = 0; i < ra.final_state.mu.density.size(); ++i)
      REQUIRE(ra.final_state.mu.density[i] == rf.final_state.mu.density[i]);
  }

  SECTION("short annealed run cools and keeps the state normalized") {
    const GameKernel sep = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
    const KernelMatrix m = make_kernel_matrix(sep);
    const ScaleSchedule ann = ScaleSchedule::make_annealed(ScheduleKind::annealed_fast_ascent,
                                                           3.0, 1.0, 10.0, std::exp(2.0));
    RunOptions ro;
    ro.t_end = 60.0;
    ro.record_every = 2000;
    const RunResult r = run_annealed(m, ann, uniform(gx), uniform(gy), ro);
    CHECK(r.series.back().tau < r.series.front().tau);
    CHECK(r.final_state.mu.mass() == Approx(1.0).margin(1e-10));
    CHECK(r.series.back().tau == Approx(3.0 / std::log(60.0)).epsilon(1e-12));
  }
}

TEST_CASE("stability bound formula") {
  const double h = gx.spacing(0);
  const double direct = kCfl * h * h / (std::max(1.0, 4.0) * (0.7 + h * 1.5));
  CHECK(gda_dt_max(gx, gy, 0.7, 4.0, 1.5) == Approx(direct).epsilon(1e-14));
  // 2D halves the budget
  const TorusGrid g2(2, 16);
  const double h2 = g2.spacing(0);
  CHECK(gda_dt_max(g2, g2, 1.0, 1.0, 0.0) == Approx(0.5 * kCfl * h2 * h2).epsilon(1e-14));
}

TEST_CASE("mixed-dimension tori: 1D strategies against a 2D parameter torus") {
  const TorusGrid g1(1, 16);
  const TorusGrid g2(2, 8);
  CounterRng rng{11};
  std::vector<double> samples(4);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = rng.uniform01(0, i, 0) * kTwoPi;
  GanOptions opts;
  opts.x_grid = g1;
  opts.y_grid = g2;
  opts.input_map = InputMap::sine;
  opts.embedding.amp_b = 0.5;
  const GameKernel k = gan_kernel(samples, sin_activation(), opts);
  const KernelMatrix m = make_kernel_matrix(k);
  REQUIRE(m.values.size() == g1.cells() * g2.cells());

  const BestResponseContext ctx(m, 1.0);
  const MnePair mne = fixed_point_mne(ctx);
  CHECK(mne.converged);
  CHECK(mne.nu_star.grid.dim == 2);
  CHECK(mne.nu_star.mass() == Approx(1.0).margin(1e-12));

  GdaState st{random_measure(g1, 71), random_measure(g2, 72), 0.0};
  const double dt = 0.5 * gda_dt_max(g1, g2, 1.0, 1.0, k.lip);
  for (int s = 0; s < 20; ++s) {
    const GdaState next = gda_step(st, m, 1.0, 1.0, dt);
    CHECK(std::abs(next.mu.mass() - 1.0) < 1e-12);
    CHECK(std::abs(next.nu.mass() - 1.0) < 1e-12);
    st = next;
  }
  // the equilibrium is a discrete fixed point here as well
  GdaState eq{mne.mu_star, mne.nu_star, 0.0};
  const GdaState moved = gda_step(eq, m, 1.0, 1.0, dt);
  CHECK(sup_distance(moved.nu, eq.nu) < 1e-9);
}

TEST_CASE("auto step below the configured floor is flagged") {
  const GameKernel sep = separable_kernel(1.0, 0.5, 1, 1, gx, gy);
  const KernelMatrix m = make_kernel_matrix(sep);
  RunOptions ro;
  ro.t_end = 0.01;
  ro.record_every = 100;
  ro.dt_floor = 1.0;  // absurdly high floor: every auto step is below it
  const RunResult r = run_fixed(sep, m, 1.0, 0.5, GdaRegime::custom, uniform(gx), uniform(gy),
                                ro, 1.0);
  CHECK(r.dt_floor_hit);
  RunOptions ok = ro;
  ok.dt_floor = 1e-9;
  const RunResult r2 = run_fixed(sep, m, 1.0, 0.5, GdaRegime::custom, uniform(gx), uniform(gy),
                                 ok, 1.0);
  CHECK_FALSE(r2.dt_floor_hit);
}

TEST_CASE("2D drift-diffusion smoke") {
  const TorusGrid g2(2, 16);
  GridMeasure rho = random_measure(g2, 55);
  std::vector<double> pot(g2.cells());
  for (std::size_t i = 0; i < g2.cells(); ++i) {
    const auto p = g2.node_coords(i);
    pot[i] = 0.5 * std::cos(p[0]) + 0.3 * std::sin(p[1]);
  }
  std::vector<double> scratch;
  const double dt = 0.5 * gda_dt_max(g2, g2, 1.0, 1.0, 0.6);
  const double mass0 = rho.mass();
  for (int s = 0; s < 200; ++s) fp::step(g2, rho.density, pot, 1.0, dt, scratch);
  CHECK(std::abs(rho.mass() - mass0) < 1e-13);
  // long-time limit of the frozen-potential flow is the Gibbs measure
  const GridMeasure gibbs_target = gibbs(g2, pot, -1, 1.0);
  for (int s = 0; s < 4000; ++s) fp::step(g2, rho.density, pot, 1.0, dt, scratch);
  CHECK(total_variation(rho, gibbs_target) < 1e-7);
}
