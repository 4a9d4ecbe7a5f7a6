// Command-line front end: config-driven experiments over the library.
//
// Exit codes: 0 success, 1 config error, 2 solver non-convergence,
// 3 stability violation, 4 verification failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfgda/config.hpp"
#include "mfgda/diagnostics.hpp"
#include "mfgda/dynamics.hpp"
#include "mfgda/io.hpp"
#include "mfgda/particles.hpp"
#include "mfgda/verify.hpp"

namespace {

using namespace mfgda;

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::optional<std::int64_t> seed;
};

ExperimentConfig load_config(const CommonArgs& args) {
  ConfigMap merged = ConfigMap::parse(default_config_text());
  if (!args.preset.empty()) merged.merge(ConfigMap::parse(preset_text(args.preset)));
  if (!args.config_path.empty()) merged.merge(ConfigMap::parse(read_file(args.config_path)));
  if (!args.out_dir.empty()) merged.set("output.dir", args.out_dir);
  if (args.seed) merged.set("particles.seed", std::to_string(*args.seed));
  return resolve_config(merged);
}

int cmd_solve_mne(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const GameKernel kernel = make_kernel(cfg);
  const KernelMatrix matrix = make_kernel_matrix(kernel);
  const BestResponseContext ctx(matrix, cfg.tau);
  const MnePair mne = fixed_point_mne(ctx, cfg.theta, cfg.tol, cfg.max_iter);

  OutputDir out(cfg.out_dir);
  out.emit_measure("mu_star", mne.mu_star);
  out.emit_measure("nu_star", mne.nu_star);
  nlohmann::json summary;
  summary["tau"] = mne.tau;
  summary["residual"] = mne.residual;
  summary["iterations"] = mne.iterations;
  summary["converged"] = mne.converged;
  out.emit("summary.json", summary.dump(2) + "\n");
  out.finalize(config_echo(cfg), summary);

  if (!mne.converged) {
    std::cerr << "solve-mne: no convergence after " << mne.iterations
              << " iterations, residual " << mne.residual << " (best iterate saved)\n";
    return 2;
  }
  std::cout << "solve-mne: residual " << format_double(mne.residual) << " after "
            << mne.iterations << " iterations -> " << out.path().string() << "\n";
  return 0;
}

int cmd_run_gda(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const GameKernel kernel = make_kernel(cfg);
  const KernelMatrix matrix = make_kernel_matrix(kernel);
  const ScaleSchedule sched = make_schedule(cfg, kernel);

  RunOptions ro;
  ro.t_end = cfg.t_end;
  if (cfg.schedule != ScheduleKind::fixed && cfg.tau_end > 0.0)
    ro.t_end = sched.time_for_tau(cfg.tau_end);
  ro.dt = cfg.dt;
  ro.record_every = cfg.record_every;
  ro.dt_floor = cfg.dt_floor;
  ro.gamma = cfg.gamma;
  ro.stop_lyap_below = cfg.stop_lyap;
  ro.stop_lyap_tilde_below = cfg.stop_lyap_tilde;
  ro.mne_tol = cfg.tol;
  ro.mne_max_iter = cfg.max_iter;
  ro.mne_theta = cfg.theta;
  ro.keep_checkpoints = cfg.save_checkpoints;

  GridMeasure mu0 = make_initial(cfg.x_grid, cfg.init, cfg.init_conc, cfg.init_center_x);
  GridMeasure nu0 = make_initial(cfg.y_grid, cfg.init, cfg.init_conc, cfg.init_center_y);

  RunResult run;
  try {
    if (cfg.schedule == ScheduleKind::fixed) {
      run = run_fixed(kernel, matrix, cfg.tau, cfg.gamma, cfg.regime, std::move(mu0),
                      std::move(nu0), ro, cfg.custom_eta, cfg.lambda0);
    } else {
      run = run_annealed(matrix, sched, std::move(mu0), std::move(nu0), ro);
    }
  } catch (const StabilityViolation& e) {
    std::cerr << "run-gda: " << e.what() << " (dt " << e.dt << ", dt_max " << e.dt_max << ")\n";
    return 3;
  }
  if (run.dt_floor_hit)
    std::cerr << "run-gda: warning: auto step fell below the configured floor " << cfg.dt_floor
              << "\n";

  OutputDir out(cfg.out_dir);
  out.emit("diagnostics.csv", diagnostics_csv(run.series));
  out.emit("sandwich_report.json", sandwich_report_json(run.series).dump(2) + "\n");
  if (cfg.write_densities) {
    out.emit_measure("mu_final", run.final_state.mu);
    out.emit_measure("nu_final", run.final_state.nu);
  }
  for (const Checkpoint& c : run.checkpoints) {
    char tag[32];
    std::snprintf(tag, sizeof(tag), "%08zu", c.step);
    out.emit_measure(std::string("mu_") + tag, c.mu);
    out.emit_measure(std::string("nu_") + tag, c.nu);
  }
  nlohmann::json summary;
  summary["steps"] = run.steps;
  summary["t_final"] = run.final_state.t;
  summary["dt_last"] = run.dt_used;
  summary["eta"] = run.prediction.eta != 0.0 ? run.prediction.eta : sched.eta_at(run.final_state.t);
  summary["lambda_ls"] = run.prediction.lambda_ls;
  summary["kappa"] = run.prediction.kappa;
  summary["alpha1_predicted"] = run.prediction.alpha1;
  summary["alpha2_predicted"] = run.prediction.alpha2;
  summary["alpha_hat_lyap"] = run.lyap_fit.alpha_hat;
  summary["alpha_hat_lyap_r2"] = run.lyap_fit.r_squared;
  summary["alpha_hat_lyap_tilde"] = run.lyap_tilde_fit.alpha_hat;
  summary["alpha_hat_lyap_tilde_r2"] = run.lyap_tilde_fit.r_squared;
  summary["stopped_early"] = run.stopped_early;
  summary["final_lyap"] = run.series.back().lyap;
  summary["final_lyap_tilde"] = run.series.back().lyap_tilde;
  summary["final_ni"] = run.series.back().ni;
  summary["final_tau"] = run.series.back().tau;
  summary["soft_gap"] = run.series.back().soft_gap;
  out.emit("summary.json", summary.dump(2) + "\n");
  out.finalize(config_echo(cfg), summary);
  std::cout << "run-gda: " << run.steps << " steps to t = " << format_double(run.final_state.t)
            << ", final L = " << format_double(run.series.back().lyap) << " -> "
            << out.path().string() << "\n";
  return 0;
}

int cmd_run_particles(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const GameKernel kernel = make_kernel(cfg);
  const KernelMatrix matrix = make_kernel_matrix(kernel);
  const ScaleSchedule sched = make_schedule(cfg, kernel);

  ParticleRunOptions po;
  po.t_end = cfg.t_end;
  po.dt = cfg.particle_dt;
  po.record_every = cfg.particle_record_every;
  po.bandwidth = cfg.bandwidth;
  po.paired_pde = cfg.paired_pde;
  po.convention = cfg.convention;

  const GridMeasure mu0 = make_initial(cfg.x_grid, cfg.init, cfg.init_conc, cfg.init_center_x);
  const GridMeasure nu0 = make_initial(cfg.y_grid, cfg.init, cfg.init_conc, cfg.init_center_y);

  ParticleRunResult run;
  try {
    run = run_particles(kernel, &matrix, cfg.n_particles, sched, mu0, nu0, cfg.seed, po);
  } catch (const StabilityViolation& e) {
    std::cerr << "run-particles: " << e.what() << "\n";
    return 3;
  }

  OutputDir out(cfg.out_dir);
  for (std::size_t c = 0; c < run.checkpoints.size(); ++c) {
    char tag[32];
    std::snprintf(tag, sizeof(tag), "ensemble_%06zu.csv", c);
    out.emit(tag, ensemble_csv(run.checkpoints[c]));
  }
  if (po.paired_pde) {
    std::string csv = "t,kl_mu_vs_pde,tv_mu_vs_pde,kl_nu_vs_pde,tv_nu_vs_pde\n";
    for (const auto& row : run.comparison) {
      csv += format_double(row.t);
      csv += ',';
      csv += format_double(row.kl_mu);
      csv += ',';
      csv += format_double(row.tv_mu);
      csv += ',';
      csv += format_double(row.kl_nu);
      csv += ',';
      csv += format_double(row.tv_nu);
      csv += '\n';
    }
    out.emit("pde_comparison.csv", csv);
  }
  nlohmann::json summary;
  summary["n_particles"] = cfg.n_particles;
  summary["seed"] = cfg.seed;
  summary["steps"] = run.steps;
  summary["t_final"] = run.final_ensemble.t;
  summary["schedule"] = to_string(sched.kind);
  if (!run.comparison.empty()) summary["final_kl_mu_vs_pde"] = run.comparison.back().kl_mu;
  out.emit("summary.json", summary.dump(2) + "\n");
  out.finalize(config_echo(cfg), summary);
  std::cout << "run-particles: " << run.steps << " steps, N = " << cfg.n_particles << " -> "
            << out.path().string() << "\n";
  return 0;
}

int cmd_verify(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  VerifyOptions vo;
  vo.n = cfg.verify_n;
  vo.fast = cfg.verify_fast;
  vo.inject_fault = cfg.inject_fault;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<CheckResult> results = run_verify(vo);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::json report = nlohmann::json::array();
  int failed = 0;
  for (const CheckResult& r : results) {
    nlohmann::json j;
    j["name"] = r.name;
    j["pass"] = r.pass;
    j["margin"] = r.margin;
    if (!r.detail.empty()) j["detail"] = r.detail;
    report.push_back(j);
    std::cout << (r.pass ? "[ ok ] " : "[FAIL] ") << r.name << "  margin " << format_double(r.margin)
              << "\n";
    if (!r.pass) ++failed;
  }
  std::cout << results.size() << " checks, " << failed << " failed, " << format_double(secs)
            << " s\n";

  OutputDir out(cfg.out_dir);
  out.emit("verify_report.json", report.dump(2) + "\n");
  out.finalize(config_echo(cfg));
  return failed == 0 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field GDA experiments: mixed Nash equilibria of entropy-regularized "
               "continuous games on tori"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "TOML-style config file");
    sub->add_option("--preset", args.preset, "named experiment preset");
    sub->add_option("--out", args.out_dir, "output directory (overrides config)");
    sub->add_option("--seed", args.seed, "particle seed override");
  };

  CLI::App* solve = app.add_subcommand("solve-mne", "solve the Gibbs fixed-point equations");
  CLI::App* gda = app.add_subcommand("run-gda", "integrate the mean-field GDA flow");
  CLI::App* particles = app.add_subcommand("run-particles", "integrate the interacting particle system");
  CLI::App* verify = app.add_subcommand("verify", "run the full invariant suite");
  CLI::App* defaults = app.add_subcommand("print-defaults", "print the default config and exit");
  for (CLI::App* sub : {solve, gda, particles, verify}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  // Thread-count requests are accepted for interface compatibility; execution
  // is sequential by construction, so results never depend on the value.
  if (const char* threads = std::getenv("MFGDA_THREADS"); threads != nullptr)
    std::cerr << "note: MFGDA_THREADS=" << threads
              << " acknowledged; execution is sequential and results are unaffected\n";

  try {
    if (defaults->parsed()) {
      std::cout << mfgda::default_config_text();
      return 0;
    }
    if (solve->parsed()) return cmd_solve_mne(args);
    if (gda->parsed()) return cmd_run_gda(args);
    if (particles->parsed()) return cmd_run_particles(args);
    if (verify->parsed()) return cmd_verify(args);
  } catch (const mfgda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const mfgda::StabilityViolation& e) {
    std::cerr << "stability violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
