#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace mfgda {

enum class ScheduleKind { fixed, annealed_fast_ascent, annealed_fast_descent };

inline const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::fixed: return "fixed";
    case ScheduleKind::annealed_fast_ascent: return "annealed_fast_ascent";
    case ScheduleKind::annealed_fast_descent: return "annealed_fast_descent";
  }
  return "?";
}

/// Temperature and time-scale schedules. Fixed runs hold (tau0, eta0).
/// Annealed runs follow the logarithmic cooling tau_t = xi / log t for
/// t >= t0 (frozen at t0 before that, so tau is decreasing and smooth from t0
/// on) with the matched ratio
///   fast ascent:  eta_t = M t^{xi*/xi} / (log t)^2
///   fast descent: eta_t = log t / (M t)
/// xi* instantiates the LSI decay model lambda(tau) >= C0 exp(-xi*/tau).
struct ScaleSchedule {
  ScheduleKind kind = ScheduleKind::fixed;
  double tau0 = 1.0;
  double eta0 = 1.0;
  double xi = 3.0;
  double xi_star = 1.0;
  double big_m = 10.0;
  double t0 = 7.389056098930650;  // e^2

  static ScaleSchedule make_fixed(double tau, double eta) {
    ScaleSchedule s;
    s.kind = ScheduleKind::fixed;
    s.tau0 = tau;
    s.eta0 = eta;
    if (!(tau > 0.0) || !(eta > 0.0))
      throw std::invalid_argument("ScaleSchedule: tau and eta must be positive");
    return s;
  }

  static ScaleSchedule make_annealed(ScheduleKind kind, double xi, double xi_star, double big_m,
                                     double t0) {
    if (kind == ScheduleKind::fixed) throw std::invalid_argument("make_annealed: kind is fixed");
    if (!(xi > xi_star) || !(xi_star > 0.0))
      throw std::invalid_argument("ScaleSchedule: need xi > xi* > 0");
    if (kind == ScheduleKind::annealed_fast_descent && !(xi > 2.0 * xi_star))
      throw std::invalid_argument("ScaleSchedule: fast descent needs xi > 2 xi*");
    if (!(big_m > 0.0) || !(t0 > 1.0))
      throw std::invalid_argument("ScaleSchedule: need M > 0 and t0 > 1");
    ScaleSchedule s;
    s.kind = kind;
    s.xi = xi;
    s.xi_star = xi_star;
    s.big_m = big_m;
    s.t0 = t0;
    return s;
  }

  double tau_at(double t) const {
    if (kind == ScheduleKind::fixed) return tau0;
    const double tt = std::max(t, t0);
    return xi / std::log(tt);
  }

  double eta_at(double t) const {
    switch (kind) {
      case ScheduleKind::fixed: return eta0;
      case ScheduleKind::annealed_fast_ascent: {
        const double tt = std::max(t, t0);
        const double lg = std::log(tt);
        return big_m * std::pow(tt, xi_star / xi) / (lg * lg);
      }
      case ScheduleKind::annealed_fast_descent: {
        const double tt = std::max(t, t0);
        return std::log(tt) / (big_m * tt);
      }
    }
    return eta0;
  }

  /// Time at which the cooling reaches the given temperature.
  double time_for_tau(double tau_target) const {
    if (kind == ScheduleKind::fixed) throw std::invalid_argument("time_for_tau: fixed schedule");
    if (!(tau_target > 0.0)) throw std::invalid_argument("time_for_tau: tau must be positive");
    return std::exp(xi / tau_target);
  }
};

}  // namespace mfgda
