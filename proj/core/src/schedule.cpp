#include "imm/schedule.hpp"

#include <cmath>

namespace imm {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void validate(const FlowSchedule& sched) {
    require(sched.sigma_d > 0.0, "schedule: sigma_d must be positive");
    require(sched.eps_t >= 0.0 && sched.eps_t < 1.0, "schedule: eps_t must lie in [0,1)");
    require(sched.t_max > sched.eps_t && sched.t_max <= 1.0, "schedule: t_max must lie in (eps_t, 1]");
}

std::pair<double, double> alpha_sigma(const FlowSchedule& sched, double t) {
    require(t >= 0.0 && t <= 1.0, "alpha_sigma: t outside [0,1]");
    if (sched.kind == ScheduleKind::OTFM) return {1.0 - t, t};
    return {std::cos(kPi * t / 2.0), std::sin(kPi * t / 2.0)};
}

double alpha(const FlowSchedule& sched, double t) { return alpha_sigma(sched, t).first; }
double sigma(const FlowSchedule& sched, double t) { return alpha_sigma(sched, t).second; }

double eta(const FlowSchedule& sched, double t) {
    require(t >= 0.0 && t < 1.0, "eta: t must lie in [0,1) (alpha vanishes at t=1)");
    auto [a, s] = alpha_sigma(sched, t);
    return s / a;
}

double eta_inv(const FlowSchedule& sched, double eta_val) {
    require(eta_val >= 0.0, "eta_inv: value must be nonnegative");
    if (sched.kind == ScheduleKind::OTFM) return eta_val / (1.0 + eta_val);
    return (2.0 / kPi) * std::atan(eta_val);
}

double log_snr(const FlowSchedule& sched, double t) {
    require(t > 0.0 && t < 1.0, "log_snr: t must lie in (0,1)");
    auto [a, s] = alpha_sigma(sched, t);
    return 2.0 * std::log(a / s);
}

double dlog_snr_dt(const FlowSchedule& sched, double t) {
    require(t > 0.0 && t < 1.0, "dlog_snr_dt: t must lie in (0,1)");
    if (sched.kind == ScheduleKind::OTFM) return -2.0 / (t * (1.0 - t));
    return -2.0 * kPi / std::sin(kPi * t);
}

double log_snr_inv(const FlowSchedule& sched, double lambda_val) {
    // OTFM: lambda = 2 log((1-t)/t)  =>  t = 1/(1 + e^{lambda/2}).
    // Cosine: lambda = 2 log(cot(pi t/2))  =>  t = (2/pi) atan(e^{-lambda/2}).
    if (sched.kind == ScheduleKind::OTFM) return 1.0 / (1.0 + std::exp(lambda_val / 2.0));
    return (2.0 / kPi) * std::atan(std::exp(-lambda_val / 2.0));
}

}  // namespace imm
