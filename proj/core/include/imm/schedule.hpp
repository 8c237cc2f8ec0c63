#pragma once

#include "imm/common.hpp"

#include <utility>

namespace imm {

enum class ScheduleKind { OTFM, Cosine };

// Closed-form interpolation schedule between data (t=0) and prior noise (t=1).
// OTFM: alpha = 1 - t, sigma = t. Cosine: alpha = cos(pi t / 2), sigma = sin(pi t / 2).
// Both satisfy alpha(0)=1, sigma(0)=0, alpha(1)=0, sigma(1)=1, alpha strictly
// decreasing and sigma strictly increasing.
struct FlowSchedule {
    ScheduleKind kind = ScheduleKind::OTFM;
    double sigma_d = 0.5;  // data standard deviation per dimension
    double eps_t = 0.0;    // training-time minimum time
    double t_max = 0.994;  // training-time maximum time
};

void validate(const FlowSchedule& sched);

std::pair<double, double> alpha_sigma(const FlowSchedule& sched, double t);
double alpha(const FlowSchedule& sched, double t);
double sigma(const FlowSchedule& sched, double t);

// eta(t) = sigma(t)/alpha(t), strictly increasing; finite only for t < 1.
double eta(const FlowSchedule& sched, double t);
double eta_inv(const FlowSchedule& sched, double eta_val);

// log-SNR lambda(t) = 2 log(alpha/sigma), strictly decreasing on (0,1),
// with its analytic derivative and inverse.
double log_snr(const FlowSchedule& sched, double t);
double dlog_snr_dt(const FlowSchedule& sched, double t);
double log_snr_inv(const FlowSchedule& sched, double lambda_val);

}  // namespace imm
