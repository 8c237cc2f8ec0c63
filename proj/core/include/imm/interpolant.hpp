#pragma once

#include "imm/common.hpp"
#include "imm/rng.hpp"
#include "imm/schedule.hpp"

namespace imm {

enum class InterpolantKind { DDIM, DDPMPosterior };

struct InterpolantSpec {
    InterpolantKind kind = InterpolantKind::DDIM;
    FlowSchedule sched;
};

// x_t = alpha_t x + sigma_t eps. eps is the caller's prior draw ~ N(0, sigma_d^2 I).
Vec forward_marginal(const FlowSchedule& sched, const Vec& x, const Vec& eps, double t);
Mat forward_marginal(const FlowSchedule& sched, const Mat& x, const Mat& eps, double t);

// Deterministic interpolant x_s = (alpha_s - (sigma_s/sigma_t) alpha_t) x + (sigma_s/sigma_t) x_t.
// Requires sigma_t > 0; no ordering requirement on s beyond [0,1].
Vec ddim(const FlowSchedule& sched, const Vec& x_t, const Vec& x, double s, double t);
Mat ddim(const FlowSchedule& sched, const Mat& x_t, const Mat& x, double s, double t);

// Training-time construction of x_r from an existing (x, x_t) pair; alias of ddim at s=r.
Vec reuse_xr(const FlowSchedule& sched, const Vec& x_t, const Vec& x, double r, double t);
Mat reuse_xr(const FlowSchedule& sched, const Mat& x_t, const Mat& x, double r, double t);

// Gaussian posterior hop moments: x_s ~ N(mean_coef_xt x_t + mean_coef_x x, var I).
struct DdpmMoments {
    double mean_coef_xt = 0.0;
    double mean_coef_x = 0.0;
    double var = 0.0;
};
DdpmMoments ddpm_posterior_moments(const FlowSchedule& sched, double s, double t);
Vec ddpm_posterior(const FlowSchedule& sched, const Vec& x, const Vec& x_t, double s, double t, Rng& rng);

// Self-consistency residuals for hopping t->s directly vs t->r->s.
// DDIM fills max_abs_residual (mean/var gaps zero); DDPMPosterior fills the
// empirical mean/variance gaps over n_mc paired draws.
struct ConsistencyReport {
    double max_abs_residual = 0.0;
    double mean_gap = 0.0;
    double var_gap = 0.0;
};
ConsistencyReport check_self_consistency(const InterpolantSpec& spec, const Vec& x, const Vec& x_t, double s,
                                         double r, double t, int n_mc, Rng* rng);

// Conditional variance gamma^2 = (s/t)^2 (1 - s/t) of the non-self-consistent
// interpolant I_{s|t} = (1 - s/t) x + (s/t) x_t used in the failure construction;
// any model built on it has Var(x_s) >= gamma^2 > 0 and cannot reach a point mass.
double failure_case_variance(double s, double t);

}  // namespace imm
