#include "imm/interpolant.hpp"

#include <cmath>

namespace imm {

Vec forward_marginal(const FlowSchedule& sched, const Vec& x, const Vec& eps, double t) {
    require(x.size() == eps.size(), "forward_marginal: dimension mismatch");
    auto [a, s] = alpha_sigma(sched, t);
    return a * x + s * eps;
}

Mat forward_marginal(const FlowSchedule& sched, const Mat& x, const Mat& eps, double t) {
    require(x.rows() == eps.rows() && x.cols() == eps.cols(), "forward_marginal: dimension mismatch");
    auto [a, s] = alpha_sigma(sched, t);
    return a * x + s * eps;
}

namespace {
// Coefficients (coef_x, coef_xt) of the deterministic hop t -> s.
std::pair<double, double> ddim_coeffs(const FlowSchedule& sched, double s, double t) {
    auto [a_t, s_t] = alpha_sigma(sched, t);
    require(s_t > 0.0, "ddim: sigma_t = 0 (t = 0 start is singular)");
    auto [a_s, s_s] = alpha_sigma(sched, s);
    const double ratio = s_s / s_t;
    return {a_s - ratio * a_t, ratio};
}
}  // namespace

Vec ddim(const FlowSchedule& sched, const Vec& x_t, const Vec& x, double s, double t) {
    require(x_t.size() == x.size(), "ddim: dimension mismatch");
    auto [cx, cxt] = ddim_coeffs(sched, s, t);
    return cx * x + cxt * x_t;
}

Mat ddim(const FlowSchedule& sched, const Mat& x_t, const Mat& x, double s, double t) {
    require(x_t.rows() == x.rows() && x_t.cols() == x.cols(), "ddim: dimension mismatch");
    auto [cx, cxt] = ddim_coeffs(sched, s, t);
    return cx * x + cxt * x_t;
}

Vec reuse_xr(const FlowSchedule& sched, const Vec& x_t, const Vec& x, double r, double t) {
    return ddim(sched, x_t, x, r, t);
}

Mat reuse_xr(const FlowSchedule& sched, const Mat& x_t, const Mat& x, double r, double t) {
    return ddim(sched, x_t, x, r, t);
}

DdpmMoments ddpm_posterior_moments(const FlowSchedule& sched, double s, double t) {
    require(s > 0.0 && s <= t && t <= 1.0, "ddpm_posterior: requires 0 < s <= t <= 1");
    auto [a_t, s_t] = alpha_sigma(sched, t);
    auto [a_s, s_s] = alpha_sigma(sched, s);
    require(a_s > 0.0 && s_t > 0.0, "ddpm_posterior: degenerate alpha_s or sigma_t");
    const double ratio = (a_t * a_t) / (a_s * a_s) * (s_s * s_s) / (s_t * s_t);
    DdpmMoments m;
    m.mean_coef_xt = (a_t * s_s * s_s) / (a_s * s_t * s_t);
    m.mean_coef_x = a_s * (1.0 - ratio);
    m.var = s_s * s_s * (1.0 - ratio);
    return m;
}

Vec ddpm_posterior(const FlowSchedule& sched, const Vec& x, const Vec& x_t, double s, double t, Rng& rng) {
    require(x.size() == x_t.size(), "ddpm_posterior: dimension mismatch");
    const DdpmMoments m = ddpm_posterior_moments(sched, s, t);
    const double sd = std::sqrt(std::max(m.var, 0.0));
    Vec out = m.mean_coef_xt * x_t + m.mean_coef_x * x;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += sd * rng.normal();
    return out;
}

ConsistencyReport check_self_consistency(const InterpolantSpec& spec, const Vec& x, const Vec& x_t, double s,
                                         double r, double t, int n_mc, Rng* rng) {
    require(s <= r && r <= t, "check_self_consistency: requires s <= r <= t");
    ConsistencyReport rep;
    if (spec.kind == InterpolantKind::DDIM) {
        const Vec direct = ddim(spec.sched, x_t, x, s, t);
        const Vec hop = ddim(spec.sched, ddim(spec.sched, x_t, x, r, t), x, s, r);
        rep.max_abs_residual = (direct - hop).cwiseAbs().maxCoeff();
        return rep;
    }
    require(n_mc > 1, "check_self_consistency: DDPMPosterior needs n_mc > 1");
    require(rng != nullptr, "check_self_consistency: DDPMPosterior needs an rng");
    // One-hop t->s vs two-hop t->r->s, compared through empirical first and
    // second moments (the hop distributions are Gaussian).
    const Eigen::Index d = x.size();
    Vec mean1 = Vec::Zero(d), mean2 = Vec::Zero(d);
    Vec sq1 = Vec::Zero(d), sq2 = Vec::Zero(d);
    for (int i = 0; i < n_mc; ++i) {
        const Vec one = ddpm_posterior(spec.sched, x, x_t, s, t, *rng);
        const Vec mid = ddpm_posterior(spec.sched, x, x_t, r, t, *rng);
        const Vec two = ddpm_posterior(spec.sched, x, mid, s, r, *rng);
        mean1 += one;
        mean2 += two;
        sq1 += one.cwiseProduct(one);
        sq2 += two.cwiseProduct(two);
    }
    mean1 /= n_mc;
    mean2 /= n_mc;
    const Vec var1 = sq1 / n_mc - mean1.cwiseProduct(mean1);
    const Vec var2 = sq2 / n_mc - mean2.cwiseProduct(mean2);
    rep.mean_gap = (mean1 - mean2).cwiseAbs().maxCoeff();
    rep.var_gap = (var1 - var2).cwiseAbs().maxCoeff();
    return rep;
}

double failure_case_variance(double s, double t) {
    require(s > 0.0 && s < t && t < 1.0, "failure_case_variance: requires 0 < s < t < 1");
    const double u = s / t;
    return u * u * (1.0 - u);
}

}  // namespace imm
