#include "imm/sampler.hpp"

#include <cmath>

namespace imm {

std::vector<double> schedule_times(const SamplerSchedule& ss, const FlowSchedule& sched) {
    require(ss.n_steps >= 1, "sampler: n_steps must be >= 1");
    const double t_max = std::isnan(ss.t_max) ? sched.t_max : ss.t_max;
    const double t_min = ss.t_min;
    require(t_min >= 0.0 && t_min < t_max && t_max <= 1.0, "sampler: need 0 <= t_min < t_max <= 1");

    const int N = ss.n_steps;
    std::vector<double> times;
    times.reserve(static_cast<size_t>(N) + 1);
    switch (ss.kind) {
        case GridKind::Uniform:
            for (int j = 0; j <= N; ++j)
                times.push_back(t_max + (static_cast<double>(j) / N) * (t_min - t_max));
            break;
        case GridKind::EDM: {
            require(ss.rho > 0.0, "sampler: rho must be positive");
            const double eta_lo = std::isnan(ss.eta_min) ? eta(sched, t_min) : ss.eta_min;
            require(!std::isnan(ss.eta_max) || t_max < 1.0,
                    "sampler: EDM grid needs eta_max or t_max < 1");
            const double eta_hi = std::isnan(ss.eta_max) ? eta(sched, t_max) : ss.eta_max;
            require(eta_lo >= 0.0 && eta_hi > eta_lo, "sampler: need 0 <= eta_min < eta_max");
            const double hi_r = std::pow(eta_hi, 1.0 / ss.rho);
            const double lo_r = std::pow(eta_lo, 1.0 / ss.rho);
            for (int j = 0; j <= N; ++j) {
                const double e = std::pow(hi_r + (static_cast<double>(j) / N) * (lo_r - hi_r), ss.rho);
                times.push_back(eta_inv(sched, e));
            }
            break;
        }
        case GridKind::TwoStepEta:
            require(N == 2, "sampler: TwoStepEta is a 2-step grid");
            times = {t_max, eta_inv(sched, 1.4), t_min};
            break;
    }
    for (size_t i = 0; i + 1 < times.size(); ++i)
        require(times[i] > times[i + 1], "sampler: grid must be strictly decreasing");
    return times;
}

OneStepMap model_map(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net,
                     std::vector<int> labels, double w) {
    return [head, sched, &net, labels = std::move(labels), w](const Mat& x, double s, double t) {
        require(static_cast<Eigen::Index>(labels.size()) == x.rows(), "model_map: one label per row");
        return f_st_guided(head, sched, net, x, s, t, labels, w);
    };
}

OneStepMap gaussian_oracle_map(const FlowSchedule& sched) {
    return [sched](const Mat& x, double s, double t) {
        auto [a_s, s_s] = alpha_sigma(sched, s);
        auto [a_t, s_t] = alpha_sigma(sched, t);
        const double ratio = std::sqrt((a_s * a_s + s_s * s_s) / (a_t * a_t + s_t * s_t));
        return Mat(ratio * x);
    };
}

namespace {

Mat draw_prior(int n, int dim, double sigma_d, Rng& rng) {
    Mat x(n, dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) x(i, j) = rng.normal() * sigma_d;
    return x;
}

void check_grid(const std::vector<double>& times) {
    require(times.size() >= 2, "sampler: grid needs at least two points");
    for (size_t i = 0; i + 1 < times.size(); ++i)
        require(times[i] >= times[i + 1], "sampler: grid must be nonincreasing");
}

}  // namespace

Mat pushforward_sample(const OneStepMap& f, const std::vector<double>& times, const FlowSchedule& sched,
                       int n, int dim, Rng& rng) {
    check_grid(times);
    require(n >= 0 && dim >= 1, "sampler: bad sample shape");
    Mat x = draw_prior(n, dim, sched.sigma_d, rng);
    for (size_t i = 0; i + 1 < times.size(); ++i) {
        if (times[i + 1] == times[i]) continue;  // degenerate hop, f is the identity there
        x = f(x, times[i + 1], times[i]);
    }
    return x;
}

Mat restart_sample(const OneStepMap& f, const std::vector<double>& times, const FlowSchedule& sched,
                   int n, int dim, Rng& rng) {
    check_grid(times);
    require(n >= 0 && dim >= 1, "sampler: bad sample shape");
    const double t0 = times.back();
    Mat x = draw_prior(n, dim, sched.sigma_d, rng);
    for (size_t i = 0; i + 1 < times.size(); ++i) {
        Mat xt = f(x, t0, times[i]);
        if (i + 2 == times.size()) return xt;
        auto [a, s] = alpha_sigma(sched, times[i + 1]);
        x = a * xt + s * draw_prior(n, dim, sched.sigma_d, rng);
    }
    return x;
}

Vec pushforward_sample(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net,
                       const SamplerSchedule& ss, Rng& rng, int label, double w) {
    const auto times = schedule_times(ss, sched);
    Mat x = draw_prior(1, net.cfg.in_dim, sched.sigma_d, rng);
    for (size_t i = 0; i + 1 < times.size(); ++i) {
        const bool last = i + 2 == times.size();
        const double wi = (last && ss.force_unguided_last) ? 1.0 : w;
        x = f_st_guided(head, sched, net, x, times[i + 1], times[i], {label}, wi);
    }
    return x.row(0).transpose();
}

Vec restart_sample(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net,
                   const SamplerSchedule& ss, Rng& rng, int label, double w) {
    const auto times = schedule_times(ss, sched);
    const double t0 = times.back();
    Mat x = draw_prior(1, net.cfg.in_dim, sched.sigma_d, rng);
    for (size_t i = 0; i + 1 < times.size(); ++i) {
        const bool last = i + 2 == times.size();
        const double wi = (last && ss.force_unguided_last) ? 1.0 : w;
        Mat xt = f_st_guided(head, sched, net, x, t0, times[i], {label}, wi);
        if (last) return xt.row(0).transpose();
        auto [a, s] = alpha_sigma(sched, times[i + 1]);
        x = a * xt + s * draw_prior(1, net.cfg.in_dim, sched.sigma_d, rng);
    }
    return x.row(0).transpose();
}

}  // namespace imm
