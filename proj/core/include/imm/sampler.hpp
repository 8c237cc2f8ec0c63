#pragma once

#include "imm/head.hpp"
#include "imm/net.hpp"
#include "imm/rng.hpp"
#include "imm/schedule.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace imm {

enum class GridKind { Uniform, EDM, TwoStepEta };

// Inference-time grid. eta_min/eta_max/t_max may be NaN ("auto"): t_max
// resolves to the schedule's t_max, eta bounds to eta(t_min)/eta(t_max).
// TwoStepEta is the fixed {T, eta_inv(1.4), t_min} grid and requires n_steps = 2.
struct SamplerSchedule {
    GridKind kind = GridKind::Uniform;
    int n_steps = 2;  // N >= 1; the grid has N + 1 points
    double rho = 7.0;
    double eta_min = std::numeric_limits<double>::quiet_NaN();
    double eta_max = std::numeric_limits<double>::quiet_NaN();
    double t_min = 0.0;
    double t_max = std::numeric_limits<double>::quiet_NaN();
    // Alg. 4's optional line: drop guidance on the final (or only) step.
    bool force_unguided_last = false;
};

// Strictly decreasing times t_N .. t_0 (front = resolved t_max, back = t_min).
std::vector<double> schedule_times(const SamplerSchedule& ss, const FlowSchedule& sched);

// One application of the trained map: (x rows at time t) -> rows at time s.
using OneStepMap = std::function<Mat(const Mat&, double, double)>;

// Wraps f_st_guided over fixed labels (one per row) and guidance weight.
OneStepMap model_map(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net,
                     std::vector<int> labels, double w);

// Exact map for Gaussian data N(0, sigma_d^2 I): rescales the time-t marginal
// std sigma_d sqrt(alpha_t^2 + sigma_t^2) onto the time-s one. Ground truth
// for sampler tests.
OneStepMap gaussian_oracle_map(const FlowSchedule& sched);

// x ~ N(0, sigma_d^2 I), then x <- f(x, t_{i-1}, t_i) down the grid.
// Grid must be nonincreasing; initial noise is drawn row-major from rng.
Mat pushforward_sample(const OneStepMap& f, const std::vector<double>& times, const FlowSchedule& sched,
                       int n, int dim, Rng& rng);

// Restart loop: xt <- f(x, t_0, t_i); unless finished, re-noise
// x <- alpha_{t_{i-1}} xt + sigma_{t_{i-1}} eps, eps ~ N(0, sigma_d^2 I).
Mat restart_sample(const OneStepMap& f, const std::vector<double>& times, const FlowSchedule& sched,
                   int n, int dim, Rng& rng);

// Single-sample convenience wrappers over the trained net.
Vec pushforward_sample(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net,
                       const SamplerSchedule& ss, Rng& rng, int label, double w);
Vec restart_sample(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net,
                   const SamplerSchedule& ss, Rng& rng, int label, double w);

}  // namespace imm
