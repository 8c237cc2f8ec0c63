#pragma once

#include "imm/common.hpp"
#include "imm/net.hpp"
#include "imm/schedule.hpp"

#include <vector>

namespace imm {

enum class HeadKind { Identity, SimpleEDM, EulerFM };

// EDM-style wrapper turning the raw network G into the x-prediction g and the
// one-step map f_{s,t}. EulerFM is defined for the OTFM schedule only.
// SimpleEDM and EulerFM satisfy the boundary f_{s,s} = identity (c_out(s,s)=0);
// Identity does not and is excluded from acceptance runs.
struct HeadConfig {
    HeadKind kind = HeadKind::EulerFM;
    double c_noise_scale = 1000.0;
    // When set, the second conditioning input is the gap (t - s) of the call
    // instead of s itself (useful to distinguish nearby bootstrap times).
    bool cond_on_gap = false;
};

// Rejects c_noise_scale < 1 and EulerFM on non-OTFM schedules.
void check_head(const HeadConfig& head, const FlowSchedule& sched);

struct Coeffs {
    double c_skip = 0.0;  // multiplies x_t
    double c_out = 0.0;   // multiplies the network output
    double c_in = 0.0;    // scales the network input x_t
};

// Coefficients of f_{s,t}. c_in = 1/(sigma_d sqrt(alpha_t^2 + sigma_t^2)).
Coeffs coeffs(const HeadConfig& head, const FlowSchedule& sched, double s, double t);

// Per-t coefficients of the x-prediction g (c_skip(t), c_out(t)).
struct GCoeffs {
    double c_skip_t = 0.0;
    double c_out_t = 0.0;
};
GCoeffs g_coeffs(const HeadConfig& head, const FlowSchedule& sched, double t);

// Batched f with per-row (s, t); used by the training loop where each group
// carries its own times. Optionally records the tape for backprop and reports
// the per-row c_out (the backward scale for dG, and the kernel weight source).
Mat f_st_rows(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Mat& x_t, const Vec& s,
              const Vec& t, const std::vector<int>& labels, Tape* tape, Vec* c_out_rows);

// f_{s,t}(x_t) = c_skip(s,t) x_t + c_out(s,t) G(c_in(t) x_t, c_noise(s), c_noise(t), label).
Mat f_st(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Mat& x_t, double s, double t,
         const std::vector<int>& labels);
Vec f_st(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Vec& x_t, double s, double t,
         int label);

// Classifier-free guided map: G replaced by w G(., label) + (1-w) G(., null).
// Labels must not be the null token unless w = 1.
Mat f_st_guided(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Mat& x_t, double s,
                double t, const std::vector<int>& labels, double w);

// x-prediction g(x_t, t): f_st(x_t, s, t) equals ddim(x_t, g_theta(x_t, s, t), s, t).
Mat g_theta(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Mat& x_t, double s, double t,
            const std::vector<int>& labels);

}  // namespace imm
