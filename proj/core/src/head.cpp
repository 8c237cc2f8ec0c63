#include "imm/head.hpp"

#include <cmath>

namespace imm {

void check_head(const HeadConfig& head, const FlowSchedule& sched) {
    require(head.c_noise_scale >= 1.0, "head: c_noise_scale must be >= 1");
    if (head.kind == HeadKind::EulerFM)
        require(sched.kind == ScheduleKind::OTFM, "head: EulerFM is defined for the OTFM schedule only");
}

Coeffs coeffs(const HeadConfig& head, const FlowSchedule& sched, double s, double t) {
    check_head(head, sched);
    auto [a_t, s_t] = alpha_sigma(sched, t);
    auto [a_s, s_s] = alpha_sigma(sched, s);
    const double nt2 = a_t * a_t + s_t * s_t;
    Coeffs c;
    c.c_in = 1.0 / (sched.sigma_d * std::sqrt(nt2));
    switch (head.kind) {
        case HeadKind::SimpleEDM:
            c.c_skip = (a_s * a_t + s_s * s_t) / nt2;
            c.c_out = -(a_s * s_t - s_s * a_t) * sched.sigma_d / std::sqrt(nt2);
            break;
        case HeadKind::EulerFM:
            c.c_skip = 1.0;
            c.c_out = -(t - s) * sched.sigma_d;
            break;
        case HeadKind::Identity:
            require(s_t > 0.0, "head: Identity coefficients need sigma_t > 0");
            c.c_skip = s_s / s_t;
            c.c_out = a_s - (s_s / s_t) * a_t;
            break;
    }
    return c;
}

GCoeffs g_coeffs(const HeadConfig& head, const FlowSchedule& sched, double t) {
    check_head(head, sched);
    auto [a_t, s_t] = alpha_sigma(sched, t);
    const double nt2 = a_t * a_t + s_t * s_t;
    GCoeffs g;
    switch (head.kind) {
        case HeadKind::SimpleEDM:
            g.c_skip_t = a_t / nt2;
            g.c_out_t = -sched.sigma_d * s_t / std::sqrt(nt2);
            break;
        case HeadKind::EulerFM:
            g.c_skip_t = 1.0;
            g.c_out_t = -t * sched.sigma_d;
            break;
        case HeadKind::Identity:
            g.c_skip_t = 0.0;
            g.c_out_t = 1.0;
            break;
    }
    return g;
}

Mat f_st_rows(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Mat& x_t, const Vec& s,
              const Vec& t, const std::vector<int>& labels, Tape* tape, Vec* c_out_rows) {
    check_head(head, sched);
    const Eigen::Index B = x_t.rows();
    require(s.size() == B && t.size() == B, "f_st_rows: one (s, t) per row");

    Vec cskip(B), cout(B), cin(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        const Coeffs c = coeffs(head, sched, s[i], t[i]);
        cskip[i] = c.c_skip;
        cout[i] = c.c_out;
        cin[i] = c.c_in;
    }
    Mat X = cin.asDiagonal() * x_t;
    Vec s_cond = head.cond_on_gap ? Vec(t - s) : s;
    Mat raw_s = time_embedding(s_cond, head.c_noise_scale, net.cfg.time_embed_dim);
    Mat raw_t = time_embedding(t, head.c_noise_scale, net.cfg.time_embed_dim);
    Mat G = mlp_forward(net, X, raw_s, raw_t, labels, tape);
    if (c_out_rows) *c_out_rows = cout;
    return cskip.asDiagonal() * x_t + cout.asDiagonal() * G;
}

Mat f_st(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Mat& x_t, double s, double t,
         const std::vector<int>& labels) {
    const Vec sv = Vec::Constant(x_t.rows(), s);
    const Vec tv = Vec::Constant(x_t.rows(), t);
    return f_st_rows(head, sched, net, x_t, sv, tv, labels, nullptr, nullptr);
}

Vec f_st(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Vec& x_t, double s, double t,
         int label) {
    Mat X(1, x_t.size());
    X.row(0) = x_t.transpose();
    const std::vector<int> one_label{label};
    return f_st(head, sched, net, X, s, t, one_label).row(0).transpose();
}

Mat f_st_guided(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Mat& x_t, double s,
                double t, const std::vector<int>& labels, double w) {
    if (w == 1.0) return f_st(head, sched, net, x_t, s, t, labels);
    for (int lab : labels)
        require(lab != net.null_label(), "f_st_guided: null label requires w = 1");
    const Coeffs c = coeffs(head, sched, s, t);
    const Vec sv = Vec::Constant(x_t.rows(), s);
    const Vec tv = Vec::Constant(x_t.rows(), t);
    const Vec s_cond = head.cond_on_gap ? Vec(tv - sv) : sv;
    const Mat raw_s = time_embedding(s_cond, head.c_noise_scale, net.cfg.time_embed_dim);
    const Mat raw_t = time_embedding(tv, head.c_noise_scale, net.cfg.time_embed_dim);
    const Mat X = c.c_in * x_t;
    const Mat G_cond = mlp_forward(net, X, raw_s, raw_t, labels, nullptr);
    const std::vector<int> null_labels(static_cast<size_t>(x_t.rows()), net.null_label());
    const Mat G_null = mlp_forward(net, X, raw_s, raw_t, null_labels, nullptr);
    return c.c_skip * x_t + c.c_out * (w * G_cond + (1.0 - w) * G_null);
}

Mat g_theta(const HeadConfig& head, const FlowSchedule& sched, const Mlp& net, const Mat& x_t, double s, double t,
            const std::vector<int>& labels) {
    const GCoeffs g = g_coeffs(head, sched, t);
    const Coeffs c = coeffs(head, sched, s, t);
    const Vec sv = Vec::Constant(x_t.rows(), s);
    const Vec tv = Vec::Constant(x_t.rows(), t);
    const Vec s_cond = head.cond_on_gap ? Vec(tv - sv) : sv;
    const Mat raw_s = time_embedding(s_cond, head.c_noise_scale, net.cfg.time_embed_dim);
    const Mat raw_t = time_embedding(tv, head.c_noise_scale, net.cfg.time_embed_dim);
    const Mat G = mlp_forward(net, c.c_in * x_t, raw_s, raw_t, labels, nullptr);
    return g.c_skip_t * x_t + g.c_out_t * G;
}

}  // namespace imm
