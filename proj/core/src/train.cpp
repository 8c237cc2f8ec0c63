#include "imm/train.hpp"

#include <cmath>
#include <cstdlib>
#include <ostream>

namespace imm {

double weight(const WeightConfig& wcfg, const FlowSchedule& sched, double s, double t) {
    (void)s;  // w(s,t) carries no s dependence
    require(wcfg.a == 1 || wcfg.a == 2, "weight: exponent a must be 1 or 2");
    require(wcfg.scale > 0.0, "weight: scale must be positive");
    if (wcfg.kind == WeightKind::Uniform) return wcfg.scale;
    if (t <= 0.0) return 0.0;  // analytic t -> 0 limit: the sigmoid underflows faster than dlambda/dt grows
    const double lam = log_snr(sched, t);
    const double sig = 1.0 / (1.0 + std::exp(lam - wcfg.b));  // sigmoid(b - lambda)
    auto [a_t, s_t] = alpha_sigma(sched, t);
    const double a_pow = wcfg.a == 1 ? a_t : a_t * a_t;
    return wcfg.scale * 0.5 * sig * (-dlog_snr_dt(sched, t)) * a_pow / (a_t * a_t + s_t * s_t);
}

void validate_train(const TrainConfig& cfg) {
    require(cfg.particles >= 1, "train: particles must be >= 1");
    require(cfg.batch_size >= 1 && cfg.batch_size % cfg.particles == 0,
            "train: batch_size must be a positive multiple of particles");
    require(cfg.p_drop >= 0.0 && cfg.p_drop <= 1.0, "train: p_drop must lie in [0,1]");
    require(cfg.steps >= 0, "train: steps must be nonnegative");
    require(cfg.lr > 0.0, "train: lr must be positive");
    require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0,
            "train: Adam betas must lie in [0,1)");
    require(cfg.adam_eps > 0.0, "train: adam_eps must be positive");
    require(cfg.ema_rate >= 0.0 && cfg.ema_rate < 1.0, "train: ema_rate must lie in [0,1)");
    require(cfg.eval_every >= 0, "train: eval_every must be nonnegative");
}

std::pair<double, double> sample_times(const FlowSchedule& sched, Rng& rng) {
    require(sched.eps_t <= sched.t_max, "sample_times: eps_t above t_max");
    const double t = rng.uniform(sched.eps_t, sched.t_max);
    const double s = rng.uniform(sched.eps_t, t);
    return {s, t};
}

GroupLossResult imm_loss(const LossConfig& cfg, const Mlp& net, const Mlp& net_minus, const Mat& X,
                         const Mat& Eps, const std::vector<int>& labels, double s, double r, double t,
                         MlpParams* grads) {
    const Eigen::Index M = X.rows();
    require(M >= 1, "imm_loss: empty group");
    require(Eps.rows() == M && Eps.cols() == X.cols(), "imm_loss: prior shape mismatch");
    require(static_cast<Eigen::Index>(labels.size()) == M, "imm_loss: one label per particle");
    require(s <= r && r <= t, "imm_loss: needs s <= r <= t");

    GroupLossResult out;
    out.w = weight(cfg.weight, cfg.sched, s, t);
    const Coeffs c = coeffs(cfg.head, cfg.sched, s, t);
    if (cfg.kernel.time_weighted && c.c_out == 0.0) {
        out.skipped = true;
        return out;
    }
    const double wt = cfg.kernel.time_weighted ? wtilde_from_cout(c.c_out) : 1.0;

    const Mat Xt = forward_marginal(cfg.sched, X, Eps, t);
    const Mat Xr = reuse_xr(cfg.sched, Xt, X, r, t);
    const Vec sv = Vec::Constant(M, s);
    const Vec tv = Vec::Constant(M, t);
    const Vec rv = Vec::Constant(M, r);

    Tape tape;
    Vec cout_rows;
    const Mat Yt = f_st_rows(cfg.head, cfg.sched, net, Xt, sv, tv, labels, grads ? &tape : nullptr, &cout_rows);
    const Mat Yr = f_st_rows(cfg.head, cfg.sched, net_minus, Xr, sv, rv, labels, nullptr, nullptr);

    out.loss = out.w * mmd_vstat(cfg.kernel, Yt, Yr, wt, wt);
    if (grads) {
        const Mat dY = out.w * mmd_vstat_grad_x(cfg.kernel, Yt, Yr, wt);
        const Mat dG = cout_rows.asDiagonal() * dY;
        mlp_backward(net, tape, dG, *grads);
    }
    return out;
}

namespace {
constexpr std::uint64_t kStreamInit = 0x696e6974;   // parameter init
constexpr std::uint64_t kStreamGroup = 0x67727570;  // per-(step, group) draws
}  // namespace

TrainState make_train_state(const MlpConfig& mcfg, const TrainConfig& tcfg, std::uint64_t seed) {
    validate_train(tcfg);
    Rng rng = Rng::stream(seed, {kStreamInit});
    TrainState st{make_mlp(mcfg, rng), OptState{}, EmaState{}};
    st.opt = make_opt_state(st.net, tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.adam_eps);
    st.ema = make_ema(st.net, tcfg.ema_rate);
    return st;
}

TrainResult train_loop(const LossConfig& cfg, const TrainConfig& tcfg, const MappingFn& mapping,
                       const DataFn& data, std::uint64_t seed, TrainState& st, std::ostream* metrics,
                       const EvalFn& eval_fn, const std::function<void(std::int64_t)>& on_step) {
    validate_train(tcfg);
    validate(cfg.sched);
    const MappingFn map = resolve_mapping(mapping, cfg.sched);
    const int B = tcfg.batch_size;
    const int M = tcfg.particles;
    const int G = B / M;
    const int D = st.net.cfg.in_dim;

    TrainResult res;
    for (std::int64_t n = 1; n <= tcfg.steps; ++n) {
        Mat Xt(B, D), Xr(B, D);
        Vec sv(B), tv(B), rv(B);
        std::vector<int> labels(B);
        std::vector<double> gw(G, 0.0), gwt(G, 0.0);
        std::vector<char> skip(G, 0);
        int skipped = 0;

        for (int g = 0; g < G; ++g) {
            // Draw order per group stream: data, (t, s), prior, dropout.
            Rng rng = Rng::stream(seed, {kStreamGroup, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(g)});
            Mat Xg;
            std::vector<int> lg;
            data(rng, M, Xg, lg);
            require(Xg.rows() == M && Xg.cols() == D, "train_loop: data callback produced a wrong shape");
            require(static_cast<int>(lg.size()) == M, "train_loop: data callback produced wrong label count");
            auto [s_g, t_g] = sample_times(cfg.sched, rng);
            const double r_g = r_map(map, cfg.sched, s_g, t_g);
            Mat Eg(M, D);
            for (int j = 0; j < M; ++j)
                for (int d = 0; d < D; ++d) Eg(j, d) = rng.normal() * cfg.sched.sigma_d;
            for (int j = 0; j < M; ++j)
                if (tcfg.p_drop > 0.0 && rng.uniform() < tcfg.p_drop) lg[j] = st.net.null_label();

            const Mat Xt_g = forward_marginal(cfg.sched, Xg, Eg, t_g);
            Xt.middleRows(g * M, M) = Xt_g;
            Xr.middleRows(g * M, M) = reuse_xr(cfg.sched, Xt_g, Xg, r_g, t_g);
            sv.segment(g * M, M).setConstant(s_g);
            tv.segment(g * M, M).setConstant(t_g);
            rv.segment(g * M, M).setConstant(r_g);
            for (int j = 0; j < M; ++j) labels[static_cast<size_t>(g * M + j)] = lg[static_cast<size_t>(j)];

            const Coeffs c = coeffs(cfg.head, cfg.sched, s_g, t_g);
            if (cfg.kernel.time_weighted && c.c_out == 0.0) {
                skip[g] = 1;
                ++skipped;
            } else {
                gwt[g] = cfg.kernel.time_weighted ? wtilde_from_cout(c.c_out) : 1.0;
            }
            gw[g] = weight(cfg.weight, cfg.sched, s_g, t_g);
        }

        Tape tape;
        Vec cout_rows;
        const Mat Yt = f_st_rows(cfg.head, cfg.sched, st.net, Xt, sv, tv, labels, &tape, &cout_rows);
        const Mat Yr = f_st_rows(cfg.head, cfg.sched, st.net, Xr, sv, rv, labels, nullptr, nullptr);

        const int active = G - skipped;
        double loss = 0.0, w_mean = 0.0;
        Mat dY = Mat::Zero(B, D);
        for (int g = 0; g < G; ++g) {
            if (skip[g]) continue;
            const Mat Yt_g = Yt.middleRows(g * M, M);
            const Mat Yr_g = Yr.middleRows(g * M, M);
            loss += gw[g] * mmd_vstat(cfg.kernel, Yt_g, Yr_g, gwt[g], gwt[g]);
            dY.middleRows(g * M, M) = (gw[g] / active) * mmd_vstat_grad_x(cfg.kernel, Yt_g, Yr_g, gwt[g]);
            w_mean += gw[g];
        }
        if (active > 0) {
            loss /= active;
            w_mean /= active;
        }
        if (!std::isfinite(loss)) {
            res.aborted = true;
            res.abort_reason = "non-finite loss at step " + std::to_string(n);
            return res;  // st still holds the pre-step parameters
        }

        if (active > 0) {
            MlpParams grads = make_zero_like(st.net);
            const Mat dG = cout_rows.asDiagonal() * dY;
            mlp_backward(st.net, tape, dG, grads);
            try {
                adam_step(st.net, grads, st.opt);
            } catch (const RuntimeFault& e) {
                res.aborted = true;
                res.abort_reason = std::string(e.what()) + " at step " + std::to_string(n);
                return res;
            }
            ema_update(st.ema, st.net);
        }

        res.steps_done = n;
        if (metrics)
            *metrics << n << ' ' << fmt_double(loss) << ' ' << fmt_double(w_mean) << ' ' << skipped << '\n';
        if (eval_fn && tcfg.eval_every > 0 && (n % tcfg.eval_every == 0 || n == tcfg.steps)) {
            auto [mmd2, w1] = eval_fn(n);
            if (metrics) *metrics << "eval " << n << ' ' << fmt_double(mmd2) << ' ' << fmt_double(w1) << '\n';
        }
        if (on_step) on_step(n);
    }
    return res;
}

namespace {

// Y(u) rows = f_{s,u}(ddim(x_t, x, u, t)) for the whole batch at one probe time u.
Mat probe_f(const LossConfig& cfg, const Mlp& net, const Mat& X, const Mat& Xt,
            const std::vector<int>& labels, double s, double u, double t) {
    const Mat Xu = ddim(cfg.sched, Xt, X, u, t);
    const Vec sv = Vec::Constant(X.rows(), s);
    const Vec uv = Vec::Constant(X.rows(), u);
    return f_st_rows(cfg.head, cfg.sched, net, Xu, sv, uv, labels, nullptr, nullptr);
}

void check_differential_pre(const LossConfig& cfg, double s, double t, double h) {
    require(cfg.kernel.kind == KernelKind::RBF && cfg.kernel.bandwidth == 1.0,
            "differential loss: needs the unit-bandwidth RBF kernel");
    require(h > 0.0 && h <= 1e-2, "differential loss: step too large (max 1e-2)");
    require(s <= t - h && t + h <= 1.0, "differential loss: probe times leave [s, 1]");
}

}  // namespace

double differential_imm_loss(const LossConfig& cfg, const Mlp& net, const Mat& X, const Mat& Eps,
                             const std::vector<int>& labels, double s, double t, double fd_step) {
    check_differential_pre(cfg, s, t, fd_step);
    const Eigen::Index M = X.rows();
    const Mat Xt = forward_marginal(cfg.sched, X, Eps, t);
    const Vec sv = Vec::Constant(M, s);
    const Vec tv = Vec::Constant(M, t);
    const Mat Y = f_st_rows(cfg.head, cfg.sched, net, Xt, sv, tv, labels, nullptr, nullptr);
    const Mat Yp = probe_f(cfg, net, X, Xt, labels, s, t + fd_step, t);
    const Mat Ym = probe_f(cfg, net, X, Xt, labels, s, t - fd_step, t);
    const Mat Fdot = (Yp - Ym) / (2.0 * fd_step);

    // Raw RBF limit: exp(-||dy||^2/2) (fdot_j . fdot_k - (fdot_j . dy)(dy . fdot_k)).
    double acc = 0.0;
    for (Eigen::Index j = 0; j < M; ++j) {
        for (Eigen::Index k = 0; k < M; ++k) {
            const Vec dy = (Y.row(j) - Y.row(k)).transpose();
            const double k0 = std::exp(-0.5 * dy.squaredNorm());
            const double dot = Fdot.row(j).dot(Fdot.row(k));
            const double proj = Fdot.row(j).dot(dy) * Fdot.row(k).dot(dy);
            acc += k0 * (dot - proj);
        }
    }
    return acc / (static_cast<double>(M) * static_cast<double>(M));
}

double differential_quotient(const LossConfig& cfg, const Mlp& net, const Mat& X, const Mat& Eps,
                             const std::vector<int>& labels, double s, double t, double h) {
    check_differential_pre(cfg, s, t, h);
    const Mat Xt = forward_marginal(cfg.sched, X, Eps, t);
    const Vec sv = Vec::Constant(X.rows(), s);
    const Vec tv = Vec::Constant(X.rows(), t);
    const Mat Yt = f_st_rows(cfg.head, cfg.sched, net, Xt, sv, tv, labels, nullptr, nullptr);
    const Mat Yr = probe_f(cfg, net, X, Xt, labels, s, t - h, t);
    // wtilde = D cancels the kernel's 1/D distance normalization, leaving exp(-d^2/2).
    const double wt = static_cast<double>(X.cols());
    return mmd_vstat(cfg.kernel, Yt, Yr, wt, wt) / (h * h);
}

}  // namespace imm
