#pragma once

#include "imm/head.hpp"
#include "imm/interpolant.hpp"
#include "imm/kernel.hpp"
#include "imm/mapping.hpp"
#include "imm/net.hpp"
#include "imm/rng.hpp"
#include "imm/schedule.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace imm {

enum class WeightKind { Elbo, Uniform };

// Loss weight w(s,t); independent of s. Elbo follows the log-SNR form
// (scale/2) sigmoid(b - lambda_t) (-dlambda/dt) alpha_t^a / (alpha_t^2 + sigma_t^2);
// Uniform is the constant `scale` (the degenerate moment-matching configs need it).
struct WeightConfig {
    WeightKind kind = WeightKind::Elbo;
    int a = 1;       // alpha exponent, 1 or 2
    double b = 4.0;  // sigmoid shift
    double scale = 1.0;
};

// Elbo weight at t = 0 returns the analytic limit 0 (the sigmoid underflows).
double weight(const WeightConfig& wcfg, const FlowSchedule& sched, double s, double t);

struct TrainConfig {
    int batch_size = 256;  // B; divisible by particles
    int particles = 4;     // M per group
    double p_drop = 0.1;   // per-particle label dropout to the null token
    std::int64_t steps = 20000;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    // Weight-averaging window is ~1/(1-rate) updates; it must sit well inside
    // the run so the shadow tracks converged weights, not the random init.
    double ema_rate = 0.999;
    std::int64_t eval_every = 0;  // 0 disables periodic eval lines
    std::int64_t ckpt_every = 0;  // snapshot cadence for the caller's on_step hook; 0 = final only
};

void validate_train(const TrainConfig& cfg);

// Static inputs of the loss besides the networks.
struct LossConfig {
    FlowSchedule sched;
    HeadConfig head;
    KernelSpec kernel;
    WeightConfig weight;
};

// t ~ U(eps_t, t_max), s ~ U(eps_t, t); two rng draws in that order.
std::pair<double, double> sample_times(const FlowSchedule& sched, Rng& rng);

struct GroupLossResult {
    double loss = 0.0;
    double w = 0.0;
    bool skipped = false;  // c_out(s,t) = 0 under a time-weighted kernel
};

// One particle group: the weighted V-statistic between f^theta_{s,t}(x_t) and
// the gradient-blocked f^{theta-}_{s,r}(x_r), where x_t = forward_marginal(x, eps, t)
// and x_r reuses the same (x, eps) through the deterministic interpolant.
// Reference implementation; the batched training step must agree with it.
// When grads is non-null, dLoss/dtheta is accumulated into it (net_minus never
// receives gradient, so aliasing net_minus = net realizes the stop-gradient).
GroupLossResult imm_loss(const LossConfig& cfg, const Mlp& net, const Mlp& net_minus, const Mat& X,
                         const Mat& Eps, const std::vector<int>& labels, double s, double r, double t,
                         MlpParams* grads);

// Fills X (n x in_dim) and labels (n) from the given stream.
using DataFn = std::function<void(Rng&, int, Mat&, std::vector<int>&)>;
// Periodic evaluation hook: step -> (mmd2, sliced_w1) on current EMA weights.
using EvalFn = std::function<std::pair<double, double>(std::int64_t)>;

struct TrainState {
    Mlp net;
    OptState opt;
    EmaState ema;
};

TrainState make_train_state(const MlpConfig& mcfg, const TrainConfig& tcfg, std::uint64_t seed);

struct TrainResult {
    std::int64_t steps_done = 0;
    bool aborted = false;          // non-finite loss or gradient; state holds the last good parameters
    std::string abort_reason;
};

// Runs tcfg.steps optimizer steps. Each step draws B/M particle groups from
// per-(step, group) rng streams, so the draw sequence is independent of
// evaluation order. Per step one line `<step> <loss> <w_mean> <skipped>` goes
// to *metrics (if given), plus `eval <step> <mmd> <w1>` every eval_every steps.
// A non-finite loss or gradient aborts before the parameter update. on_step
// (when set) fires after each completed step, e.g. for checkpoint snapshots.
TrainResult train_loop(const LossConfig& cfg, const TrainConfig& tcfg, const MappingFn& mapping,
                       const DataFn& data, std::uint64_t seed, TrainState& st, std::ostream* metrics,
                       const EvalFn& eval_fn, const std::function<void(std::int64_t)>& on_step = {});

// Analytic r -> t limit of the group V-statistic divided by (t - r)^2, for the
// raw unit-bandwidth RBF kernel:
//   (1/M^2) sum_jk exp(-||dy||^2/2) (fdot_j . fdot_k - (fdot_j . dy)(dy . fdot_k)),
// dy = y_j - y_k, with fdot the total t-derivative of u -> f_{s,u}(x_u) along
// the deterministic interpolant path, estimated by central differences with
// step fd_step (must be <= 1e-2). Verification target only.
double differential_imm_loss(const LossConfig& cfg, const Mlp& net, const Mat& X, const Mat& Eps,
                             const std::vector<int>& labels, double s, double t, double fd_step);

// The matching finite quotient mmd_vstat(RBF, Y_t, Y_r) / h^2 at r = t - h;
// converges to differential_imm_loss at rate O(h).
double differential_quotient(const LossConfig& cfg, const Mlp& net, const Mat& X, const Mat& Eps,
                             const std::vector<int>& labels, double s, double t, double h);

}  // namespace imm
