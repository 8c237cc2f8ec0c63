#pragma once

#include "imm/common.hpp"
#include "imm/rng.hpp"

#include <array>
#include <string>
#include <vector>

namespace imm {

enum class Activation { SiLU, ReLU };

struct MlpConfig {
    int in_dim = 2;
    int out_dim = 2;
    std::vector<int> hidden = {256, 256, 256};
    Activation act = Activation::SiLU;
    int time_embed_dim = 64;  // even; sinusoidal embedding width
    int n_classes = 1;        // label table has n_classes + 1 rows, last = null token
};

struct Dense {
    Mat W;  // (in x out)
    Mat b;  // (1 x out)
};

// Parameter container; the same shape carries gradients, Adam moments and the
// EMA shadow. Tensor enumeration order (for_each_tensor) is fixed and is the
// serialization order.
struct MlpParams {
    std::vector<Dense> trunk;       // (in_dim + E) -> hidden... -> out_dim
    std::array<Dense, 2> tproj{};   // two-layer projection of the t embedding (E -> E -> E)
    std::array<Dense, 2> sproj{};   // two-layer projection of the s embedding
    Mat label_emb;                  // (n_classes + 1) x E
};

struct Mlp {
    MlpConfig cfg;
    MlpParams p;

    int null_label() const { return cfg.n_classes; }
};

template <class Params, class Fn>
void for_each_tensor(Params& p, Fn&& fn) {
    for (size_t l = 0; l < p.trunk.size(); ++l) {
        fn("trunk" + std::to_string(l) + ".W", p.trunk[l].W);
        fn("trunk" + std::to_string(l) + ".b", p.trunk[l].b);
    }
    for (int j = 0; j < 2; ++j) {
        fn("tproj" + std::to_string(j) + ".W", p.tproj[j].W);
        fn("tproj" + std::to_string(j) + ".b", p.tproj[j].b);
    }
    for (int j = 0; j < 2; ++j) {
        fn("sproj" + std::to_string(j) + ".W", p.sproj[j].W);
        fn("sproj" + std::to_string(j) + ".b", p.sproj[j].b);
    }
    fn("label_emb", p.label_emb);
}

long param_count(const MlpParams& p);

// Sinusoidal positional embedding of c_noise_scale * t: first half sines,
// second half cosines over geometric frequencies (t = 0 gives zeros then ones).
Vec time_embedding(double t, double c_noise_scale, int dim);
Mat time_embedding(const Vec& times, double c_noise_scale, int dim);

// Hidden layers use fan-in-scaled uniform init; the final trunk layer is
// zero-initialized so the raw network output is identically zero at step 0.
Mlp make_mlp(const MlpConfig& cfg, Rng& rng);

// Activation cache for reverse mode; filled by mlp_forward when requested.
struct Tape {
    Mat X;
    Mat raw_s, raw_t;
    std::vector<int> labels;
    Mat Zt0, Ht0, Zs0, Hs0;
    std::vector<Mat> Z;  // trunk pre-activations; Z.back() is the output
    std::vector<Mat> H;  // H[0] = concat(X, summed embeddings); H[l] = act(Z[l-1])
};

// Batched forward: one row per sample. raw_emb_s/raw_emb_t are sinusoidal
// embeddings (B x E); each goes through its own two-layer projection, the
// results and the label embedding are summed and concatenated with X.
Mat mlp_forward(const Mlp& net, const Mat& X, const Mat& raw_emb_s, const Mat& raw_emb_t,
                const std::vector<int>& labels, Tape* tape);

MlpParams make_zero_like(const Mlp& net);

// Accumulates parameter gradients of sum(dY .* output) into grads.
void mlp_backward(const Mlp& net, const Tape& tape, const Mat& dY, MlpParams& grads);

struct OptState {
    MlpParams m, v;
    long step = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

OptState make_opt_state(const Mlp& net, double lr, double beta1, double beta2, double eps);

// Standard Adam with bias correction; rejects non-finite gradients.
void adam_step(Mlp& net, const MlpParams& grads, OptState& opt);

struct EmaState {
    MlpParams shadow;
    double rate = 0.999;
};

EmaState make_ema(const Mlp& net, double rate);

// shadow <- rate * shadow + (1 - rate) * params
void ema_update(EmaState& ema, const Mlp& net);

// Copy of net carrying the given parameters (e.g. the EMA shadow).
Mlp with_params(const Mlp& net, const MlpParams& p);

}  // namespace imm
