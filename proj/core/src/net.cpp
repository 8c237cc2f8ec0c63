#include "imm/net.hpp"

#include <cmath>

namespace imm {

namespace {

Mat activate(const Mat& Z, Activation act) {
    if (act == Activation::ReLU) return Z.cwiseMax(0.0);
    // SiLU: z * sigmoid(z)
    return Z.array() / (1.0 + (-Z.array()).exp());
}

// Elementwise derivative of the activation at pre-activation Z.
Mat activate_grad(const Mat& Z, Activation act) {
    if (act == Activation::ReLU) return (Z.array() > 0.0).cast<double>();
    Eigen::ArrayXXd sig = 1.0 / (1.0 + (-Z.array()).exp());
    return sig * (1.0 + Z.array() * (1.0 - sig));
}

Dense zero_dense(int in, int out) { return Dense{Mat::Zero(in, out), Mat::Zero(1, out)}; }

Dense init_dense(int in, int out, Rng& rng) {
    Dense d = zero_dense(in, out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index i = 0; i < d.W.rows(); ++i)
        for (Eigen::Index j = 0; j < d.W.cols(); ++j) d.W(i, j) = rng.uniform(-bound, bound);
    return d;
}

}  // namespace

long param_count(const MlpParams& p) {
    long n = 0;
    for_each_tensor(const_cast<MlpParams&>(p), [&](const std::string&, Mat& m) { n += m.size(); });
    return n;
}

Vec time_embedding(double t, double c_noise_scale, int dim) {
    Vec tv(1);
    tv[0] = t;
    return time_embedding(tv, c_noise_scale, dim).row(0).transpose();
}

Mat time_embedding(const Vec& times, double c_noise_scale, int dim) {
    require(dim > 0 && dim % 2 == 0, "time_embedding: dim must be positive and even");
    const int half = dim / 2;
    Mat out(times.size(), dim);
    for (Eigen::Index r = 0; r < times.size(); ++r) {
        const double a = c_noise_scale * times[r];
        for (int i = 0; i < half; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
            out(r, i) = std::sin(a * freq);
            out(r, half + i) = std::cos(a * freq);
        }
    }
    return out;
}

Mlp make_mlp(const MlpConfig& cfg, Rng& rng) {
    require(cfg.in_dim > 0 && cfg.out_dim > 0, "mlp: dims must be positive");
    require(cfg.time_embed_dim > 0 && cfg.time_embed_dim % 2 == 0, "mlp: time_embed_dim must be even");
    require(!cfg.hidden.empty(), "mlp: at least one hidden layer");
    require(cfg.n_classes >= 1, "mlp: n_classes >= 1");
    const int E = cfg.time_embed_dim;
    Mlp net;
    net.cfg = cfg;
    int prev = cfg.in_dim + E;
    for (int h : cfg.hidden) {
        net.p.trunk.push_back(init_dense(prev, h, rng));
        prev = h;
    }
    net.p.trunk.push_back(zero_dense(prev, cfg.out_dim));  // zero final layer: G == 0 at step 0
    for (int j = 0; j < 2; ++j) net.p.tproj[j] = init_dense(E, E, rng);
    for (int j = 0; j < 2; ++j) net.p.sproj[j] = init_dense(E, E, rng);
    net.p.label_emb = Mat(cfg.n_classes + 1, E);
    const double bound = 1.0 / std::sqrt(static_cast<double>(E));
    for (Eigen::Index i = 0; i < net.p.label_emb.rows(); ++i)
        for (Eigen::Index j = 0; j < net.p.label_emb.cols(); ++j) net.p.label_emb(i, j) = rng.uniform(-bound, bound);
    return net;
}

Mat mlp_forward(const Mlp& net, const Mat& X, const Mat& raw_emb_s, const Mat& raw_emb_t,
                const std::vector<int>& labels, Tape* tape) {
    const Eigen::Index B = X.rows();
    const int E = net.cfg.time_embed_dim;
    require(X.cols() == net.cfg.in_dim, "forward: input dim mismatch");
    require(raw_emb_s.rows() == B && raw_emb_t.rows() == B, "forward: embedding batch mismatch");
    require(raw_emb_s.cols() == E && raw_emb_t.cols() == E, "forward: embedding dim mismatch");
    require(static_cast<Eigen::Index>(labels.size()) == B, "forward: one label per row");

    const Activation act = net.cfg.act;
    Mat Zt0 = (raw_emb_t * net.p.tproj[0].W).rowwise() + net.p.tproj[0].b.row(0);
    Mat Ht0 = activate(Zt0, act);
    Mat PT = (Ht0 * net.p.tproj[1].W).rowwise() + net.p.tproj[1].b.row(0);
    Mat Zs0 = (raw_emb_s * net.p.sproj[0].W).rowwise() + net.p.sproj[0].b.row(0);
    Mat Hs0 = activate(Zs0, act);
    Mat PS = (Hs0 * net.p.sproj[1].W).rowwise() + net.p.sproj[1].b.row(0);

    Mat emb = PT + PS;
    for (Eigen::Index i = 0; i < B; ++i) {
        const int lab = labels[static_cast<size_t>(i)];
        require(lab >= 0 && lab <= net.cfg.n_classes, "forward: label out of range");
        emb.row(i) += net.p.label_emb.row(lab);
    }

    Mat H(B, net.cfg.in_dim + E);
    H.leftCols(net.cfg.in_dim) = X;
    H.rightCols(E) = emb;

    if (tape) {
        tape->X = X;
        tape->raw_s = raw_emb_s;
        tape->raw_t = raw_emb_t;
        tape->labels = labels;
        tape->Zt0 = Zt0;
        tape->Ht0 = Ht0;
        tape->Zs0 = Zs0;
        tape->Hs0 = Hs0;
        tape->Z.clear();
        tape->H.clear();
        tape->H.push_back(H);
    }

    const size_t L = net.p.trunk.size();
    for (size_t l = 0; l < L; ++l) {
        Mat Z = (H * net.p.trunk[l].W).rowwise() + net.p.trunk[l].b.row(0);
        if (tape) tape->Z.push_back(Z);
        if (l + 1 < L) {
            H = activate(Z, act);
            if (tape) tape->H.push_back(H);
        } else {
            H = std::move(Z);
        }
    }
    if (!H.allFinite()) throw RuntimeFault("forward: non-finite network output");
    return H;
}

MlpParams make_zero_like(const Mlp& net) {
    MlpParams g;
    for (const Dense& d : net.p.trunk)
        g.trunk.push_back(zero_dense(static_cast<int>(d.W.rows()), static_cast<int>(d.W.cols())));
    for (int j = 0; j < 2; ++j) {
        g.tproj[j] = zero_dense(static_cast<int>(net.p.tproj[j].W.rows()), static_cast<int>(net.p.tproj[j].W.cols()));
        g.sproj[j] = zero_dense(static_cast<int>(net.p.sproj[j].W.rows()), static_cast<int>(net.p.sproj[j].W.cols()));
    }
    g.label_emb = Mat::Zero(net.p.label_emb.rows(), net.p.label_emb.cols());
    return g;
}

void mlp_backward(const Mlp& net, const Tape& tape, const Mat& dY, MlpParams& grads) {
    const Activation act = net.cfg.act;
    const size_t L = net.p.trunk.size();
    require(tape.Z.size() == L && tape.H.size() == L, "backward: tape does not match network");

    Mat dZ = dY;
    for (size_t l = L; l-- > 0;) {
        grads.trunk[l].W.noalias() += tape.H[l].transpose() * dZ;
        grads.trunk[l].b.row(0) += dZ.colwise().sum();
        if (l == 0) {
            dZ = dZ * net.p.trunk[l].W.transpose();  // now gradient w.r.t. concat input
            break;
        }
        Mat dH = dZ * net.p.trunk[l].W.transpose();
        dZ = dH.cwiseProduct(activate_grad(tape.Z[l - 1], act));
    }

    const int E = net.cfg.time_embed_dim;
    Mat dEmb = dZ.rightCols(E);  // gradient w.r.t. X itself is not needed

    for (Eigen::Index i = 0; i < dEmb.rows(); ++i)
        grads.label_emb.row(tape.labels[static_cast<size_t>(i)]) += dEmb.row(i);

    // t-projection
    grads.tproj[1].W.noalias() += tape.Ht0.transpose() * dEmb;
    grads.tproj[1].b.row(0) += dEmb.colwise().sum();
    Mat dHt0 = dEmb * net.p.tproj[1].W.transpose();
    Mat dZt0 = dHt0.cwiseProduct(activate_grad(tape.Zt0, act));
    grads.tproj[0].W.noalias() += tape.raw_t.transpose() * dZt0;
    grads.tproj[0].b.row(0) += dZt0.colwise().sum();

    // s-projection
    grads.sproj[1].W.noalias() += tape.Hs0.transpose() * dEmb;
    grads.sproj[1].b.row(0) += dEmb.colwise().sum();
    Mat dHs0 = dEmb * net.p.sproj[1].W.transpose();
    Mat dZs0 = dHs0.cwiseProduct(activate_grad(tape.Zs0, act));
    grads.sproj[0].W.noalias() += tape.raw_s.transpose() * dZs0;
    grads.sproj[0].b.row(0) += dZs0.colwise().sum();
}

OptState make_opt_state(const Mlp& net, double lr, double beta1, double beta2, double eps) {
    OptState o;
    o.m = make_zero_like(net);
    o.v = make_zero_like(net);
    o.lr = lr;
    o.beta1 = beta1;
    o.beta2 = beta2;
    o.eps = eps;
    return o;
}

void adam_step(Mlp& net, const MlpParams& grads, OptState& opt) {
    bool finite = true;
    for_each_tensor(const_cast<MlpParams&>(grads), [&](const std::string&, Mat& g) { finite = finite && g.allFinite(); });
    if (!finite) throw RuntimeFault("adam_step: non-finite gradient");
    opt.step += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));

    auto* gm = const_cast<MlpParams*>(&grads);
    std::vector<Mat*> gs, ms, vs, ps;
    for_each_tensor(*gm, [&](const std::string&, Mat& m) { gs.push_back(&m); });
    for_each_tensor(opt.m, [&](const std::string&, Mat& m) { ms.push_back(&m); });
    for_each_tensor(opt.v, [&](const std::string&, Mat& m) { vs.push_back(&m); });
    for_each_tensor(net.p, [&](const std::string&, Mat& m) { ps.push_back(&m); });
    for (size_t i = 0; i < ps.size(); ++i) {
        require(gs[i]->rows() == ps[i]->rows() && gs[i]->cols() == ps[i]->cols(), "adam_step: shape mismatch");
        ms[i]->array() = opt.beta1 * ms[i]->array() + (1.0 - opt.beta1) * gs[i]->array();
        vs[i]->array() = opt.beta2 * vs[i]->array() + (1.0 - opt.beta2) * gs[i]->array().square();
        ps[i]->array() -= opt.lr * (ms[i]->array() / bc1) / ((vs[i]->array() / bc2).sqrt() + opt.eps);
    }
}

EmaState make_ema(const Mlp& net, double rate) {
    EmaState e;
    e.shadow = net.p;
    e.rate = rate;
    return e;
}

void ema_update(EmaState& ema, const Mlp& net) {
    std::vector<Mat*> ss;
    std::vector<const Mat*> ps;
    for_each_tensor(ema.shadow, [&](const std::string&, Mat& m) { ss.push_back(&m); });
    for_each_tensor(const_cast<MlpParams&>(net.p), [&](const std::string&, Mat& m) { ps.push_back(&m); });
    for (size_t i = 0; i < ss.size(); ++i)
        ss[i]->array() = ema.rate * ss[i]->array() + (1.0 - ema.rate) * ps[i]->array();
}

Mlp with_params(const Mlp& net, const MlpParams& p) {
    Mlp out;
    out.cfg = net.cfg;
    out.p = p;
    return out;
}

}  // namespace imm
