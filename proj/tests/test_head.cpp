#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "imm/head.hpp"
#include "imm/interpolant.hpp"
#include "imm/rng.hpp"

#include <cmath>
#include <vector>

using namespace imm;

namespace {

FlowSchedule otfm() { return FlowSchedule{}; }

FlowSchedule cosine() {
    FlowSchedule s;
    s.kind = ScheduleKind::Cosine;
    return s;
}

HeadConfig head(HeadKind k) {
    HeadConfig h;
    h.kind = k;
    return h;
}

Mlp test_net(unsigned seed, int n_classes = 4) {
    MlpConfig cfg;
    cfg.hidden = {8, 8};
    cfg.time_embed_dim = 8;
    cfg.n_classes = n_classes;
    Rng rng(seed);
    Mlp net = make_mlp(cfg, rng);
    // Non-zero final layer so the raw output actually depends on the input.
    Dense& last = net.p.trunk.back();
    for (Eigen::Index i = 0; i < last.W.rows(); ++i)
        for (Eigen::Index j = 0; j < last.W.cols(); ++j) last.W(i, j) = rng.uniform(-0.5, 0.5);
    return net;
}

Mat randn(Rng& rng, int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("flow-step coefficients at hand-checked points") {
    const FlowSchedule s = otfm();

    const Coeffs fm = coeffs(head(HeadKind::EulerFM), s, 0.25, 0.75);
    CHECK(fm.c_skip == 1.0);
    CHECK(fm.c_out == -(0.75 - 0.25) * 0.5);  // -(t - s) sigma_d, exact
    CHECK(fm.c_in == 1.0 / (0.5 * std::sqrt(0.25 * 0.25 + 0.75 * 0.75)));

    // Identity head: the deterministic-hop coefficients themselves.
    const Coeffs id = coeffs(head(HeadKind::Identity), s, 0.25, 0.75);
    CHECK(id.c_skip == 1.0 / 3.0);
    CHECK(id.c_out == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(coeffs(head(HeadKind::Identity), s, 0.0, 0.0), DomainError);  // sigma_t = 0
}

TEST_CASE("EDM-style coefficients on the trigonometric schedule") {
    const FlowSchedule c = cosine();
    const Coeffs e = coeffs(head(HeadKind::SimpleEDM), c, 0.0, 0.5);
    // alpha_s = 1, sigma_s = 0, alpha_t = sigma_t = cos(pi/4): c_skip = alpha_t / 1,
    // c_out = -sigma_d sigma_t.
    CHECK(e.c_skip == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(e.c_out == doctest::Approx(-0.5 * std::sqrt(0.5)).epsilon(1e-12));
    CHECK(e.c_in == doctest::Approx(2.0).epsilon(1e-12));  // 1/(0.5 * 1)
}

TEST_CASE("boundary map at s = t is the exact identity") {
    Rng rng(21);
    const Mlp net = test_net(31);
    const Mat X = randn(rng, 6, 2);
    const std::vector<int> labels = {0, 1, 2, 3, 4, 0};
    for (double t : {0.3, 0.7, 0.994}) {
        for (HeadKind k : {HeadKind::SimpleEDM, HeadKind::EulerFM}) {
            const Mat Y = f_st(head(k), otfm(), net, X, t, t, labels);
            CHECK((Y - X).cwiseAbs().maxCoeff() == 0.0);
        }
        const Mat Yc = f_st(head(HeadKind::SimpleEDM), cosine(), net, X, t, t, labels);
        CHECK((Yc - X).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("head validation") {
    CHECK_THROWS_AS(check_head(HeadConfig{HeadKind::EulerFM, 1000.0, false}, cosine()), DomainError);
    CHECK_NOTHROW(check_head(HeadConfig{HeadKind::EulerFM, 1000.0, false}, otfm()));
    CHECK_THROWS_AS(check_head(HeadConfig{HeadKind::SimpleEDM, 0.5, false}, otfm()), DomainError);
    CHECK_THROWS_AS(f_st(head(HeadKind::EulerFM), cosine(), test_net(1), Mat::Zero(1, 2), 0.2, 0.5, {0}),
                    DomainError);
}

TEST_CASE("one-step map is the manual composition of its pieces") {
    Rng rng(22);
    const Mlp net = test_net(33);
    const Mat X = randn(rng, 5, 2);
    const std::vector<int> labels = {0, 1, 2, 3, 4};
    const double s = 0.2, t = 0.7;
    for (HeadKind k : {HeadKind::Identity, HeadKind::SimpleEDM, HeadKind::EulerFM}) {
        const HeadConfig h = head(k);
        const FlowSchedule sch = otfm();
        const Coeffs c = coeffs(h, sch, s, t);
        const Mat rs = time_embedding(Vec::Constant(5, s), h.c_noise_scale, net.cfg.time_embed_dim);
        const Mat rt = time_embedding(Vec::Constant(5, t), h.c_noise_scale, net.cfg.time_embed_dim);
        const Mat G = mlp_forward(net, Mat(c.c_in * X), rs, rt, labels, nullptr);
        const Mat manual = c.c_skip * X + c.c_out * G;
        const Mat Y = f_st(h, sch, net, X, s, t, labels);
        CHECK((Y - manual).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("one-step map equals the deterministic hop applied to the x-prediction") {
    Rng rng(23);
    const Mlp net = test_net(34);
    const Mat X = randn(rng, 4, 2);
    const std::vector<int> labels = {0, 1, 2, 4};
    struct Case {
        HeadKind k;
        FlowSchedule sch;
    };
    const Case cases[] = {{HeadKind::Identity, otfm()},   {HeadKind::SimpleEDM, otfm()},
                          {HeadKind::EulerFM, otfm()},    {HeadKind::Identity, cosine()},
                          {HeadKind::SimpleEDM, cosine()}};
    for (const Case& cs : cases) {
        for (auto [s, t] : {std::pair{0.2, 0.7}, std::pair{0.05, 0.95}, std::pair{0.45, 0.5}}) {
            const Mat f = f_st(head(cs.k), cs.sch, net, X, s, t, labels);
            const Mat g = g_theta(head(cs.k), cs.sch, net, X, s, t, labels);
            const Mat composed = ddim(cs.sch, X, g, s, t);
            CHECK((f - composed).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("x-prediction coefficients") {
    const FlowSchedule s = otfm();
    const GCoeffs fm = g_coeffs(head(HeadKind::EulerFM), s, 0.75);
    CHECK(fm.c_skip_t == 1.0);
    CHECK(fm.c_out_t == -0.75 * 0.5);
    const GCoeffs id = g_coeffs(head(HeadKind::Identity), s, 0.75);
    CHECK(id.c_skip_t == 0.0);
    CHECK(id.c_out_t == 1.0);
    const GCoeffs edm = g_coeffs(head(HeadKind::SimpleEDM), s, 0.75);
    CHECK(edm.c_skip_t == doctest::Approx(0.25 / 0.625).epsilon(1e-15));
    CHECK(edm.c_out_t == doctest::Approx(-0.5 * 0.75 / std::sqrt(0.625)).epsilon(1e-15));
}

TEST_CASE("batched rows agree with the single-pair map") {
    Rng rng(24);
    const Mlp net = test_net(35);
    const int B = 6;
    const Mat X = randn(rng, B, 2);
    Vec sv(B), tv(B);
    std::vector<int> labels(B);
    for (int i = 0; i < B; ++i) {
        tv[i] = rng.uniform(0.1, 0.9);
        sv[i] = rng.uniform(0.0, tv[i]);
        labels[i] = i % 5;
    }
    for (HeadKind k : {HeadKind::SimpleEDM, HeadKind::EulerFM}) {
        Vec cout_rows;
        const Mat Y = f_st_rows(head(k), otfm(), net, X, sv, tv, labels, nullptr, &cout_rows);
        for (int i = 0; i < B; ++i) {
            const Vec yi = f_st(head(k), otfm(), net, Vec(X.row(i).transpose()), sv[i], tv[i], labels[i]);
            CHECK((Y.row(i).transpose() - yi).cwiseAbs().maxCoeff() < 1e-13);
            CHECK(cout_rows[i] == coeffs(head(k), otfm(), sv[i], tv[i]).c_out);
        }
    }
    Vec shortv(B - 1);
    CHECK_THROWS_AS(f_st_rows(head(HeadKind::EulerFM), otfm(), net, X, shortv, tv, labels, nullptr, nullptr),
                    DomainError);
}

TEST_CASE("gap conditioning feeds t - s into the second embedding") {
    Rng rng(25);
    const Mlp net = test_net(36);
    const Mat X = randn(rng, 3, 2);
    const std::vector<int> labels = {0, 1, 2};
    HeadConfig h = head(HeadKind::SimpleEDM);
    h.cond_on_gap = true;
    // With gap conditioning, calls at (s, t) and (s', t) with s - s' = t' - t... :
    // simplest check: (0.2, 0.7) and (0.1, 0.6) share the gap 0.5 but differ in t,
    // while (0.2, 0.7) vs plain-s conditioning must differ.
    const Mat a = f_st(h, otfm(), net, X, 0.2, 0.7, labels);
    HeadConfig plain = head(HeadKind::SimpleEDM);
    const Mat b = f_st(plain, otfm(), net, X, 0.2, 0.7, labels);
    CHECK((a - b).cwiseAbs().maxCoeff() > 0.0);

    // Manual composition with the gap embedding reproduces it.
    const Coeffs c = coeffs(h, otfm(), 0.2, 0.7);
    const Mat rs = time_embedding(Vec::Constant(3, 0.7 - 0.2), h.c_noise_scale, net.cfg.time_embed_dim);
    const Mat rt = time_embedding(Vec::Constant(3, 0.7), h.c_noise_scale, net.cfg.time_embed_dim);
    const Mat G = mlp_forward(net, Mat(c.c_in * X), rs, rt, labels, nullptr);
    const Mat manual = c.c_skip * X + c.c_out * G;
    CHECK((a - manual).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("guided map: w = 1 short-circuits, w != 1 blends the null branch") {
    Rng rng(26);
    const Mlp net = test_net(37);
    const Mat X = randn(rng, 4, 2);
    const std::vector<int> labels = {0, 1, 2, 3};
    const double s = 0.15, t = 0.85;
    const HeadConfig h = head(HeadKind::SimpleEDM);

    const Mat plain = f_st(h, otfm(), net, X, s, t, labels);
    const Mat w1 = f_st_guided(h, otfm(), net, X, s, t, labels, 1.0);
    CHECK((w1 - plain).cwiseAbs().maxCoeff() == 0.0);

    const double w = 1.5;
    const Coeffs c = coeffs(h, otfm(), s, t);
    const Mat rs = time_embedding(Vec::Constant(4, s), h.c_noise_scale, net.cfg.time_embed_dim);
    const Mat rt = time_embedding(Vec::Constant(4, t), h.c_noise_scale, net.cfg.time_embed_dim);
    const Mat Gc = mlp_forward(net, Mat(c.c_in * X), rs, rt, labels, nullptr);
    const Mat Gn = mlp_forward(net, Mat(c.c_in * X), rs, rt, {4, 4, 4, 4}, nullptr);
    const Mat manual = c.c_skip * X + c.c_out * (w * Gc + (1.0 - w) * Gn);
    const Mat guided = f_st_guided(h, otfm(), net, X, s, t, labels, w);
    CHECK((guided - manual).cwiseAbs().maxCoeff() < 1e-13);

    // Null labels under real guidance are ill-defined and rejected.
    CHECK_THROWS_AS(f_st_guided(h, otfm(), net, X, s, t, {0, 4, 1, 2}, 1.5), DomainError);
    CHECK_NOTHROW(f_st_guided(h, otfm(), net, X, s, t, {0, 4, 1, 2}, 1.0));
}
