#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "imm/interpolant.hpp"
#include "imm/rng.hpp"

#include <cmath>

using namespace imm;

namespace {

FlowSchedule otfm() { return FlowSchedule{}; }

FlowSchedule cosine() {
    FlowSchedule s;
    s.kind = ScheduleKind::Cosine;
    return s;
}

Mat randn(Rng& rng, int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("forward marginal is the exact linear interpolation") {
    const FlowSchedule s = otfm();
    Vec x(3), e(3);
    x << 1.0, -2.0, 0.5;
    e << 0.25, 4.0, -1.0;
    const Vec xt = forward_marginal(s, x, e, 0.25);
    for (int i = 0; i < 3; ++i) CHECK(xt[i] == 0.75 * x[i] + 0.25 * e[i]);

    // Mat overload agrees with the Vec overload row by row.
    Rng rng(1);
    const Mat X = randn(rng, 5, 2), E = randn(rng, 5, 2);
    const Mat Xt = forward_marginal(s, X, E, 0.7);
    for (int i = 0; i < 5; ++i) {
        const Vec row = forward_marginal(s, Vec(X.row(i).transpose()), Vec(E.row(i).transpose()), 0.7);
        CHECK((Xt.row(i) - row.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    Vec bad(2);
    CHECK_THROWS_AS(forward_marginal(s, x, bad, 0.5), DomainError);
}

TEST_CASE("deterministic hop coefficients at a hand-checked point") {
    // OTFM, s = 0.25, t = 0.75: sigma ratio = 1/3, coef_x = 0.75 - (1/3) 0.25 = 2/3.
    const FlowSchedule sch = otfm();
    Rng rng(2);
    const Vec x = randn(rng, 4, 1).col(0), xt = randn(rng, 4, 1).col(0);
    const Vec out = ddim(sch, xt, x, 0.25, 0.75);
    for (int i = 0; i < 4; ++i) CHECK(out[i] == (2.0 / 3.0) * x[i] + (1.0 / 3.0) * xt[i]);
}

TEST_CASE("hop from t = 0 is rejected, backward hops are allowed") {
    Vec x(2), xt(2);
    x << 1.0, 2.0;
    xt << 0.5, -0.5;
    CHECK_THROWS_AS(ddim(otfm(), xt, x, 0.0, 0.0), DomainError);
    CHECK_THROWS_AS(ddim(cosine(), xt, x, 0.0, 0.0), DomainError);
    // s > t (re-noising direction, used by the restart sampler) is legal.
    const Vec up = ddim(otfm(), xt, x, 0.9, 0.5);
    CHECK(up.allFinite());
}

TEST_CASE("x_r reuse is literally the deterministic hop") {
    Rng rng(3);
    const Mat X = randn(rng, 6, 2), Xt = randn(rng, 6, 2);
    for (const FlowSchedule& s : {otfm(), cosine()}) {
        const Mat a = reuse_xr(s, Xt, X, 0.35, 0.8);
        const Mat b = ddim(s, Xt, X, 0.35, 0.8);
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("posterior moments at a hand-checked point") {
    // OTFM (s,t) = (0.4, 0.8): ratio = (0.2^2/0.6^2)(0.4^2/0.8^2) = 1/36,
    // coef_xt = (0.2*0.16)/(0.6*0.64) = 1/12, coef_x = 0.6*35/36, var = 0.16*35/36.
    const DdpmMoments m = ddpm_posterior_moments(otfm(), 0.4, 0.8);
    CHECK(m.mean_coef_xt == doctest::Approx(1.0 / 12.0).epsilon(1e-13));
    CHECK(m.mean_coef_x == doctest::Approx(0.6 * 35.0 / 36.0).epsilon(1e-13));
    CHECK(m.var == doctest::Approx(0.16 * 35.0 / 36.0).epsilon(1e-13));
    CHECK(m.var == doctest::Approx(0.15555555555555556).epsilon(1e-12));
}

TEST_CASE("posterior degenerates to a point mass at s = t") {
    for (const FlowSchedule& s : {otfm(), cosine()}) {
        const DdpmMoments m = ddpm_posterior_moments(s, 0.5, 0.5);
        CHECK(m.mean_coef_xt == 1.0);
        CHECK(m.mean_coef_x == 0.0);
        CHECK(m.var == 0.0);
    }
}

TEST_CASE("posterior moment domain checks") {
    CHECK_THROWS_AS(ddpm_posterior_moments(otfm(), 0.0, 0.5), DomainError);   // s = 0
    CHECK_THROWS_AS(ddpm_posterior_moments(otfm(), 0.8, 0.4), DomainError);   // s > t
    CHECK_THROWS_AS(ddpm_posterior_moments(otfm(), 0.5, 1.01), DomainError);  // t > 1
    CHECK_THROWS_AS(ddpm_posterior_moments(otfm(), 1.0, 1.0), DomainError);   // alpha_s = 0
}

TEST_CASE("posterior sampler matches its own moments empirically") {
    const FlowSchedule sch = otfm();
    Vec x(3), xt(3);
    x << 0.3, -0.7, 1.1;
    xt << -0.2, 0.5, 0.9;
    const DdpmMoments m = ddpm_posterior_moments(sch, 0.4, 0.8);
    const Vec mean = m.mean_coef_xt * xt + m.mean_coef_x * x;

    Rng rng(7);
    const int n = 200000;
    Vec acc = Vec::Zero(3), acc2 = Vec::Zero(3);
    for (int i = 0; i < n; ++i) {
        const Vec draw = ddpm_posterior(sch, x, xt, 0.4, 0.8, rng);
        acc += draw;
        acc2 += draw.cwiseProduct(draw);
    }
    acc /= n;
    acc2 /= n;
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(acc[i] - mean[i]) < 5e-3);
        const double var = acc2[i] - acc[i] * acc[i];
        CHECK(std::abs(var - m.var) < 5e-3);
    }
}

TEST_CASE("deterministic hops compose exactly") {
    Rng rng(11);
    for (const FlowSchedule& s : {otfm(), cosine()}) {
        InterpolantSpec spec;
        spec.kind = InterpolantKind::DDIM;
        spec.sched = s;
        for (int rep = 0; rep < 20; ++rep) {
            const Vec x = randn(rng, 3, 1).col(0), xt = randn(rng, 3, 1).col(0);
            const double t = rng.uniform(0.05, 1.0);
            const double r = rng.uniform(0.01, t);
            const double sl = rng.uniform(0.0, r);
            const ConsistencyReport rep_out = check_self_consistency(spec, x, xt, sl, r, t, 0, nullptr);
            CHECK(rep_out.max_abs_residual < 1e-14);
        }
    }
}

TEST_CASE("stochastic hops agree in distribution (small Monte Carlo)") {
    InterpolantSpec spec;
    spec.kind = InterpolantKind::DDPMPosterior;
    spec.sched = otfm();
    Vec x(2), xt(2);
    x << 0.4, -0.3;
    xt << 0.1, 0.6;
    Rng rng(13);
    const ConsistencyReport rep = check_self_consistency(spec, x, xt, 0.2, 0.5, 0.8, 200000, &rng);
    CHECK(rep.mean_gap < 5e-3);
    CHECK(rep.var_gap < 5e-3);
    CHECK_THROWS_AS(check_self_consistency(spec, x, xt, 0.2, 0.5, 0.8, 1, &rng), DomainError);
    CHECK_THROWS_AS(check_self_consistency(spec, x, xt, 0.2, 0.5, 0.8, 100, nullptr), DomainError);
    CHECK_THROWS_AS(check_self_consistency(spec, x, xt, 0.5, 0.2, 0.8, 100, &rng), DomainError);
}

TEST_CASE("single-particle variance shortfall value") {
    CHECK(failure_case_variance(0.25, 0.5) == 0.125);  // (1/2)^2 (1 - 1/2), exact in binary
    CHECK(failure_case_variance(0.5, 0.75) == doctest::Approx(4.0 / 27.0).epsilon(1e-15));

    // 4/27 is the maximum over the ratio u = s/t.
    double max_seen = 0.0;
    for (int i = 1; i < 1000; ++i) {
        const double u = i / 1000.0;
        const double v = failure_case_variance(u * 0.9, 0.9);
        max_seen = std::max(max_seen, v);
        CHECK(v <= 4.0 / 27.0 + 1e-15);
    }
    CHECK(max_seen == doctest::Approx(4.0 / 27.0).epsilon(1e-4));

    CHECK_THROWS_AS(failure_case_variance(0.0, 0.5), DomainError);
    CHECK_THROWS_AS(failure_case_variance(0.5, 0.5), DomainError);
    CHECK_THROWS_AS(failure_case_variance(0.5, 1.0), DomainError);
}
