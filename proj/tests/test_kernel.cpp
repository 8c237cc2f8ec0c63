#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "imm/kernel.hpp"
#include "imm/rng.hpp"

#include <cmath>

using namespace imm;

namespace {

KernelSpec laplace() { return KernelSpec{}; }

KernelSpec rbf(double bw = 1.0) {
    KernelSpec k;
    k.kind = KernelKind::RBF;
    k.bandwidth = bw;
    return k;
}

KernelSpec energy() {
    KernelSpec k;
    k.kind = KernelKind::Energy;
    return k;
}

KernelSpec pseudo_huber(double c) {
    KernelSpec k;
    k.kind = KernelKind::PseudoHuber;
    k.c = c;
    return k;
}

Mat randn(Rng& rng, int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("kernel weight from the output coefficient") {
    CHECK(wtilde_from_cout(-0.25) == 4.0);
    CHECK(wtilde_from_cout(0.25) == 4.0);
    CHECK_THROWS_AS(wtilde_from_cout(0.0), DomainError);
}

TEST_CASE("kernel values at hand-checked points") {
    Vec x(3), y(3);
    x << 1.0, 1.0, 1.0;
    y << 0.0, 0.0, 0.0;  // squared distance 3, dimension 3

    // Laplace: exp(-w * sqrt(3) / 3)
    CHECK(kernel_eval(laplace(), x, y, 2.0) ==
          doctest::Approx(std::exp(-2.0 * std::sqrt(3.0) / 3.0)).epsilon(1e-15));
    // RBF bw 2: exp(-w * 3 / (2 * 3 * 4)) = exp(-w/8)
    CHECK(kernel_eval(rbf(2.0), x, y, 1.5) == doctest::Approx(std::exp(-1.5 / 8.0)).epsilon(1e-15));
    // Energy ignores the weight entirely: -||x-y||^2 = -3.
    CHECK(kernel_eval(energy(), x, y, 1.0) == -3.0);
    CHECK(kernel_eval(energy(), x, y, 123.0) == -3.0);
    // Pseudo-Huber c = 1: 1 - sqrt(3 + 1) = -1 exactly.
    CHECK(kernel_eval(pseudo_huber(1.0), x, y, 1.0) == -1.0);

    // Same point: Laplace sits at the floor, the others at their maxima.
    CHECK(kernel_eval(laplace(), x, x, 2.0) ==
          doctest::Approx(std::exp(-2.0 * 1e-8 / 3.0)).epsilon(1e-15));
    CHECK(kernel_eval(rbf(1.0), x, x, 1.0) == 1.0);
    CHECK(kernel_eval(energy(), x, x, 1.0) == 0.0);
    CHECK(kernel_eval(pseudo_huber(0.7), x, x, 1.0) == 0.0);  // c - sqrt(c^2)

    Vec bad(2);
    bad << 1.0, 2.0;
    CHECK_THROWS_AS(kernel_eval(laplace(), x, bad, 1.0), DomainError);
    Vec nan3 = x;
    nan3[1] = std::nan("");
    CHECK_THROWS_AS(kernel_eval(laplace(), x, nan3, 1.0), DomainError);
}

TEST_CASE("laplace gradient: self-normalized norm and flat region") {
    Rng rng(5);
    for (int dim : {2, 5}) {
        for (double w : {0.5, 2.0, 7.0}) {
            for (int rep = 0; rep < 40; ++rep) {
                const Vec x = randn(rng, dim, 1).col(0);
                const Vec y = randn(rng, dim, 1).col(0);
                const double d = (x - y).norm();
                if (d <= 1e-8) continue;
                const Vec g = kernel_grad_x(laplace(), x, y, w);
                const double expect = (w / dim) * std::exp(-w * d / dim);
                CHECK(g.norm() == doctest::Approx(expect).epsilon(1e-10));
                // Direction: parallel to -(x - y).
                CHECK((g + (g.norm() / d) * (x - y)).norm() < 1e-12 * (1.0 + g.norm()));
            }
        }
    }
    // Inside the floor the kernel is constant, so the gradient vanishes.
    Vec x(2), y(2);
    x << 0.3, 0.4;
    y = x;
    y[0] += 1e-9;
    CHECK(kernel_grad_x(laplace(), x, y, 2.0).norm() == 0.0);
    CHECK(kernel_grad_x(laplace(), x, x, 2.0).norm() == 0.0);
}

TEST_CASE("kernel gradients agree with finite differences") {
    Rng rng(6);
    const KernelSpec specs[] = {laplace(), rbf(0.8), energy(), pseudo_huber(0.5)};
    const double h = 1e-6;
    for (const KernelSpec& spec : specs) {
        for (int rep = 0; rep < 25; ++rep) {
            Vec x = randn(rng, 3, 1).col(0);
            const Vec y = randn(rng, 3, 1).col(0);
            if ((x - y).norm() < 1e-3) x.array() += 0.5;  // stay clear of the Laplace floor kink
            const Vec g = kernel_grad_x(spec, x, y, 1.7);
            for (int i = 0; i < 3; ++i) {
                Vec xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                const double fd = (kernel_eval(spec, xp, y, 1.7) - kernel_eval(spec, xm, y, 1.7)) / (2.0 * h);
                CHECK(std::abs(fd - g[i]) < 1e-6 * (1.0 + std::abs(g[i])));
            }
        }
    }
}

TEST_CASE("group statistic with one particle and the energy kernel") {
    // M = 1: acc = k(x,x) + k(y,y) - 2 k(x,y) = 0 + 0 + 2 d^2.
    Mat X(1, 2), Y(1, 2);
    X << 1.0, 2.0;
    Y << -1.0, 0.5;
    const double d2 = (X.row(0) - Y.row(0)).squaredNorm();
    CHECK(mmd_vstat(energy(), X, Y, 1.0, 1.0) == 2.0 * d2);
}

TEST_CASE("group statistic matches a direct summation with split weights") {
    // The X block and the cross term use the online-branch weight, the Y block
    // the bootstrap-branch weight.
    Rng rng(8);
    const KernelSpec specs[] = {laplace(), rbf(1.3), energy(), pseudo_huber(0.5)};
    for (const KernelSpec& spec : specs) {
        const int M = 3;
        const Mat X = randn(rng, M, 2), Y = randn(rng, M, 2);
        const double wt = 2.5, wr = 0.7;
        double acc = 0.0;
        for (int j = 0; j < M; ++j) {
            for (int k = 0; k < M; ++k) {
                acc += kernel_eval(spec, X.row(j).transpose(), X.row(k).transpose(), wt);
                acc += kernel_eval(spec, Y.row(j).transpose(), Y.row(k).transpose(), wr);
                acc -= 2.0 * kernel_eval(spec, X.row(j).transpose(), Y.row(k).transpose(), wt);
            }
        }
        acc /= M * M;
        CHECK(mmd_vstat(spec, X, Y, 2.5, 0.7) == doctest::Approx(acc).epsilon(1e-14));
    }
    Mat X(2, 2), Ybad(3, 2);
    X.setZero();
    Ybad.setZero();
    CHECK_THROWS_AS(mmd_vstat(laplace(), X, Ybad, 1.0, 1.0), DomainError);
}

TEST_CASE("group statistic is zero for identical clouds and positive otherwise") {
    Rng rng(9);
    const Mat X = randn(rng, 6, 2);
    for (const KernelSpec& spec : {laplace(), rbf(1.0), energy(), pseudo_huber(0.5)}) {
        CHECK(mmd_vstat(spec, X, X, 2.0, 2.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
        const Mat Y = X.array() + 0.5;
        CHECK(mmd_vstat(spec, X, Y, 2.0, 2.0) > 0.0);
    }
}

TEST_CASE("group statistic gradient matches finite differences") {
    Rng rng(10);
    const double h = 1e-6;
    for (const KernelSpec& spec : {laplace(), rbf(0.9), energy(), pseudo_huber(0.5)}) {
        const int M = 4;
        const Mat X = randn(rng, M, 2);
        const Mat Y = randn(rng, M, 2).array() + 0.3;
        const Mat G = mmd_vstat_grad_x(spec, X, Y, 1.8);
        for (int i = 0; i < M; ++i) {
            for (int j = 0; j < 2; ++j) {
                Mat Xp = X, Xm = X;
                Xp(i, j) += h;
                Xm(i, j) -= h;
                const double fd =
                    (mmd_vstat(spec, Xp, Y, 1.8, 1.8) - mmd_vstat(spec, Xm, Y, 1.8, 1.8)) / (2.0 * h);
                CHECK(std::abs(fd - G(i, j)) < 2e-6 * (1.0 + std::abs(G(i, j))));
            }
        }
    }
}

TEST_CASE("conditionally positive definite quadratic forms") {
    Rng rng(12);
    for (const KernelSpec& spec : {laplace(), rbf(1.1), energy(), pseudo_huber(0.5)}) {
        for (int rep = 0; rep < 50; ++rep) {
            const int n = 16;
            const Mat P = randn(rng, n, 2);
            Vec c = randn(rng, n, 1).col(0);
            c.array() -= c.mean();  // zero-sum
            CHECK(cpd_quadratic_form(spec, P, c) >= -1e-9);
        }
    }
    // Non-zero-sum coefficients are rejected.
    Mat P(2, 2);
    P.setRandom();
    Vec c(2);
    c << 1.0, 1.0;
    CHECK_THROWS_AS(cpd_quadratic_form(laplace(), P, c), DomainError);
}

TEST_CASE("median pairwise distance") {
    // Three collinear points: pairwise distances 1, 1, 2; median 1.
    Mat X(2, 1), Y(1, 1);
    X << 0.0, 1.0;
    Y << 2.0;
    CHECK(median_heuristic(X, Y) == 1.0);

    // Identical points give distance zero; the fallback is 1.
    Mat Z = Mat::Zero(4, 2);
    CHECK(median_heuristic(Z, Z) == 1.0);

    Mat one = Mat::Zero(1, 2);
    Mat none(0, 2);
    CHECK_THROWS_AS(median_heuristic(one, none), DomainError);

    // Even pooled count: average of the two central order statistics.
    Mat A(4, 1), B(0, 1);
    A << 0.0, 1.0, 3.0, 7.0;  // distances 1,3,7,2,6,4 -> sorted 1,2,3,4,6,7 -> median 3.5
    CHECK(median_heuristic(A, B) == 3.5);
}
