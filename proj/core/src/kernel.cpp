#include "imm/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace imm {

double wtilde_from_cout(double c_out) {
    const double a = std::abs(c_out);
    require(a > 0.0, "wtilde_from_cout: c_out = 0 gives an infinite kernel weight");
    return 1.0 / a;
}

namespace {

void check_pair(const Vec& x, const Vec& y) {
    require(x.size() == y.size(), "kernel: dimension mismatch");
    require(x.allFinite() && y.allFinite(), "kernel: non-finite input");
}

double eval_from_dist2(const KernelSpec& spec, double d2, int dim, double wtilde) {
    const double D = static_cast<double>(dim);
    switch (spec.kind) {
        case KernelKind::Laplace: {
            const double d = std::max(std::sqrt(d2), spec.dist_floor);
            return std::exp(-wtilde * d / D);
        }
        case KernelKind::RBF: {
            const double bw2 = spec.bandwidth * spec.bandwidth;
            return std::exp(-wtilde * d2 / (2.0 * D * bw2));
        }
        case KernelKind::Energy:
            return -d2;
        case KernelKind::PseudoHuber:
            return spec.c - std::sqrt(d2 + spec.c * spec.c);
    }
    return 0.0;
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Vec& x, const Vec& y, double wtilde) {
    check_pair(x, y);
    return eval_from_dist2(spec, (x - y).squaredNorm(), static_cast<int>(x.size()), wtilde);
}

Vec kernel_grad_x(const KernelSpec& spec, const Vec& x, const Vec& y, double wtilde) {
    check_pair(x, y);
    const Vec diff = x - y;
    const double d2 = diff.squaredNorm();
    const double D = static_cast<double>(x.size());
    switch (spec.kind) {
        case KernelKind::Laplace: {
            const double d = std::sqrt(d2);
            if (d <= spec.dist_floor) return Vec::Zero(x.size());  // flat inside the floor
            return (-(wtilde / D) * std::exp(-wtilde * d / D) / d) * diff;
        }
        case KernelKind::RBF: {
            const double bw2 = spec.bandwidth * spec.bandwidth;
            const double scale = wtilde / (D * bw2);
            return (-scale * std::exp(-0.5 * scale * d2)) * diff;
        }
        case KernelKind::Energy:
            return -2.0 * diff;
        case KernelKind::PseudoHuber:
            return (-1.0 / std::sqrt(d2 + spec.c * spec.c)) * diff;
    }
    return Vec::Zero(x.size());
}

double mmd_vstat(const KernelSpec& spec, const Mat& X, const Mat& Y, double wtilde_t, double wtilde_r) {
    require(X.rows() >= 1 && X.rows() == Y.rows(), "mmd_vstat: needs M >= 1 points on both sides");
    require(X.cols() == Y.cols(), "mmd_vstat: dimension mismatch");
    const int M = static_cast<int>(X.rows());
    const int dim = static_cast<int>(X.cols());
    double acc = 0.0;
    for (int j = 0; j < M; ++j) {
        for (int k = 0; k < M; ++k) {
            acc += eval_from_dist2(spec, (X.row(j) - X.row(k)).squaredNorm(), dim, wtilde_t);
            acc += eval_from_dist2(spec, (Y.row(j) - Y.row(k)).squaredNorm(), dim, wtilde_r);
            acc -= 2.0 * eval_from_dist2(spec, (X.row(j) - Y.row(k)).squaredNorm(), dim, wtilde_t);
        }
    }
    return acc / (static_cast<double>(M) * static_cast<double>(M));
}

Mat mmd_vstat_grad_x(const KernelSpec& spec, const Mat& X, const Mat& Y, double wtilde_t) {
    require(X.rows() >= 1 && X.rows() == Y.rows(), "mmd_vstat_grad_x: needs M >= 1 points on both sides");
    require(X.cols() == Y.cols(), "mmd_vstat_grad_x: dimension mismatch");
    const int M = static_cast<int>(X.rows());
    Mat G = Mat::Zero(X.rows(), X.cols());
    for (int j = 0; j < M; ++j) {
        Vec xj = X.row(j).transpose();
        Vec acc = Vec::Zero(X.cols());
        for (int k = 0; k < M; ++k) {
            acc += kernel_grad_x(spec, xj, X.row(k).transpose(), wtilde_t);
            acc -= kernel_grad_x(spec, xj, Y.row(k).transpose(), wtilde_t);
        }
        G.row(j) = (2.0 / (static_cast<double>(M) * static_cast<double>(M))) * acc.transpose();
    }
    return G;
}

double cpd_quadratic_form(const KernelSpec& spec, const Mat& points, const Vec& coeffs) {
    require(points.rows() == coeffs.size(), "cpd_quadratic_form: one coefficient per point");
    require(std::abs(coeffs.sum()) <= 1e-12, "cpd_quadratic_form: coefficients must sum to zero");
    const int n = static_cast<int>(points.rows());
    const int dim = static_cast<int>(points.cols());
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            acc += coeffs[i] * coeffs[j] *
                   eval_from_dist2(spec, (points.row(i) - points.row(j)).squaredNorm(), dim, 1.0);
    return acc;
}

double median_heuristic(const Mat& X, const Mat& Y) {
    const long n = X.rows() + Y.rows();
    require(n >= 2, "median_heuristic: need at least two pooled points");
    Mat pooled(n, X.cols() > 0 ? X.cols() : Y.cols());
    if (X.rows() > 0) pooled.topRows(X.rows()) = X;
    if (Y.rows() > 0) pooled.bottomRows(Y.rows()) = Y;
    std::vector<double> dists;
    dists.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (long i = 0; i < n; ++i)
        for (long j = i + 1; j < n; ++j) dists.push_back((pooled.row(i) - pooled.row(j)).norm());
    auto mid = dists.begin() + dists.size() / 2;
    std::nth_element(dists.begin(), mid, dists.end());
    double med = *mid;
    if (dists.size() % 2 == 0) {
        // Even count: average the two central order statistics.
        auto lo = std::max_element(dists.begin(), mid);
        med = 0.5 * (med + *lo);
    }
    return med > 0.0 ? med : 1.0;
}

}  // namespace imm
