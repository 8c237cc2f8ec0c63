#include "imm/eval.hpp"

#include "imm/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace imm {

namespace {

double gauss(double d2, double bw) { return std::exp(-d2 / (2.0 * bw * bw)); }

// U-statistic from a pooled Gram matrix under the index partition
// (first n of idx) vs (rest); diagonal removed on both blocks.
double ustat_from_gram(const Mat& G, const std::vector<int>& idx, int n) {
    const int total = static_cast<int>(idx.size());
    const int m = total - n;
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) kxx += G(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    for (int i = n; i < total; ++i)
        for (int j = n; j < total; ++j)
            if (i != j) kyy += G(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    for (int i = 0; i < n; ++i)
        for (int j = n; j < total; ++j) kxy += G(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    return kxx / (static_cast<double>(n) * (n - 1)) + kyy / (static_cast<double>(m) * (m - 1)) -
           2.0 * kxy / (static_cast<double>(n) * m);
}

}  // namespace

double mmd2_ustat(const Mat& X, const Mat& Y, double bw) {
    require(X.rows() >= 2 && Y.rows() >= 2, "mmd2_ustat: needs at least two points per sample");
    require(X.cols() == Y.cols(), "mmd2_ustat: dimension mismatch");
    require(bw > 0.0, "mmd2_ustat: bandwidth must be positive");
    const Eigen::Index n = X.rows(), m = Y.rows();
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) kxx += gauss((X.row(i) - X.row(j)).squaredNorm(), bw);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j) kyy += gauss((Y.row(i) - Y.row(j)).squaredNorm(), bw);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) kxy += gauss((X.row(i) - Y.row(j)).squaredNorm(), bw);
    return 2.0 * kxx / (static_cast<double>(n) * (n - 1)) + 2.0 * kyy / (static_cast<double>(m) * (m - 1)) -
           2.0 * kxy / (static_cast<double>(n) * m);
}

double two_sample_mmd(const Mat& X, const Mat& Y) { return mmd2_ustat(X, Y, median_heuristic(X, Y)); }

PermTestResult mmd_permutation_test(const Mat& X, const Mat& Y, int n_perm, Rng& rng) {
    require(n_perm >= 1, "mmd_permutation_test: n_perm must be >= 1");
    require(X.rows() >= 2 && Y.rows() >= 2 && X.cols() == Y.cols(), "mmd_permutation_test: bad shapes");
    const int n = static_cast<int>(X.rows());
    const int total = n + static_cast<int>(Y.rows());
    Mat pooled(total, X.cols());
    pooled.topRows(n) = X;
    pooled.bottomRows(Y.rows()) = Y;
    const double bw = median_heuristic(X, Y);
    Mat G(total, total);
    for (int i = 0; i < total; ++i) {
        G(i, i) = 1.0;
        for (int j = i + 1; j < total; ++j)
            G(i, j) = G(j, i) = gauss((pooled.row(i) - pooled.row(j)).squaredNorm(), bw);
    }

    std::vector<int> idx(static_cast<size_t>(total));
    std::iota(idx.begin(), idx.end(), 0);
    PermTestResult res;
    res.observed = ustat_from_gram(G, idx, n);

    double acc = 0.0, acc2 = 0.0;
    int n_ge = 0;
    for (int p = 0; p < n_perm; ++p) {
        for (int i = total - 1; i > 0; --i) std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(i + 1))]);
        const double stat = ustat_from_gram(G, idx, n);
        acc += stat;
        acc2 += stat * stat;
        if (stat >= res.observed) ++n_ge;
    }
    res.null_mean = acc / n_perm;
    res.null_std = std::sqrt(std::max(0.0, acc2 / n_perm - res.null_mean * res.null_mean));
    res.p_value = (1.0 + n_ge) / (n_perm + 1.0);
    return res;
}

namespace {

// W1 between two sorted 1-D empirical distributions via the quantile form;
// sizes may differ.
double w1_sorted(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    size_t i = 0, j = 0;
    double u = 0.0, acc = 0.0;
    while (i < a.size() && j < b.size()) {
        const double ua = static_cast<double>(i + 1) / na;
        const double ub = static_cast<double>(j + 1) / nb;
        const double next = std::min(ua, ub);
        acc += (next - u) * std::abs(a[i] - b[j]);
        if (ua <= next) ++i;
        if (ub <= next) ++j;
        u = next;
    }
    return acc;
}

}  // namespace

double sliced_w1(const Mat& X, const Mat& Y, int n_proj, Rng& rng) {
    require(X.rows() >= 1 && Y.rows() >= 1, "sliced_w1: empty input");
    require(X.cols() == Y.cols(), "sliced_w1: dimension mismatch");
    require(n_proj >= 1, "sliced_w1: n_proj must be >= 1");
    const Eigen::Index d = X.cols();
    double acc = 0.0;
    std::vector<double> a(static_cast<size_t>(X.rows()));
    std::vector<double> b(static_cast<size_t>(Y.rows()));
    for (int p = 0; p < n_proj; ++p) {
        Vec dir(d);
        double norm = 0.0;
        do {
            for (Eigen::Index k = 0; k < d; ++k) dir[k] = rng.normal();
            norm = dir.norm();
        } while (norm == 0.0);
        dir /= norm;
        for (Eigen::Index i = 0; i < X.rows(); ++i) a[static_cast<size_t>(i)] = X.row(i).dot(dir);
        for (Eigen::Index i = 0; i < Y.rows(); ++i) b[static_cast<size_t>(i)] = Y.row(i).dot(dir);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        acc += w1_sorted(a, b);
    }
    return acc / n_proj;
}

std::vector<int> mode_coverage(const Mat& X, const Mat& centers, double radius) {
    require(centers.rows() >= 1, "mode_coverage: needs at least one center");
    require(X.cols() == centers.cols(), "mode_coverage: dimension mismatch");
    require(radius > 0.0, "mode_coverage: radius must be positive");
    std::vector<int> counts(static_cast<size_t>(centers.rows()) + 1, 0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        int best = -1;
        double best_d = radius;
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double dist = (X.row(i) - centers.row(c)).norm();
            if (dist <= best_d) {
                best_d = dist;
                best = static_cast<int>(c);
            }
        }
        ++counts[best >= 0 ? static_cast<size_t>(best) : counts.size() - 1];
    }
    return counts;
}

double mmd2_baseline(const Mat& pool, int n_each, int n_splits) {
    require(n_each >= 2 && n_splits >= 1, "mmd2_baseline: need n_each >= 2 and n_splits >= 1");
    require(pool.rows() >= static_cast<Eigen::Index>(2) * n_each * n_splits,
            "mmd2_baseline: pool too small for the requested splits");
    double acc = 0.0;
    for (int k = 0; k < n_splits; ++k) {
        const Mat A = pool.middleRows(2 * k * n_each, n_each);
        const Mat B = pool.middleRows((2 * k + 1) * n_each, n_each);
        acc += std::abs(two_sample_mmd(A, B));
    }
    return acc / n_splits;
}

std::string serialize(const EvalReport& report) {
    std::string out;
    out += "mmd2=" + fmt_double(report.mmd2) + "\n";
    out += "mmd2_baseline=" + fmt_double(report.mmd2_baseline) + "\n";
    out += "sliced_w1=" + fmt_double(report.sliced_w1) + "\n";
    out += "n_gen=" + std::to_string(report.n_gen) + "\n";
    out += "n_data=" + std::to_string(report.n_data) + "\n";
    out += "mode_counts=";
    for (size_t i = 0; i < report.mode_counts.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(report.mode_counts[i]);
    }
    out += "\n";
    return out;
}

}  // namespace imm
