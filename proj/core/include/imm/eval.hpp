#pragma once

#include "imm/common.hpp"
#include "imm/rng.hpp"

#include <string>
#include <vector>

namespace imm {

// Unbiased U-statistic MMD^2 with an explicit Gaussian bandwidth (diagonal
// terms removed, so the null is centered at zero and small negatives occur).
double mmd2_ustat(const Mat& X, const Mat& Y, double bw);

// Same with the bandwidth set by the median pairwise distance of the pooled sample.
double two_sample_mmd(const Mat& X, const Mat& Y);

struct PermTestResult {
    double observed = 0.0;
    double null_mean = 0.0;
    double null_std = 0.0;
    double p_value = 1.0;  // fraction of permuted statistics >= observed
};

// Label-permutation null for two_sample_mmd over a precomputed pooled Gram matrix.
PermTestResult mmd_permutation_test(const Mat& X, const Mat& Y, int n_perm, Rng& rng);

// Mean 1-D Wasserstein-1 over n_proj random unit directions; handles unequal
// sample counts through the quantile form.
double sliced_w1(const Mat& X, const Mat& Y, int n_proj, Rng& rng);

// Nearest-center assignment within radius; counts has centers.rows() + 1
// entries, the last one the unassigned bucket; sums to X.rows().
std::vector<int> mode_coverage(const Mat& X, const Mat& centers, double radius);

// Null scale of the two-sample statistic: mean |two_sample_mmd| over n_splits
// disjoint (n_each vs n_each) splits of pool (needs 2 * n_each * n_splits rows).
double mmd2_baseline(const Mat& pool, int n_each, int n_splits);

struct EvalReport {
    double mmd2 = 0.0;
    double mmd2_baseline = 0.0;
    double sliced_w1 = 0.0;
    std::vector<int> mode_counts;
    int n_gen = 0;
    int n_data = 0;
};

// key=value lines; mode_counts space-separated.
std::string serialize(const EvalReport& report);

}  // namespace imm
