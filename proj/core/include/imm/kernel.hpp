#pragma once

#include "imm/common.hpp"

namespace imm {

enum class KernelKind { Laplace, RBF, Energy, PseudoHuber };

// Kernel family for the moment-matching loss. Laplace/RBF take the
// time-dependent weight wtilde = 1/|c_out(s,t)| when time_weighted is set;
// callers pass wtilde explicitly. Distances are normalized by the dimension D
// so wtilde stays dimension-free.
struct KernelSpec {
    KernelKind kind = KernelKind::Laplace;
    double c = 0.5;            // pseudo-Huber scale
    double bandwidth = 1.0;    // RBF bandwidth multiplier
    double dist_floor = 1e-8;  // Laplace distance floor (keeps the gradient defined at x = y)
    bool time_weighted = true;
};

// wtilde = 1/|c_out|; infinite c_out weight (c_out = 0) is the caller's skip condition.
double wtilde_from_cout(double c_out);

// Laplace: exp(-wtilde max(||x-y||, floor)/D); RBF: exp(-wtilde ||x-y||^2 / (2 D bw^2));
// Energy: -||x-y||^2; PseudoHuber: c - sqrt(||x-y||^2 + c^2).
double kernel_eval(const KernelSpec& spec, const Vec& x, const Vec& y, double wtilde);

// Gradient of kernel_eval with respect to x. The Laplace gradient is
// self-normalized: its norm is (wtilde/D) exp(-wtilde ||x-y||/D) whenever
// ||x-y|| exceeds the floor, and zero inside the floor.
Vec kernel_grad_x(const KernelSpec& spec, const Vec& x, const Vec& y, double wtilde);

// V-statistic (1/M^2) sum_{jk} [k(X_j,X_k) + k(Y_j,Y_k) - 2 k(X_j,Y_k)].
// The X block uses wtilde_t, the Y block wtilde_r, the cross term the
// online-branch weight wtilde_t.
double mmd_vstat(const KernelSpec& spec, const Mat& X, const Mat& Y, double wtilde_t, double wtilde_r);

// Gradient of mmd_vstat with respect to the rows of X, holding Y fixed:
// row j = (2/M^2) sum_k [grad_x k(X_j, X_k; wtilde_t) - grad_x k(X_j, Y_k; wtilde_t)].
Mat mmd_vstat_grad_x(const KernelSpec& spec, const Mat& X, const Mat& Y, double wtilde_t);

// Quadratic form sum_{ij} c_i c_j k(p_i, p_j) for zero-sum coefficients;
// nonnegative (up to numerical floor) for conditionally positive definite kernels.
double cpd_quadratic_form(const KernelSpec& spec, const Mat& points, const Vec& coeffs);

// Median pairwise Euclidean distance over the pooled rows of X and Y;
// falls back to 1.0 when the median is zero.
double median_heuristic(const Mat& X, const Mat& Y);

}  // namespace imm
