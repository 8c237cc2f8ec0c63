#include "imm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace imm {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRingRadius = 1.0;
constexpr double kRingStd = kRingRadius / 20.0;
constexpr double kMoonNoise = 0.05;

// Per-dimension variances of the raw constructions:
//   ring: E[center^2] + component var = 1/2 + (1/20)^2
//   checkerboard on [-2,2]^2: uniform marginal, 4^2/12
//   two moons: E[cos^2]=E[sin^2]=1/2 over a half turn gives the x/y moments below
double raw_variance(DatasetKind kind, int dim) {
    switch (kind) {
        case DatasetKind::GaussRing8:
            return 0.5 + kRingStd * kRingStd;
        case DatasetKind::Checkerboard:
            return 16.0 / 12.0;
        case DatasetKind::TwoMoons:
            return dim == 0 ? 0.7525 : 0.565 - 1.0 / kPi;
    }
    return 1.0;
}

// Two moons is not centered; its closed-form mean gets subtracted before scaling.
double raw_mean(DatasetKind kind, int dim) {
    if (kind == DatasetKind::TwoMoons) return dim == 0 ? 0.5 : 0.25;
    return 0.0;
}

}  // namespace

ToyDataset make_dataset(DatasetKind kind, double sigma_d) {
    require(sigma_d > 0.0, "dataset: sigma_d must be positive");
    ToyDataset ds;
    ds.kind = kind;
    ds.sigma_d = sigma_d;
    ds.n_classes = kind == DatasetKind::GaussRing8 ? 8 : 1;
    // The two isotropic datasets share one scale; two moons is standardized per dimension
    // inside sample_dataset, so its scale stays 1.
    ds.scale = kind == DatasetKind::TwoMoons ? 1.0 : sigma_d / std::sqrt(raw_variance(kind, 0));
    return ds;
}

void sample_dataset(const ToyDataset& ds, int n, Rng& rng, Mat& X, std::vector<int>& labels) {
    require(n >= 0, "dataset: n must be nonnegative");
    X.resize(n, 2);
    labels.assign(static_cast<size_t>(n), 0);
    switch (ds.kind) {
        case DatasetKind::GaussRing8:
            for (int i = 0; i < n; ++i) {
                const int mode = static_cast<int>(rng.uniform_int(8));
                const double ang = 2.0 * kPi * mode / 8.0;
                const double x = kRingRadius * std::cos(ang) + kRingStd * rng.normal();
                const double y = kRingRadius * std::sin(ang) + kRingStd * rng.normal();
                X(i, 0) = ds.scale * x;
                X(i, 1) = ds.scale * y;
                labels[static_cast<size_t>(i)] = mode;
            }
            break;
        case DatasetKind::Checkerboard:
            for (int i = 0; i < n; ++i) {
                // 8 active unit cells of the 4x4 board on [-2,2]^2: (cx + cy) even.
                const int cell = static_cast<int>(rng.uniform_int(8));
                const int cy = cell / 2;
                const int cx = 2 * (cell % 2) + (cy % 2);
                const double x = -2.0 + cx + rng.uniform();
                const double y = -2.0 + cy + rng.uniform();
                X(i, 0) = ds.scale * x;
                X(i, 1) = ds.scale * y;
            }
            break;
        case DatasetKind::TwoMoons:
            for (int i = 0; i < n; ++i) {
                const int branch = static_cast<int>(rng.uniform_int(2));
                const double th = kPi * rng.uniform();
                double x = branch == 0 ? std::cos(th) : 1.0 - std::cos(th);
                double y = branch == 0 ? std::sin(th) : 0.5 - std::sin(th);
                x += kMoonNoise * rng.normal();
                y += kMoonNoise * rng.normal();
                X(i, 0) = ds.sigma_d * (x - raw_mean(ds.kind, 0)) / std::sqrt(raw_variance(ds.kind, 0));
                X(i, 1) = ds.sigma_d * (y - raw_mean(ds.kind, 1)) / std::sqrt(raw_variance(ds.kind, 1));
            }
            break;
    }
}

Mat mode_centers(const ToyDataset& ds) {
    require(ds.kind == DatasetKind::GaussRing8, "mode_centers: defined for the Gaussian ring");
    Mat centers(8, 2);
    for (int k = 0; k < 8; ++k) {
        const double ang = 2.0 * kPi * k / 8.0;
        centers(k, 0) = ds.scale * kRingRadius * std::cos(ang);
        centers(k, 1) = ds.scale * kRingRadius * std::sin(ang);
    }
    return centers;
}

double coverage_radius(const ToyDataset& ds) {
    const Mat c = mode_centers(ds);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < c.rows(); ++i)
        for (int j = i + 1; j < c.rows(); ++j) best = std::min(best, (c.row(i) - c.row(j)).norm());
    return best / 2.0;
}

void write_samples(const std::string& path, const Mat& X, const std::vector<int>* labels) {
    require(labels == nullptr || static_cast<Eigen::Index>(labels->size()) == X.rows(),
            "write_samples: label count mismatch");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeFault("write_samples: cannot open " + path);
    out << "# D=" << X.cols() << " N=" << X.rows() << "\n";
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            if (j) out << ' ';
            out << fmt_double(X(i, j));
        }
        if (labels) out << ' ' << (*labels)[static_cast<std::size_t>(i)];
        out << '\n';
    }
    if (!out) throw RuntimeFault("write_samples: write failed: " + path);
}

void read_samples(const std::string& path, Mat& X, std::vector<int>& labels) {
    std::ifstream in(path);
    if (!in) throw RuntimeFault("read_samples: cannot open " + path);
    std::string header;
    std::getline(in, header);
    int dim = 0;
    long n = 0;
    if (std::sscanf(header.c_str(), "# D=%d N=%ld", &dim, &n) != 2 || dim <= 0 || n < 0)
        throw RuntimeFault("read_samples: bad header in " + path);
    X.resize(n, dim);
    labels.clear();
    std::string line;
    for (long i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw RuntimeFault("read_samples: truncated file " + path);
        std::istringstream row(line);
        for (int j = 0; j < dim; ++j) {
            if (!(row >> X(i, j))) throw RuntimeFault("read_samples: bad row in " + path);
        }
        int label;
        if (row >> label) labels.push_back(label);
    }
    if (!labels.empty() && static_cast<long>(labels.size()) != n)
        throw RuntimeFault("read_samples: mixed labeled/unlabeled rows in " + path);
}

}  // namespace imm
