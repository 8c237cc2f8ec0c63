#pragma once

#include "imm/common.hpp"
#include "imm/rng.hpp"

#include <vector>

namespace imm {

enum class DatasetKind { GaussRing8, Checkerboard, TwoMoons };

// 2-D toy densities rescaled to per-dimension std sigma_d by closed-form
// moments (no empirical calibration). GaussRing8 carries one class per mode;
// the other two are single-class.
struct ToyDataset {
    DatasetKind kind = DatasetKind::GaussRing8;
    int n_classes = 8;
    double scale = 1.0;    // multiplies the raw construction
    double sigma_d = 0.5;  // target std the scale was derived for
};

ToyDataset make_dataset(DatasetKind kind, double sigma_d = 0.5);

// n rows into X (n x 2) and labels; one fixed rng-draw order per sample.
void sample_dataset(const ToyDataset& ds, int n, Rng& rng, Mat& X, std::vector<int>& labels);

// GaussRing8 only: the 8 rescaled mode means (8 x 2), ordered by angle.
Mat mode_centers(const ToyDataset& ds);

// Half the minimum intercenter distance; the assignment radius for coverage counting.
double coverage_radius(const ToyDataset& ds);

// Plain-text sample file: `# D=<dim> N=<count>` header, then one row per
// sample (space-separated coordinates, optional trailing integer label).
void write_samples(const std::string& path, const Mat& X, const std::vector<int>* labels);

// Reads the format back; labels comes back empty when the file has none.
void read_samples(const std::string& path, Mat& X, std::vector<int>& labels);

}  // namespace imm
