#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ztafl/matrix.hpp"

namespace ztafl {

struct Dataset {
    Matrix X;                              // n x d
    std::vector<int> y;                    // labels in [0, C)
    std::vector<std::string> class_names;  // size C

    std::size_t size() const { return X.rows(); }
    std::size_t dim() const { return X.cols(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }
};

// Class-conditional Gaussian mixture: class c has a distinct block of active
// features shifted by +2.0, everything else standard normal. Classes are
// balanced to within one sample; fully determined by the seed.
Dataset generate_synthetic(std::size_t n, int d, int C, std::uint64_t seed);

// Per-feature affine map fitted on a training split.
struct NormalizationMap {
    std::vector<double> min;
    std::vector<double> max;
};

NormalizationMap minmax_fit(const Dataset& train);

// (x - min) / (max - min); zero-range features map to 0. Values outside the
// fitted range are preserved (no clipping).
void minmax_apply(const NormalizationMap& map, Dataset& ds);

struct SplitResult {
    Dataset train, val, test;
};

// Stratified 70/15/15 split; per-class proportions within one sample of the
// quotas, global quotas hit exactly where the arithmetic allows.
SplitResult split_dataset(const Dataset& ds, std::uint64_t seed,
                          double train_frac = 0.70, double val_frac = 0.15);

// Subset by row indices.
Dataset take(const Dataset& ds, const std::vector<std::size_t>& indices);

// CSV ingestion: header row required, label column selected by name,
// remaining numeric columns become features. Bad rows are reported by index.
Dataset load_csv(const std::string& path, const std::string& label_column);

// Inverse of load_csv (used by tests and report tooling).
void write_csv(const std::string& path, const Dataset& ds, const std::string& label_column);

}  // namespace ztafl
