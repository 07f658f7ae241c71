#ifndef XCM_DATASET_HPP
#define XCM_DATASET_HPP

#include <optional>
#include <string>
#include <vector>

#include "xcm/tensor.hpp"

namespace xcm {

// Discriminative region planted in a sample: dimension `dim`, timestamps
// [t_start, t_end).
struct GroundTruthRegion {
    int dim = 0;
    int t_start = 0;
    int t_end = 0;
};

// A set of equal-shape multivariate time series with integer class labels.
// Samples are [D, T] matrices (D observed variables, T timestamps).
struct MTSDataset {
    std::string name;
    std::vector<Tensor> samples;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::vector<std::optional<GroundTruthRegion>> regions;  // empty when unknown

    int size() const { return static_cast<int>(samples.size()); }
    int dims() const { return samples.empty() ? 0 : samples[0].dim(0); }
    int length() const { return samples.empty() ? 0 : samples[0].dim(1); }
    int n_classes() const { return static_cast<int>(class_names.size()); }

    // Enforces the structural invariants (shared shape, label range, region
    // bounds); throws std::invalid_argument on violation.
    void validate() const;

    MTSDataset subset(const std::vector<int>& indices) const;
};

// Reads the UEA .ts text format. Supported directives: @problemName,
// @univariate, @dimensions, @equalLength, @seriesLength, @classLabel, @data;
// '#' lines are comments. Variable-length or missing-value datasets are
// rejected as unsupported.
MTSDataset load_ts_file(const std::string& path);

// Writes the dataset back out in the same layout with full round-trip
// decimal precision (%.17g).
void save_ts_file(const MTSDataset& ds, const std::string& path);

struct SyntheticParams {
    int n_per_class = 10;
    int length = 100;
    double noise_sigma = 0.05;
    double sine_amplitude = 1.0;
    double sine_period = 25.0;
    double pulse_amplitude = 2.0;
    int pulse_start = 60;
    int pulse_end = 80;  // exclusive
    bool randomize_phase = true;
};

// Two-class sine-wave dataset: the positive class carries a constant square
// pulse replacing the sine on dimension 0 over [pulse_start, pulse_end).
// Ground-truth regions are attached to every positive sample.
MTSDataset generate_synthetic(const SyntheticParams& params, std::uint64_t seed);

struct FoldAssignment {
    std::vector<int> fold_of_sample;
    int k = 0;

    std::vector<int> fold_indices(int fold) const;
    std::vector<int> complement_indices(int fold) const;
};

// Seeded per-class shuffle followed by round-robin assignment, so per-class
// fold sizes differ by at most one.
FoldAssignment stratified_folds(const MTSDataset& ds, int k, std::uint64_t seed);

Tensor to_onehot(const std::vector<int>& labels, int classes);

}  // namespace xcm

#endif
