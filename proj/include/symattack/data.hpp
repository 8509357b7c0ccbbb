#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symattack/model.hpp"

namespace symattack {

struct Dataset {
    std::string name;
    Matrix features;  // one sample per row, raw (unnormalized) values
    std::vector<int> labels;
    std::vector<int> train_indices;
    std::vector<int> test_indices;
    Vector shift;     // per-feature normalization fit on the train split
    Vector scale;
    int class_count = 0;

    Eigen::Index sample_count() const { return features.rows(); }
    Eigen::Index feature_count() const { return features.cols(); }

    Vector point(int index) const;  // normalized sample as a column vector
    Matrix train_matrix() const;    // normalized, one sample per column
    Matrix test_matrix() const;
    std::vector<int> train_labels() const;
    std::vector<int> test_labels() const;
};

// IDX pair (big-endian magic 0x803 images / 0x801 labels); pixels scaled to
// [0,1]. All samples land in the train split; pair with mark_as_test or
// merge_train_test.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// concatenates, keeping the first argument as the train split and the second
// as the test split
Dataset merge_train_test(const Dataset& train, const Dataset& test);

// rectangular CSV with a header row; z-score normalization fit on the seeded
// train split
Dataset load_csv(const std::string& path, const std::string& label_column,
                 double test_fraction = 0.2, std::uint64_t seed = 3);

// stand-in for the network-traffic corpus: 20 numeric features, binary
// labels, two overlapping anisotropic Gaussian clusters
Dataset make_synthetic_tabular(int samples, std::uint64_t seed);

TrainMetrics train(MlpModel& m, const Dataset& ds, const Hyperparams& hp);

}  // namespace symattack
