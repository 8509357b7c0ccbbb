#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symattack/linalg.hpp"

namespace symattack {

enum class Activation { Relu, Identity, Softmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct Layer {
    Matrix w;
    Vector b;
    Activation activation = Activation::Identity;
};

// Feed-forward MLP. Softmax is a tag on the final layer only; forward()
// returns pre-softmax logits unless probabilities are requested.
struct MlpModel {
    std::vector<Layer> layers;

    Eigen::Index input_dim() const { return layers.front().w.cols(); }
    Eigen::Index output_dim() const { return layers.back().w.rows(); }
    const Matrix& first_layer_matrix() const { return layers.front().w; }

    // throws on shape chain breaks, softmax off the last layer, non-finite weights
    void validate() const;
};

// selects one pre-softmax logit as the scalar function the attribution
// theory works with
struct ScalarHead {
    const MlpModel& model;
    int class_index;
};

struct ModelSplit {
    MlpModel h;  // layers 1..j
    MlpModel f;  // layers j+1..end
    int split_index = 0;
};

Vector forward(const MlpModel& m, const Vector& x, bool probabilities = false);
Matrix forward_batch(const MlpModel& m, const Matrix& x_cols);

// per-layer preactivations W_l z + b_l, before the activation is applied
std::vector<Vector> preactivations(const MlpModel& m, const Vector& x);

double head_value(const ScalarHead& head, const Vector& x);

// J(x)^T cotangent through the whole model (pre-softmax outputs).
// ReLU subgradient at 0 is taken as 0.
Vector vjp(const MlpModel& m, const Vector& x, const Vector& cotangent);

Vector gradient(const ScalarHead& head, const Vector& x);

ModelSplit split(const MlpModel& m, int j);

// product of layer spectral norms, final layer restricted to the head row;
// upper-bounds the Lipschitz constant since relu/identity are 1-Lipschitz
double lipschitz_bound(const ScalarHead& head);

struct GroupElement;  // defined in symmetry.hpp

// (g . F)(x) = F(g^-1 x): replaces the first layer by W1 Q^-1, b1 - W1 Q^-1 u
MlpModel transform_model(const MlpModel& m, const GroupElement& g);

// He-initialized classifier: hidden layers relu, final layer softmax-tagged
MlpModel make_classifier(const std::vector<int>& dims, std::uint64_t seed);

struct Hyperparams {
    double lr = 0.05;
    double momentum = 0.9;
    int batch = 64;
    int epochs = 20;
    std::uint64_t seed = 1;
};

struct TrainMetrics {
    double train_accuracy = 0;
    double test_accuracy = 0;
    double train_macro_f1 = 0;
    double test_macro_f1 = 0;
};

// minibatch SGD with momentum on softmax cross-entropy; seeded shuffling.
// x matrices hold one sample per column.
TrainMetrics train(MlpModel& m, const Matrix& x_train, const std::vector<int>& y_train,
                   const Matrix& x_test, const std::vector<int>& y_test,
                   const Hyperparams& hp);

double accuracy(const MlpModel& m, const Matrix& x_cols, const std::vector<int>& y);
double macro_f1(const MlpModel& m, const Matrix& x_cols, const std::vector<int>& y);

void save_model(const MlpModel& m, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace symattack
