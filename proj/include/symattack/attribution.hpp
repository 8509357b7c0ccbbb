#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symattack/model.hpp"

namespace symattack {

struct PathSpec {
    enum class Kind { StraightLine, Sampled };
    Kind kind = Kind::StraightLine;
    Vector start;                 // x'
    Vector end;                   // x
    std::vector<Vector> samples;  // sampled paths: uniformly spaced in t, first = start, last = end
    int steps = 256;              // quadrature panels for straight lines

    static PathSpec straight_line(const Vector& x_base, const Vector& x, int steps = 256);
    static PathSpec sampled(std::vector<Vector> samples);
};

struct AttributionVector {
    Vector values;
    std::string method;        // ig | sg | clime | conductance
    std::string basis_tag = "standard";
    int steps = 0;
    int sample_count = 0;
    std::uint64_t seed = 0;
    Vector stderrs;            // smoothgrad/clime: per-component standard errors
};

struct CovarianceSpec {
    Matrix sigma;
    int sample_count = 0;
    std::uint64_t seed = 0;

    static CovarianceSpec isotropic(Eigen::Index n, double variance, int d, std::uint64_t seed);
};

// Quadrature nodes on [0,1] for straight-line integrals through `m`:
// the uniform partition with `steps` panels plus a pair of nodes straddling
// every ReLU activation crossing along the segment. Preactivations are
// piecewise linear in t, so crossings are found layer by layer exactly;
// with them in the node set the trapezoid rule is exact up to the 1e-9
// straddle width, which plain uniform nodes cannot deliver at tight
// completeness tolerances.
std::vector<double> quadrature_nodes(const MlpModel& m, const Vector& x_base, const Vector& x,
                                     int steps);

// directional component integral(<grad F(gamma(t)), v> <gamma'(t), v>) dt
double path_attribution(const ScalarHead& head, const PathSpec& path, const Vector& v);

// (x - x') .* average gradient along the straight line
AttributionVector integrated_gradients(const ScalarHead& head, const Vector& x,
                                       const Vector& x_base, int steps = 256);

// attribution of input i flowing through hidden neuron j of the split
double conductance_ij(const ModelSplit& split, int head_class, const Vector& x,
                      const Vector& x_base, int i, int j, int steps = 256);

// integral(<grad f(h(gamma(t))), w> d/dt <w, h(gamma(t))>) dt
double conductance_direction(const ModelSplit& split, int head_class, const Vector& x,
                             const Vector& x_base, const Vector& w, int steps = 256);

// conductance over the standard hidden basis, component j = direction e_j
AttributionVector conductance_vector(const ModelSplit& split, int head_class, const Vector& x,
                                     const Vector& x_base, int steps = 256);

// noise draws a_i = L z_i with sigma = L L^T (symmetric eigendecomposition
// factor) and z_i from per-index forked streams; one column per draw
Matrix smoothgrad_draws(const CovarianceSpec& cov, Eigen::Index n);

AttributionVector smoothgrad(const ScalarHead& head, const Vector& x, const CovarianceSpec& cov);

// shared-draw variant used by the equivariance property: the transformed run
// reuses the base draws mapped through the group's linear part
AttributionVector smoothgrad_with_draws(const ScalarHead& head, const Vector& x,
                                        const Matrix& draws);

// least-squares linear surrogate over z_i ~ N(x, sigma); returns the slope
// with its OLS standard errors
AttributionVector clime(const ScalarHead& head, const Vector& x, const CovarianceSpec& cov);

}  // namespace symattack
