#pragma once

#include <cstdint>
#include <cmath>

#include <Eigen/Dense>

#include "symattack/errors.hpp"

namespace symattack {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// max absolute row sum, the operator norm induced by the vector inf-norm
template <typename Derived>
typename Derived::Scalar operator_inf_norm(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() == 0 || a.cols() == 0) return typename Derived::Scalar(0);
    return a.cwiseAbs().rowwise().sum().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
    return a.allFinite();
}

// exp(A) by scaling and squaring: halve until the inf-norm is <= 1/2, run a
// truncated Taylor series in Horner form, square back up.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
matrix_exp(const Eigen::MatrixBase<Derived>& a) {
    using Scalar = typename Derived::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (a.rows() != a.cols()) throw DimensionError("matrix_exp: input must be square");
    const Eigen::Index n = a.rows();
    if (n == 0) return Mat(0, 0);

    Scalar nrm = operator_inf_norm(a);
    int squarings = 0;
    Scalar scale(1);
    while (nrm * scale > Scalar(0.5)) {
        scale /= Scalar(2);
        ++squarings;
    }
    const Mat b = a * scale;

    constexpr int order = 16;  // remainder < 1e-19 at norm 1/2
    Mat e = Mat::Identity(n, n);
    for (int k = order; k >= 1; --k) e = Mat::Identity(n, n) + (b * e) / Scalar(k);
    for (int s = 0; s < squarings; ++s) e = (e * e).eval();
    return e;
}

// Orthonormal basis of ker(W), columns of `vectors`. Singular values below
// tolerance * sigma_max count as zero.
struct KernelBasis {
    Eigen::Index ambient_dim = 0;
    Matrix vectors;  // ambient_dim x count, orthonormal columns
    double tolerance = 1e-10;

    Eigen::Index count() const { return vectors.cols(); }
    bool empty() const { return vectors.cols() == 0; }
    const Vector basis_vector(Eigen::Index i) const { return vectors.col(i); }
};

KernelBasis kernel_basis(const Matrix& w, double tol = 1e-10);

template <typename Derived>
Vector project_onto_kernel(const Eigen::MatrixBase<Derived>& x, const KernelBasis& k) {
    if (x.size() != k.ambient_dim)
        throw DimensionError("project_onto_kernel: vector dim does not match ambient dim");
    if (k.empty()) return Vector::Zero(k.ambient_dim);
    return k.vectors * (k.vectors.transpose() * x);
}

// Largest singular value by power iteration on A^T A with a relative
// stabilization check; throws ConvergenceError if iters are exhausted.
double spectral_norm(const Matrix& a, int iters = 500, std::uint64_t seed = 12345);

Matrix random_orthogonal(Eigen::Index n, std::uint64_t seed);

struct SymmetricSample {
    Matrix s;
    Vector eigenvalues;
    Matrix eigenvectors;  // columns
};

SymmetricSample random_symmetric(Eigen::Index n, double scale, std::uint64_t seed);

}  // namespace symattack
