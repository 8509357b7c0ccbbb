#pragma once

#include "symattack/linalg.hpp"

namespace symattack {

// element (g, u) of Aff_n(R): acts by x -> g x + u
struct GroupElement {
    Matrix linear;
    Vector translation;

    static GroupElement identity(Eigen::Index n) {
        return {Matrix::Identity(n, n), Vector::Zero(n)};
    }
};

// n x n matrix A with W A = 0, so that exp(tA) fixes the first layer for
// every t. Column space of A lies in ker(W) by construction.
struct LieGenerator {
    Matrix a;
    bool skew = false;
    Vector source_x;
    Vector source_y;
};

// A = x_k y^T with x_k the kernel projection of x
LieGenerator rank_one_generator(const Vector& x, const Vector& y, const KernelBasis& k);

// A = (x_k y_k^T - y_k x_k^T) / 2, both arguments projected; exp(tA) is orthogonal
LieGenerator skew_generator(const Vector& x, const Vector& y, const KernelBasis& k);

// t* = log(eps / ||x||_inf + 1) / ||A||_inf; ||exp(tA) x - x||_inf <= eps
// for all |t| <= t*
double max_step(const LieGenerator& a, const Vector& x, double eps);

GroupElement exp_element(const LieGenerator& a, double t);

GroupElement translation_element(const Vector& y, double delta);

// semidirect law (g, u) * (h, v) = (g h, g v + u)
GroupElement compose(const GroupElement& g, const GroupElement& h);

// (g, u)^-1 = (g^-1, -g^-1 u)
GroupElement invert(const GroupElement& g);

Vector act(const GroupElement& g, const Vector& x);

// residual max(||W g - W||_inf, ||W u||_inf); zero means exact symmetry
double verify_symmetry(const Matrix& w, const GroupElement& g);

}  // namespace symattack
