#include "symattack/symmetry.hpp"

namespace symattack {

LieGenerator rank_one_generator(const Vector& x, const Vector& y, const KernelBasis& k) {
    if (x.size() != k.ambient_dim || y.size() != k.ambient_dim)
        throw DimensionError("rank_one_generator: dims do not match ambient dim");
    if (k.empty()) throw TrivialSymmetryError("kernel is trivial, no generators exist");
    const Vector xk = project_onto_kernel(x, k);
    if (xk.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, x.lpNorm<Eigen::Infinity>()))
        throw DegenerateGeneratorError("kernel projection of x is numerically zero");
    LieGenerator g;
    g.a = xk * y.transpose();
    g.skew = false;
    g.source_x = x;
    g.source_y = y;
    return g;
}

LieGenerator skew_generator(const Vector& x, const Vector& y, const KernelBasis& k) {
    if (x.size() != k.ambient_dim || y.size() != k.ambient_dim)
        throw DimensionError("skew_generator: dims do not match ambient dim");
    if (k.empty()) throw TrivialSymmetryError("kernel is trivial, no generators exist");
    const Vector xk = project_onto_kernel(x, k);
    const Vector yk = project_onto_kernel(y, k);
    const double floor_x = 1e-12 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    const double floor_y = 1e-12 * std::max(1.0, y.lpNorm<Eigen::Infinity>());
    if (xk.lpNorm<Eigen::Infinity>() <= floor_x || yk.lpNorm<Eigen::Infinity>() <= floor_y)
        throw DegenerateGeneratorError("kernel projection is numerically zero");
    LieGenerator g;
    g.a = 0.5 * (xk * yk.transpose() - yk * xk.transpose());
    g.skew = true;
    g.source_x = x;
    g.source_y = y;
    return g;
}

double max_step(const LieGenerator& a, const Vector& x, double eps) {
    if (eps <= 0.0) throw DegenerateGeneratorError("max_step: eps must be positive");
    const double anorm = operator_inf_norm(a.a);
    const double xnorm = x.lpNorm<Eigen::Infinity>();
    if (anorm == 0.0) throw DegenerateGeneratorError("max_step: zero generator");
    if (xnorm == 0.0) throw DegenerateGeneratorError("max_step: zero input vector");
    return std::log1p(eps / xnorm) / anorm;
}

GroupElement exp_element(const LieGenerator& a, double t) {
    GroupElement g;
    g.linear = matrix_exp(t * a.a);
    g.translation = Vector::Zero(a.a.rows());
    return g;
}

GroupElement translation_element(const Vector& y, double delta) {
    GroupElement g;
    g.linear = Matrix::Identity(y.size(), y.size());
    g.translation = delta * y;
    return g;
}

GroupElement compose(const GroupElement& g, const GroupElement& h) {
    if (g.linear.cols() != h.linear.rows() || g.translation.size() != h.translation.size())
        throw DimensionError("compose: dims do not match");
    GroupElement out;
    out.linear = g.linear * h.linear;
    out.translation = g.linear * h.translation + g.translation;
    return out;
}

GroupElement invert(const GroupElement& g) {
    Eigen::FullPivLU<Matrix> lu(g.linear);
    if (!lu.isInvertible()) throw DegenerateGeneratorError("invert: singular linear part");
    GroupElement out;
    out.linear = lu.inverse();
    out.translation = -(out.linear * g.translation);
    return out;
}

Vector act(const GroupElement& g, const Vector& x) {
    if (g.linear.cols() != x.size()) throw DimensionError("act: dims do not match");
    return g.linear * x + g.translation;
}

double verify_symmetry(const Matrix& w, const GroupElement& g) {
    if (w.cols() != g.linear.rows()) throw DimensionError("verify_symmetry: dims do not match");
    const double linear_residual = operator_inf_norm(w * g.linear - w);
    const double translation_residual = (w * g.translation).lpNorm<Eigen::Infinity>();
    return std::max(linear_residual, translation_residual);
}

}  // namespace symattack
