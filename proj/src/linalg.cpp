#include "symattack/linalg.hpp"

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

#include "symattack/rng.hpp"

namespace symattack {

KernelBasis kernel_basis(const Matrix& w, double tol) {
    if (w.rows() < 1 || w.cols() < 1)
        throw DimensionError("kernel_basis: matrix must be nonempty");
    const Eigen::Index n = w.cols();
    Eigen::BDCSVD<Matrix> svd(w, Eigen::ComputeFullV);
    const Vector& sing = svd.singularValues();
    const double cutoff = sing.size() > 0 ? tol * sing(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sing.size(); ++i)
        if (sing(i) > cutoff && sing(i) > 0.0) ++rank;
    KernelBasis k;
    k.ambient_dim = n;
    k.tolerance = tol;
    k.vectors = svd.matrixV().rightCols(n - rank);
    return k;
}

double spectral_norm(const Matrix& a, int iters, std::uint64_t seed) {
    if (a.size() == 0) return 0.0;
    if (a.isZero(0.0)) return 0.0;
    Rng rng(seed);
    Vector v = gaussian_vector(a.cols(), rng);
    v.normalize();
    double sigma = 0.0;
    for (int it = 0; it < iters; ++it) {
        Vector av = a * v;
        const double next = av.norm();
        Vector w = a.transpose() * av;
        const double wn = w.norm();
        if (wn == 0.0) return 0.0;  // v landed in the null space exactly
        v = w / wn;
        if (it > 0 && std::abs(next - sigma) <= 1e-12 * std::max(next, 1e-300))
            return next;
        sigma = next;
    }
    throw ConvergenceError("spectral_norm: power iteration did not stabilize");
}

Matrix random_orthogonal(Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    const Matrix g = gaussian_matrix(n, n, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

SymmetricSample random_symmetric(Eigen::Index n, double scale, std::uint64_t seed) {
    Rng rng(seed);
    const Matrix b = gaussian_matrix(n, n, rng);
    SymmetricSample out;
    out.s = (b + b.transpose()) * (0.5 * scale);
    Eigen::SelfAdjointEigenSolver<Matrix> es(out.s);
    out.eigenvalues = es.eigenvalues();
    out.eigenvectors = es.eigenvectors();
    return out;
}

}  // namespace symattack
