#include "symattack/attribution.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "symattack/rng.hpp"

namespace symattack {

PathSpec PathSpec::straight_line(const Vector& x_base, const Vector& x, int steps) {
    if (x_base.size() != x.size()) throw DimensionError("path: endpoint dims differ");
    if (steps < 1) throw DimensionError("path: steps must be >= 1");
    PathSpec p;
    p.kind = Kind::StraightLine;
    p.start = x_base;
    p.end = x;
    p.steps = steps;
    return p;
}

PathSpec PathSpec::sampled(std::vector<Vector> samples) {
    if (samples.size() < 2) throw DimensionError("sampled path needs at least 2 samples");
    PathSpec p;
    p.kind = Kind::Sampled;
    p.start = samples.front();
    p.end = samples.back();
    p.steps = static_cast<int>(samples.size()) - 1;
    p.samples = std::move(samples);
    return p;
}

std::vector<double> quadrature_nodes(const MlpModel& m, const Vector& x_base, const Vector& x,
                                     int steps) {
    if (steps < 1) throw DimensionError("quadrature_nodes: steps must be >= 1");
    const Vector dir = x - x_base;
    auto preacts_at = [&](double t) { return preactivations(m, x_base + t * dir); };

    // segment endpoints, refined one relu layer at a time; within a segment
    // every earlier layer's mask is constant, so this layer's preactivation
    // is linear in t between the endpoints
    std::vector<double> seg = {0.0, 1.0};
    std::vector<std::vector<Vector>> evals = {preacts_at(0.0), preacts_at(1.0)};
    std::vector<double> crossings;
    for (std::size_t layer = 0; layer < m.layers.size(); ++layer) {
        if (m.layers[layer].activation != Activation::Relu) continue;
        std::vector<double> found;
        for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
            const Vector& pa = evals[s][layer];
            const Vector& pb = evals[s + 1][layer];
            for (Eigen::Index k = 0; k < pa.size(); ++k) {
                if (pa(k) * pb(k) < 0.0) {
                    const double frac = pa(k) / (pa(k) - pb(k));
                    found.push_back(seg[s] + frac * (seg[s + 1] - seg[s]));
                }
            }
        }
        if (found.empty()) continue;
        crossings.insert(crossings.end(), found.begin(), found.end());
        seg.insert(seg.end(), found.begin(), found.end());
        std::sort(seg.begin(), seg.end());
        seg.erase(std::unique(seg.begin(), seg.end()), seg.end());
        evals.clear();
        evals.reserve(seg.size());
        for (double t : seg) evals.push_back(preacts_at(t));
    }

    std::vector<double> nodes;
    nodes.reserve(static_cast<std::size_t>(steps) + 1 + 2 * crossings.size());
    for (int j = 0; j <= steps; ++j) nodes.push_back(static_cast<double>(j) / steps);
    constexpr double straddle = 1e-9;
    for (double t : crossings) {
        if (t - straddle > 0.0) nodes.push_back(t - straddle);
        if (t + straddle < 1.0) nodes.push_back(t + straddle);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return nodes;
}

namespace {

void require_unit(const Vector& v, const char* who) {
    if (std::abs(v.norm() - 1.0) > 1e-10)
        throw DimensionError(std::string(who) + ": direction must be a unit vector");
}

// trapezoid over arbitrary sorted nodes of a scalar function of t
template <typename F>
double trapezoid(const std::vector<double>& nodes, F&& integrand) {
    double acc = 0.0;
    double prev = integrand(nodes[0]);
    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
        const double cur = integrand(nodes[j + 1]);
        acc += 0.5 * (prev + cur) * (nodes[j + 1] - nodes[j]);
        prev = cur;
    }
    return acc;
}

}  // namespace

double path_attribution(const ScalarHead& head, const PathSpec& path, const Vector& v) {
    require_unit(v, "path_attribution");
    if (path.kind == PathSpec::Kind::StraightLine) {
        if (v.size() != path.start.size()) throw DimensionError("path_attribution: dim mismatch");
        const Vector dir = path.end - path.start;
        const double dir_v = dir.dot(v);
        if (dir_v == 0.0 && (path.end - path.start).isZero(0.0)) return 0.0;
        const std::vector<double> nodes =
            quadrature_nodes(head.model, path.start, path.end, path.steps);
        const double grad_avg = trapezoid(nodes, [&](double t) {
            return gradient(head, path.start + t * dir).dot(v);
        });
        return grad_avg * dir_v;
    }
    // sampled path: gradient at each sample, velocity by central differences
    const std::size_t n = path.samples.size();
    const double dt = 1.0 / static_cast<double>(n - 1);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        Vector vel;
        if (j == 0)
            vel = (path.samples[1] - path.samples[0]) / dt;
        else if (j == n - 1)
            vel = (path.samples[n - 1] - path.samples[n - 2]) / dt;
        else
            vel = (path.samples[j + 1] - path.samples[j - 1]) / (2.0 * dt);
        const double integrand = gradient(head, path.samples[j]).dot(v) * vel.dot(v);
        const double weight = (j == 0 || j == n - 1) ? 0.5 : 1.0;
        acc += weight * integrand * dt;
    }
    return acc;
}

AttributionVector integrated_gradients(const ScalarHead& head, const Vector& x,
                                       const Vector& x_base, int steps) {
    if (x.size() != x_base.size() || x.size() != head.model.input_dim())
        throw DimensionError("integrated_gradients: dim mismatch");
    if (steps < 1) throw DimensionError("integrated_gradients: steps must be >= 1");
    const Vector dir = x - x_base;
    AttributionVector out;
    out.method = "ig";
    out.steps = steps;
    if (dir.isZero(0.0)) {
        out.values = Vector::Zero(x.size());
        return out;
    }
    const std::vector<double> nodes = quadrature_nodes(head.model, x_base, x, steps);
    Vector avg = Vector::Zero(x.size());
    Vector prev = gradient(head, x_base + nodes[0] * dir);
    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
        const Vector cur = gradient(head, x_base + nodes[j + 1] * dir);
        avg += (0.5 * (nodes[j + 1] - nodes[j])) * (prev + cur);
        prev = cur;
    }
    out.values = dir.cwiseProduct(avg);
    return out;
}

namespace {

MlpModel recompose(const ModelSplit& split) {
    MlpModel m;
    m.layers = split.h.layers;
    m.layers.insert(m.layers.end(), split.f.layers.begin(), split.f.layers.end());
    return m;
}

}  // namespace

double conductance_ij(const ModelSplit& split, int head_class, const Vector& x,
                      const Vector& x_base, int i, int j, int steps) {
    if (i < 0 || i >= x.size()) throw DimensionError("conductance_ij: input index out of range");
    if (j < 0 || j >= split.h.output_dim())
        throw DimensionError("conductance_ij: hidden index out of range");
    const MlpModel full = recompose(split);
    const Vector dir = x - x_base;
    if (dir.isZero(0.0)) return 0.0;
    const std::vector<double> nodes = quadrature_nodes(full, x_base, x, steps);
    const ScalarHead f_head{split.f, head_class};
    Vector ej = Vector::Zero(split.h.output_dim());
    ej(j) = 1.0;
    const double integral = trapezoid(nodes, [&](double t) {
        const Vector z = x_base + t * dir;
        const Vector hidden = forward(split.h, z);
        const double df_dhj = gradient(f_head, hidden)(j);
        const double dhj_dxi = vjp(split.h, z, ej)(i);
        return df_dhj * dhj_dxi;
    });
    return dir(i) * integral;
}

double conductance_direction(const ModelSplit& split, int head_class, const Vector& x,
                             const Vector& x_base, const Vector& w, int steps) {
    require_unit(w, "conductance_direction");
    if (w.size() != split.h.output_dim())
        throw DimensionError("conductance_direction: direction dim mismatch");
    const MlpModel full = recompose(split);
    const Vector dir = x - x_base;
    if (dir.isZero(0.0)) return 0.0;
    const std::vector<double> nodes = quadrature_nodes(full, x_base, x, steps);
    const ScalarHead f_head{split.f, head_class};
    return trapezoid(nodes, [&](double t) {
        const Vector z = x_base + t * dir;
        const Vector hidden = forward(split.h, z);
        const double grad_f_w = gradient(f_head, hidden).dot(w);
        const double dhw_dt = vjp(split.h, z, w).dot(dir);
        return grad_f_w * dhw_dt;
    });
}

AttributionVector conductance_vector(const ModelSplit& split, int head_class, const Vector& x,
                                     const Vector& x_base, int steps) {
    const Eigen::Index m = split.h.output_dim();
    AttributionVector out;
    out.method = "conductance";
    out.basis_tag = "hidden";
    out.steps = steps;
    out.values = Vector::Zero(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        Vector ej = Vector::Zero(m);
        ej(j) = 1.0;
        out.values(j) = conductance_direction(split, head_class, x, x_base, ej, steps);
    }
    return out;
}

CovarianceSpec CovarianceSpec::isotropic(Eigen::Index n, double variance, int d,
                                         std::uint64_t seed) {
    CovarianceSpec c;
    c.sigma = variance * Matrix::Identity(n, n);
    c.sample_count = d;
    c.seed = seed;
    return c;
}

namespace {

// symmetric square root of a PSD sigma; eigendecomposition so that singular
// covariances are accepted
Matrix covariance_factor(const CovarianceSpec& cov, Eigen::Index n, bool require_invertible) {
    if (cov.sigma.rows() != n || cov.sigma.cols() != n)
        throw DimensionError("covariance dim mismatch");
    if (operator_inf_norm(cov.sigma - cov.sigma.transpose()) >
        1e-12 * std::max(1.0, operator_inf_norm(cov.sigma)))
        throw DimensionError("covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov.sigma);
    const Vector& lam = es.eigenvalues();
    const double lmax = lam.size() ? std::max(lam.maxCoeff(), 0.0) : 0.0;
    if (lam.minCoeff() < -1e-12 * std::max(1.0, lmax))
        throw DimensionError("covariance is not positive semi-definite");
    if (require_invertible && lam.minCoeff() <= 1e-12 * std::max(1.0, lmax))
        throw DimensionError("covariance must be invertible");
    return es.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

}  // namespace

Matrix smoothgrad_draws(const CovarianceSpec& cov, Eigen::Index n) {
    if (cov.sample_count < 1) throw DimensionError("smoothgrad needs at least one sample");
    const Matrix l = covariance_factor(cov, n, false);
    Matrix draws(n, cov.sample_count);
    const Rng base(cov.seed);
    for (int i = 0; i < cov.sample_count; ++i) {
        Rng stream = base.fork(static_cast<std::uint64_t>(i));
        draws.col(i) = l * gaussian_vector(n, stream);
    }
    return draws;
}

AttributionVector smoothgrad_with_draws(const ScalarHead& head, const Vector& x,
                                        const Matrix& draws) {
    if (draws.rows() != x.size()) throw DimensionError("smoothgrad: draw dim mismatch");
    const Eigen::Index d = draws.cols();
    if (d < 1) throw DimensionError("smoothgrad needs at least one sample");
    Matrix grads(x.size(), d);
    for (Eigen::Index i = 0; i < d; ++i) grads.col(i) = gradient(head, x + draws.col(i));
    AttributionVector out;
    out.method = "sg";
    out.sample_count = static_cast<int>(d);
    out.values = grads.rowwise().mean();
    out.stderrs = Vector::Zero(x.size());
    if (d > 1) {
        const Matrix centered = grads.colwise() - out.values;
        out.stderrs = (centered.array().square().rowwise().sum() /
                       (static_cast<double>(d) * (static_cast<double>(d) - 1.0)))
                          .sqrt();
    }
    return out;
}

AttributionVector smoothgrad(const ScalarHead& head, const Vector& x, const CovarianceSpec& cov) {
    AttributionVector out = smoothgrad_with_draws(head, x, smoothgrad_draws(cov, x.size()));
    out.seed = cov.seed;
    return out;
}

AttributionVector clime(const ScalarHead& head, const Vector& x, const CovarianceSpec& cov) {
    const Eigen::Index n = x.size();
    if (cov.sample_count < n + 2)
        throw DimensionError("clime: need at least n + 2 samples");
    const Matrix l = covariance_factor(cov, n, true);
    const Rng base(cov.seed);
    Matrix z(n, cov.sample_count);
    Vector y(cov.sample_count);
    for (int i = 0; i < cov.sample_count; ++i) {
        Rng stream = base.fork(static_cast<std::uint64_t>(i));
        z.col(i) = x + l * gaussian_vector(n, stream);
        y(i) = head_value(head, z.col(i));
    }
    const Vector z_mean = z.rowwise().mean();
    const double y_mean = y.mean();
    const Matrix zc = z.colwise() - z_mean;
    const Matrix scatter = zc * zc.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(scatter);
    if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
        throw DimensionError("clime: rank-deficient design");
    const Vector rhs = zc * (y.array() - y_mean).matrix();
    AttributionVector out;
    out.method = "clime";
    out.sample_count = cov.sample_count;
    out.seed = cov.seed;
    out.values = Eigen::LDLT<Matrix>(scatter).solve(rhs);
    // OLS slope standard errors: sigma_hat^2 * diag(scatter^-1), with the
    // intercept absorbed by centering
    const Vector resid = (y.array() - y_mean).matrix() - zc.transpose() * out.values;
    const double sigma2 = resid.squaredNorm() / static_cast<double>(cov.sample_count - n - 1);
    out.stderrs.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double inv_ii = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double vij = es.eigenvectors()(i, j);
            inv_ii += vij * vij / es.eigenvalues()(j);
        }
        out.stderrs(i) = std::sqrt(sigma2 * inv_ii);
    }
    return out;
}

}  // namespace symattack
