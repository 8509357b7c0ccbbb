#include "symattack/attack.hpp"

#include <algorithm>
#include <numeric>

namespace symattack {

std::string attack_mode_name(AttackMode m) {
    switch (m) {
        case AttackMode::Multiplicative: return "mult";
        case AttackMode::Additive: return "add";
        case AttackMode::Targeted: return "targeted";
    }
    throw ConfigError("unknown attack mode");
}

AttackMode attack_mode_from_name(const std::string& name) {
    if (name == "mult" || name == "multiplicative") return AttackMode::Multiplicative;
    if (name == "add" || name == "additive") return AttackMode::Additive;
    if (name == "targeted") return AttackMode::Targeted;
    throw ConfigError("unknown attack mode: " + name);
}

std::pair<GroupElement, Vector> multiplicative_attack(const MlpModel& m, const KernelBasis& k,
                                                      const Vector& x, const AttackConfig& cfg) {
    if (x.size() != m.input_dim()) throw DimensionError("multiplicative_attack: dim mismatch");
    if (k.empty())
        throw TrivialSymmetryError(
            "first layer has full column rank: the symmetry group is trivial");
    const Vector xk = project_onto_kernel(x, k);
    if (xk.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, x.lpNorm<Eigen::Infinity>()))
        throw DegenerateGeneratorError("kernel projection of x is numerically zero");

    Matrix b = Matrix::Zero(x.size(), x.size());
    for (Eigen::Index i = 0; i < k.count(); ++i) {
        const Vector y = k.vectors.col(i);
        b += xk * y.transpose() - y * xk.transpose();
    }
    LieGenerator gen;
    gen.a = std::move(b);
    gen.skew = true;
    gen.source_x = x;
    if (operator_inf_norm(gen.a) == 0.0)
        throw DegenerateGeneratorError("accumulated generator is zero");

    const double t = cfg.t_fraction * max_step(gen, x, cfg.epsilon);
    GroupElement g = exp_element(gen, t);
    Vector x_adv = act(g, x);
    return {std::move(g), std::move(x_adv)};
}

std::pair<GroupElement, Vector> multiplicative_attack(const MlpModel& m, const Vector& x,
                                                      const AttackConfig& cfg) {
    return multiplicative_attack(m, kernel_basis(m.first_layer_matrix()), x, cfg);
}

std::pair<GroupElement, Vector> additive_attack(const MlpModel& m, const Vector& x,
                                                const Vector& y, const AttackConfig& cfg) {
    if (x.size() != m.input_dim() || y.size() != x.size())
        throw DimensionError("additive_attack: dim mismatch");
    const Matrix& w = m.first_layer_matrix();
    const double ynorm = y.lpNorm<Eigen::Infinity>();
    if (ynorm == 0.0) throw DegenerateGeneratorError("additive_attack: zero direction");
    if ((w * y).lpNorm<Eigen::Infinity>() > 1e-9 * operator_inf_norm(w) * std::max(1.0, ynorm))
        throw DegenerateGeneratorError("additive_attack: direction is not in ker(W1)");
    double delta = cfg.delta.value_or(cfg.epsilon / ynorm);
    if (std::abs(delta) * ynorm > cfg.epsilon) {
        delta = (delta < 0 ? -1.0 : 1.0) * cfg.epsilon / ynorm;
    }
    GroupElement g = translation_element(y, delta);
    Vector x_adv = x + delta * y;
    return {std::move(g), std::move(x_adv)};
}

std::pair<GroupElement, Vector> targeted_kernel_combination(const Vector& x,
                                                            const Vector& y_target,
                                                            const KernelBasis& k,
                                                            const MlpModel& m,
                                                            const AttackConfig& cfg) {
    if (y_target.size() != x.size())
        throw DimensionError("targeted_kernel_combination: dim mismatch");
    if (k.empty())
        throw TrivialSymmetryError(
            "first layer has full column rank: the symmetry group is trivial");
    Vector d = Vector::Zero(x.size());
    Eigen::Index used = 0;
    for (Eigen::Index i = 0; i < y_target.size(); ++i) {
        if (y_target(i) > 0.0) {
            d += y_target(i) * k.vectors.col(used % k.count());
            ++used;
        }
    }
    if (used == 0)
        throw DegenerateGeneratorError("targeted_kernel_combination: no positive target entries");
    if (d.lpNorm<Eigen::Infinity>() == 0.0)
        throw DegenerateGeneratorError("targeted_kernel_combination: combination vanished");
    return additive_attack(m, x, d, cfg);
}

double cosine_similarity(const Vector& a, const Vector& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 && nb == 0.0) return 1.0;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

namespace {

// ranks with ties averaged
Vector ranks_of(const Vector& v) {
    const Eigen::Index n = v.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index i, Eigen::Index j) { return v(i) < v(j); });
    Vector r(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && v(idx[static_cast<std::size_t>(j + 1)]) ==
                                v(idx[static_cast<std::size_t>(i)]))
            ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index t = i; t <= j; ++t) r(idx[static_cast<std::size_t>(t)]) = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman_rank_correlation(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw DimensionError("spearman: dim mismatch");
    if (a.size() < 2) return 1.0;
    const Vector ra = ranks_of(a), rb = ranks_of(b);
    const Vector ca = ra.array() - ra.mean();
    const Vector cb = rb.array() - rb.mean();
    const double va = ca.squaredNorm(), vb = cb.squaredNorm();
    if (va == 0.0 && vb == 0.0) return 1.0;  // both constant: identical rankings
    if (va == 0.0 || vb == 0.0) return 0.0;
    return ca.dot(cb) / std::sqrt(va * vb);
}

double topk_overlap(const Vector& a, const Vector& b, int k) {
    if (a.size() != b.size()) throw DimensionError("topk_overlap: dim mismatch");
    const int kk = std::min<int>(k, static_cast<int>(a.size()));
    if (kk <= 0) return 1.0;
    auto top_indices = [kk](const Vector& v) {
        std::vector<int> idx(static_cast<std::size_t>(v.size()));
        std::iota(idx.begin(), idx.end(), 0);
        std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), [&](int i, int j) {
            const double ai = std::abs(v(i)), aj = std::abs(v(j));
            return ai != aj ? ai > aj : i < j;
        });
        idx.resize(static_cast<std::size_t>(kk));
        std::sort(idx.begin(), idx.end());
        return idx;
    };
    const std::vector<int> ta = top_indices(a), tb = top_indices(b);
    std::vector<int> common;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
    return static_cast<double>(common.size()) / kk;
}

Divergence divergence_metrics(const Vector& a, const Vector& b, int k) {
    return {cosine_similarity(a, b), spearman_rank_correlation(a, b), topk_overlap(a, b, k)};
}

namespace {

AttributionVector compute_attribution(const MlpModel& m, const ScalarHead& head, const Vector& x,
                                      const AttributionParams& p) {
    if (p.method == "ig") return integrated_gradients(head, x, p.baseline, p.steps);
    if (p.method == "sg") return smoothgrad(head, x, p.cov);
    if (p.method == "clime") return clime(head, x, p.cov);
    if (p.method == "conductance")
        return conductance_vector(split(m, p.split_index), head.class_index, x, p.baseline,
                                  p.steps);
    throw ConfigError("unknown attribution method: " + p.method);
}

}  // namespace

AttackReport validate_attack(const MlpModel& m, const ScalarHead& head, const Vector& x,
                             const Vector& x_adv, double eps, const AttributionParams& params) {
    if (x.size() != x_adv.size() || x.size() != m.input_dim())
        throw DimensionError("validate_attack: dim mismatch");
    AttackReport r;
    r.x = x;
    r.x_adv = x_adv;
    r.group_element = GroupElement::identity(x.size());
    r.epsilon = eps;
    r.method = params.method;
    r.inf_error = (x_adv - x).lpNorm<Eigen::Infinity>();
    r.cond1 = r.inf_error <= eps + 1e-12;

    const Vector logits = forward(m, x);
    const Vector logits_adv = forward(m, x_adv);
    r.logit_gap = (logits_adv - logits).lpNorm<Eigen::Infinity>() /
                  std::max(1.0, logits.lpNorm<Eigen::Infinity>());
    Eigen::Index am_clean, am_adv;
    logits.maxCoeff(&am_clean);
    logits_adv.maxCoeff(&am_adv);
    r.argmax_preserved = am_clean == am_adv;
    r.cond2 = r.logit_gap <= 1e-6 && r.argmax_preserved;

    r.clean_attr = compute_attribution(m, head, x, params);
    r.adv_attr = compute_attribution(m, head, x_adv, params);
    r.divergence = divergence_metrics(r.clean_attr.values, r.adv_attr.values, params.topk);
    const double scale = std::max(r.clean_attr.values.lpNorm<Eigen::Infinity>(),
                                  r.adv_attr.values.lpNorm<Eigen::Infinity>());
    r.rel_attr_diff =
        scale > 0.0 ? (r.clean_attr.values - r.adv_attr.values).lpNorm<Eigen::Infinity>() / scale
                    : 0.0;
    return r;
}

}  // namespace symattack
