#pragma once

#include <optional>
#include <string>
#include <utility>

#include "symattack/attribution.hpp"
#include "symattack/symmetry.hpp"

namespace symattack {

enum class AttackMode { Multiplicative, Additive, Targeted };

std::string attack_mode_name(AttackMode m);
AttackMode attack_mode_from_name(const std::string& name);

struct AttackConfig {
    double epsilon = 1.0;             // inf-norm budget for ||x_adv - x||
    AttackMode mode = AttackMode::Multiplicative;
    double t_fraction = 1.0;          // fraction of max_step actually taken
    std::uint64_t seed = 0;
    std::optional<double> delta;      // additive scale override, clamped to the budget
};

// Algorithm: accumulate B = sum_y (x_k y^T - y x_k^T) over the kernel basis,
// take t within the step bound, return (exp(tB), exp(tB) x).
std::pair<GroupElement, Vector> multiplicative_attack(const MlpModel& m, const KernelBasis& k,
                                                      const Vector& x, const AttackConfig& cfg);
std::pair<GroupElement, Vector> multiplicative_attack(const MlpModel& m, const Vector& x,
                                                      const AttackConfig& cfg);

// x_adv = x + delta y for y in ker(W1), delta = eps / ||y||_inf unless overridden
std::pair<GroupElement, Vector> additive_attack(const MlpModel& m, const Vector& x,
                                                const Vector& y, const AttackConfig& cfg);

// kernel combination weighted by the positive entries of y_target, basis
// vectors reused cyclically when the index set is larger than the basis
std::pair<GroupElement, Vector> targeted_kernel_combination(const Vector& x,
                                                            const Vector& y_target,
                                                            const KernelBasis& k,
                                                            const MlpModel& m,
                                                            const AttackConfig& cfg);

struct Divergence {
    double cosine = 1.0;
    double spearman = 1.0;
    double topk_overlap = 1.0;
};

double cosine_similarity(const Vector& a, const Vector& b);
double spearman_rank_correlation(const Vector& a, const Vector& b);
double topk_overlap(const Vector& a, const Vector& b, int k);
Divergence divergence_metrics(const Vector& a, const Vector& b, int k);

struct AttributionParams {
    std::string method = "ig";  // ig | sg | clime | conductance
    Vector baseline;            // ig/conductance baseline x'
    int steps = 256;
    CovarianceSpec cov;         // sg/clime noise spec
    int topk = 5;
    int split_index = 1;        // conductance split layer
};

struct AttackReport {
    Vector x;
    Vector x_adv;
    GroupElement group_element;
    double epsilon = 0;
    double inf_error = 0;
    double logit_gap = 0;       // relative gap max|l - l_adv| / max(1, ||l||_inf)
    bool argmax_preserved = false;
    bool cond1 = false;         // inf_error <= epsilon
    bool cond2 = false;         // logit_gap <= 1e-6 and argmax preserved
    AttributionVector clean_attr;
    AttributionVector adv_attr;
    Divergence divergence;
    double rel_attr_diff = 0;   // ||clean - adv||_inf / max(||clean||_inf, ||adv||_inf)
    std::string mode;
    std::string method;
    double t = 0;
    double delta = 0;
};

// evaluates all three attack conditions and packages the evidence; failed
// conditions are recorded, never silently passed
AttackReport validate_attack(const MlpModel& m, const ScalarHead& head, const Vector& x,
                             const Vector& x_adv, double eps, const AttributionParams& params);

}  // namespace symattack
