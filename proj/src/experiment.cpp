#include "symattack/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "symattack/rng.hpp"

namespace symattack {

void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& doc) {
    auto get = [&](const char* key, auto& field) {
        if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("dataset", cfg.dataset);
    get("data_dir", cfg.data_dir);
    get("label_column", cfg.label_column);
    get("hidden", cfg.hidden);
    get("synthetic_samples", cfg.synthetic_samples);
    get("lr", cfg.hp.lr);
    get("momentum", cfg.hp.momentum);
    get("batch", cfg.hp.batch);
    get("epochs", cfg.hp.epochs);
    get("epsilon", cfg.epsilon);
    get("mode", cfg.mode);
    get("t_fraction", cfg.t_fraction);
    get("method", cfg.method);
    get("steps", cfg.steps);
    get("sg_variance", cfg.sg_variance);
    get("sg_samples", cfg.sg_samples);
    get("topk", cfg.topk);
    get("max_points", cfg.max_points);
    get("heatmaps", cfg.heatmaps);
    get("out_dir", cfg.out_dir);
    get("model_in", cfg.model_in);
    get("model_out", cfg.model_out);
    get("seed", cfg.seed);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        apply_config_json(cfg, doc);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return cfg;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.dataset == "mnist") {
        const fs::path dir = fs::path(cfg.data_dir) / "mnist";
        const Dataset train_part = load_mnist_idx((dir / "train-images-idx3-ubyte").string(),
                                                  (dir / "train-labels-idx1-ubyte").string());
        const Dataset test_part = load_mnist_idx((dir / "t10k-images-idx3-ubyte").string(),
                                                 (dir / "t10k-labels-idx1-ubyte").string());
        return merge_train_test(train_part, test_part);
    }
    if (cfg.dataset == "wisconsin") {
        const fs::path csv = fs::path(cfg.data_dir) / "wdbc.csv";
        Dataset ds = load_csv(csv.string(), cfg.label_column, 0.2, cfg.seed);
        ds.name = "wisconsin";
        return ds;
    }
    if (cfg.dataset == "synthetic") return make_synthetic_tabular(cfg.synthetic_samples, cfg.seed);
    return load_csv(cfg.dataset, cfg.label_column, 0.2, cfg.seed);
}

static nlohmann::json vector_to_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json report_to_json(const AttackReport& r) {
    nlohmann::json j;
    j["mode"] = r.mode;
    j["method"] = r.method;
    j["epsilon"] = r.epsilon;
    j["inf_error"] = r.inf_error;
    j["logit_gap"] = r.logit_gap;
    j["argmax_preserved"] = r.argmax_preserved;
    j["cond1"] = r.cond1;
    j["cond2"] = r.cond2;
    j["t"] = r.t;
    j["delta"] = r.delta;
    j["divergence"] = {{"cosine", r.divergence.cosine},
                       {"spearman", r.divergence.spearman},
                       {"topk_overlap", r.divergence.topk_overlap}};
    j["rel_attr_diff"] = r.rel_attr_diff;
    j["x"] = vector_to_json(r.x);
    j["x_adv"] = vector_to_json(r.x_adv);
    j["clean_attr"] = vector_to_json(r.clean_attr.values);
    j["adv_attr"] = vector_to_json(r.adv_attr.values);
    return j;
}

void emit_heatmap(const AttributionVector& attr, int width, int height, const std::string& path) {
    if (static_cast<Eigen::Index>(width) * height != attr.values.size())
        throw DimensionError("emit_heatmap: width*height does not match attribution length");
    const double lo = attr.values.minCoeff();
    const double hi = attr.values.maxCoeff();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open heatmap file for writing: " + path);
    out << "P5\n" << width << " " << height << "\n255\n";
    for (Eigen::Index i = 0; i < attr.values.size(); ++i) {
        const unsigned char g =
            hi > lo ? static_cast<unsigned char>(255.0 * (attr.values(i) - lo) / (hi - lo) + 0.5)
                    : static_cast<unsigned char>(128);
        out.put(static_cast<char>(g));
    }
    std::ofstream csv(path + ".csv");
    if (!csv) throw ParseError("cannot open heatmap sidecar for writing: " + path + ".csv");
    char buf[64];
    for (Eigen::Index i = 0; i < attr.values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", attr.values(i));
        csv << buf;
    }
}

const char* const summary_columns =
    "dataset,n_features,classes,hidden,seed,epsilon,mode,method,points,"
    "train_accuracy,test_accuracy,train_macro_f1,test_macro_f1,"
    "cond1_pass_rate,cond2_pass_rate,argmax_preserved_rate,"
    "mean_cosine,mean_spearman,mean_topk_overlap,mean_rel_attr_diff,frac_rel_attr_diff_gt_1e-3";

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// x_adv for one point under the configured mode; per-point forked rng keeps
// batches order-independent
std::pair<GroupElement, Vector> attack_point(const MlpModel& m, const KernelBasis& kb,
                                             const Dataset& ds, int point_pos, const Vector& x,
                                             AttackMode mode, const AttackConfig& acfg, Rng rng) {
    switch (mode) {
        case AttackMode::Multiplicative:
            return multiplicative_attack(m, kb, x, acfg);
        case AttackMode::Additive: {
            Vector y = kb.vectors * gaussian_vector(kb.count(), rng);
            const double n = y.lpNorm<Eigen::Infinity>();
            if (n == 0.0) throw DegenerateGeneratorError("additive direction vanished");
            y /= n;
            return additive_attack(m, x, y, acfg);
        }
        case AttackMode::Targeted: {
            const int tests = static_cast<int>(ds.test_indices.size());
            const int label = ds.labels[static_cast<std::size_t>(ds.test_indices[point_pos])];
            for (int off = 1; off < tests; ++off) {
                const int cand = ds.test_indices[(point_pos + off) % tests];
                if (ds.labels[static_cast<std::size_t>(cand)] != label) {
                    Vector target = ds.point(cand);
                    if ((target.array() > 0.0).any())
                        return targeted_kernel_combination(x, target, kb, m, acfg);
                }
            }
            throw DegenerateGeneratorError("no usable target point found");
        }
    }
    throw ConfigError("unknown attack mode");
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    const Dataset ds = load_dataset(cfg);
    const int n = static_cast<int>(ds.feature_count());

    MlpModel model;
    TrainMetrics metrics;
    if (!cfg.model_in.empty()) {
        model = load_model(cfg.model_in);
        metrics.train_accuracy = accuracy(model, ds.train_matrix(), ds.train_labels());
        metrics.train_macro_f1 = macro_f1(model, ds.train_matrix(), ds.train_labels());
        metrics.test_accuracy = accuracy(model, ds.test_matrix(), ds.test_labels());
        metrics.test_macro_f1 = macro_f1(model, ds.test_matrix(), ds.test_labels());
    } else {
        model = make_classifier({n, cfg.hidden, ds.class_count}, cfg.seed);
        Hyperparams hp = cfg.hp;
        hp.seed = cfg.seed;
        metrics = train(model, ds, hp);
    }
    if (!cfg.model_out.empty()) save_model(model, cfg.model_out);

    const KernelBasis kb = kernel_basis(model.first_layer_matrix());
    const AttackMode mode = attack_mode_from_name(cfg.mode);
    AttackConfig acfg;
    acfg.epsilon = cfg.epsilon;
    acfg.mode = mode;
    acfg.t_fraction = cfg.t_fraction;
    acfg.seed = cfg.seed;

    AttributionParams params;
    params.method = cfg.method;
    params.steps = cfg.steps;
    params.topk = cfg.topk;
    params.cov = CovarianceSpec::isotropic(n, cfg.sg_variance, cfg.sg_samples, cfg.seed);
    const bool image = ds.feature_count() == 784;
    if (image) {
        params.baseline = Vector::Zero(n);
        if (cfg.topk == 5) params.topk = 50;  // default widened for pixel data
    } else {
        // tabular baseline: train-split mean in normalized coordinates
        params.baseline = ds.train_matrix().rowwise().mean();
    }

    const int total = static_cast<int>(ds.test_indices.size());
    const int points = cfg.max_points < 0 ? total : std::min(cfg.max_points, total);

    std::ofstream reports((fs::path(cfg.out_dir) / "reports.jsonl").string());
    if (!reports) throw ParseError("cannot open reports.jsonl for writing");

    Rng rng(cfg.seed);
    int cond1 = 0, cond2 = 0, argmax_ok = 0, diverged = 0, attacked = 0;
    double sum_cos = 0, sum_spear = 0, sum_topk = 0, sum_rel = 0;
    for (int p = 0; p < points; ++p) {
        const Vector x = ds.point(ds.test_indices[p]);
        const Vector logits = forward(model, x);
        Eigen::Index cls;
        logits.maxCoeff(&cls);
        const ScalarHead head{model, static_cast<int>(cls)};

        auto [g, x_adv] = attack_point(model, kb, ds, p, x, mode, acfg, rng.fork(p));
        AttackReport r = validate_attack(model, head, x, x_adv, cfg.epsilon, params);
        r.group_element = g;
        r.mode = cfg.mode;
        r.delta = mode == AttackMode::Multiplicative ? 0.0
                                                     : (g.translation.lpNorm<Eigen::Infinity>());
        reports << report_to_json(r).dump() << "\n";

        ++attacked;
        cond1 += r.cond1;
        cond2 += r.cond2;
        argmax_ok += r.argmax_preserved;
        diverged += r.rel_attr_diff > 1e-3;
        sum_cos += r.divergence.cosine;
        sum_spear += r.divergence.spearman;
        sum_topk += r.divergence.topk_overlap;
        sum_rel += r.rel_attr_diff;

        if (image && p < cfg.heatmaps) {
            const fs::path base = fs::path(cfg.out_dir) / ("point" + std::to_string(p));
            emit_heatmap(r.clean_attr, 28, 28, base.string() + "_clean_attr.pgm");
            emit_heatmap(r.adv_attr, 28, 28, base.string() + "_adv_attr.pgm");
            AttributionVector img_clean{x, "input"}, img_adv{x_adv, "input"};
            emit_heatmap(img_clean, 28, 28, base.string() + "_clean.pgm");
            emit_heatmap(img_adv, 28, 28, base.string() + "_adv.pgm");
        }
    }

    std::ofstream summary((fs::path(cfg.out_dir) / "summary.csv").string());
    if (!summary) throw ParseError("cannot open summary.csv for writing");
    const double inv = attacked > 0 ? 1.0 / attacked : 0.0;
    summary << summary_columns << "\n"
            << ds.name << "," << n << "," << ds.class_count << "," << cfg.hidden << "," << cfg.seed
            << "," << fmt(cfg.epsilon) << "," << cfg.mode << "," << cfg.method << "," << attacked
            << "," << fmt(metrics.train_accuracy) << "," << fmt(metrics.test_accuracy) << ","
            << fmt(metrics.train_macro_f1) << "," << fmt(metrics.test_macro_f1) << ","
            << fmt(cond1 * inv) << "," << fmt(cond2 * inv) << "," << fmt(argmax_ok * inv) << ","
            << fmt(sum_cos * inv) << "," << fmt(sum_spear * inv) << "," << fmt(sum_topk * inv)
            << "," << fmt(sum_rel * inv) << "," << fmt(diverged * inv) << "\n";
    return 0;
}

}  // namespace symattack
