#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "symattack/experiment.hpp"

namespace {

using namespace symattack;

void add_common_flags(CLI::App* cmd, ExperimentConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON experiment config (flags override it)");
    cmd->add_option("--seed", cfg.seed, "global seed");
    cmd->add_option("--epsilon", cfg.epsilon, "inf-norm attack budget");
    cmd->add_option("--method", cfg.method, "attribution method")
        ->check(CLI::IsMember({"ig", "sg", "clime", "conductance"}));
    cmd->add_option("--mode", cfg.mode, "attack mode")
        ->check(CLI::IsMember({"mult", "add", "targeted"}));
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--dataset", cfg.dataset, "mnist | wisconsin | synthetic | CSV path");
    cmd->add_option("--data-dir", cfg.data_dir, "directory holding mnist/ and wdbc.csv");
    cmd->add_option("--hidden", cfg.hidden, "hidden layer width");
    cmd->add_option("--epochs", cfg.hp.epochs, "training epochs");
    cmd->add_option("--lr", cfg.hp.lr, "learning rate");
    cmd->add_option("--batch", cfg.hp.batch, "minibatch size");
    cmd->add_option("--steps", cfg.steps, "quadrature steps");
    cmd->add_option("--sg-samples", cfg.sg_samples, "smoothgrad/clime sample count");
    cmd->add_option("--sg-variance", cfg.sg_variance, "isotropic noise variance");
    cmd->add_option("--topk", cfg.topk, "top-k size for the overlap metric");
    cmd->add_option("--max-points", cfg.max_points, "test points to attack (-1 = all)");
    cmd->add_option("--t-fraction", cfg.t_fraction, "fraction of the step bound to use");
    cmd->add_option("--model-in", cfg.model_in, "load a trained model instead of training");
    cmd->add_option("--model-out", cfg.model_out, "save the trained model here");
}

int cmd_explain(const ExperimentConfig& cfg, int index) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const Dataset ds = load_dataset(cfg);
    MlpModel model;
    if (!cfg.model_in.empty()) {
        model = load_model(cfg.model_in);
    } else {
        model = make_classifier({static_cast<int>(ds.feature_count()), cfg.hidden,
                                 ds.class_count},
                                cfg.seed);
        Hyperparams hp = cfg.hp;
        hp.seed = cfg.seed;
        train(model, ds, hp);
    }
    if (index < 0 || index >= static_cast<int>(ds.test_indices.size()))
        throw ConfigError("--index out of range of the test split");
    const Vector x = ds.point(ds.test_indices[index]);
    Eigen::Index cls;
    forward(model, x).maxCoeff(&cls);
    const ScalarHead head{model, static_cast<int>(cls)};

    AttributionVector attr;
    const Vector baseline = ds.feature_count() == 784
                                ? Vector(Vector::Zero(ds.feature_count()))
                                : Vector(ds.train_matrix().rowwise().mean());
    if (cfg.method == "ig") {
        attr = integrated_gradients(head, x, baseline, cfg.steps);
    } else if (cfg.method == "sg") {
        attr = smoothgrad(head, x,
                          CovarianceSpec::isotropic(x.size(), cfg.sg_variance, cfg.sg_samples,
                                                    cfg.seed));
    } else if (cfg.method == "clime") {
        attr = clime(head, x,
                     CovarianceSpec::isotropic(x.size(), cfg.sg_variance, cfg.sg_samples,
                                               cfg.seed));
    } else {
        attr = conductance_vector(split(model, 1), head.class_index, x, baseline, cfg.steps);
    }

    const fs::path base = fs::path(cfg.out_dir) / ("explain_" + std::to_string(index));
    if (attr.values.size() == 784) {
        emit_heatmap(attr, 28, 28, base.string() + ".pgm");
    } else {
        std::ofstream csv(base.string() + ".csv");
        char buf[64];
        for (Eigen::Index i = 0; i < attr.values.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g\n", attr.values(i));
            csv << buf;
        }
    }
    std::cout << "class " << cls << " " << cfg.method << " attribution written to " << base
              << ".*\n";
    return 0;
}

int cmd_report(const std::string& in_path, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::ifstream in(in_path);
    if (!in) throw ConfigError("cannot open report file: " + in_path);
    fs::create_directories(out_dir);
    int count = 0, cond1 = 0, cond2 = 0, diverged = 0;
    double sum_cos = 0, sum_spear = 0, sum_topk = 0, sum_rel = 0, sum_gap = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad report line: ") + e.what());
        }
        ++count;
        cond1 += j.at("cond1").get<bool>();
        cond2 += j.at("cond2").get<bool>();
        diverged += j.at("rel_attr_diff").get<double>() > 1e-3;
        sum_cos += j.at("divergence").at("cosine").get<double>();
        sum_spear += j.at("divergence").at("spearman").get<double>();
        sum_topk += j.at("divergence").at("topk_overlap").get<double>();
        sum_rel += j.at("rel_attr_diff").get<double>();
        sum_gap += j.at("logit_gap").get<double>();
    }
    if (count == 0) throw ParseError("report file has no entries: " + in_path);
    std::ofstream out((fs::path(out_dir) / "aggregate.csv").string());
    const double inv = 1.0 / count;
    char buf[256];
    out << "points,cond1_pass_rate,cond2_pass_rate,mean_logit_gap,mean_cosine,mean_spearman,"
           "mean_topk_overlap,mean_rel_attr_diff,frac_rel_attr_diff_gt_1e-3\n";
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", count,
                  cond1 * inv, cond2 * inv, sum_gap * inv, sum_cos * inv, sum_spear * inv,
                  sum_topk * inv, sum_rel * inv, diverged * inv);
    out << buf;
    std::cout << "aggregated " << count << " reports\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace symattack;

    // --config is applied first so explicit flags can override its values
    std::string config_probe;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_probe = argv[i + 1];
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a.rfind("--config=", 0) == 0) config_probe = a.substr(9);
    }

    ExperimentConfig cfg;
    try {
        if (!config_probe.empty()) cfg = load_config(config_probe);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    CLI::App app{"symmetry-group attacks on feature-attribution explanations"};
    app.require_subcommand(1);
    std::string config_path;

    CLI::App* train_cmd = app.add_subcommand("train", "train a classifier and save it");
    add_common_flags(train_cmd, cfg, config_path);

    CLI::App* attack_cmd =
        app.add_subcommand("attack", "attack the test split and emit reports");
    add_common_flags(attack_cmd, cfg, config_path);

    int explain_index = 0;
    CLI::App* explain_cmd =
        app.add_subcommand("explain", "attribution for one test point");
    add_common_flags(explain_cmd, cfg, config_path);
    explain_cmd->add_option("--index", explain_index, "test-split point index");

    std::string report_in, report_out = "out";
    CLI::App* report_cmd = app.add_subcommand("report", "aggregate a reports.jsonl file");
    report_cmd->add_option("--in", report_in, "reports.jsonl path")->required();
    report_cmd->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train_cmd)) {
            cfg.max_points = 0;
            if (cfg.model_out.empty())
                cfg.model_out =
                    (std::filesystem::path(cfg.out_dir) / "model.json").string();
            std::filesystem::create_directories(cfg.out_dir);
            const int rc = run_experiment(cfg);
            std::cout << "model written to " << cfg.model_out << "\n";
            return rc;
        }
        if (app.got_subcommand(attack_cmd)) return run_experiment(cfg);
        if (app.got_subcommand(explain_cmd)) return cmd_explain(cfg, explain_index);
        if (app.got_subcommand(report_cmd)) return cmd_report(report_in, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
