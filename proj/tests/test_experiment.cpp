#include <doctest.h>

#include <symattack/experiment.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace symattack;
namespace fs = std::filesystem;

TEST_CASE("config json overrides only the keys it provides") {
    ExperimentConfig cfg;
    nlohmann::json doc = {{"epsilon", 0.25}, {"mode", "targeted"}, {"hidden", 32}, {"epochs", 3}};
    apply_config_json(cfg, doc);
    CHECK(cfg.epsilon == 0.25);
    CHECK(cfg.mode == "targeted");
    CHECK(cfg.hidden == 32);
    CHECK(cfg.hp.epochs == 3);
    // untouched keys keep their defaults
    CHECK(cfg.dataset == "synthetic");
    CHECK(cfg.steps == 256);
    CHECK(cfg.method == "ig");
    CHECK(cfg.max_points == -1);
}

TEST_CASE("load_config surfaces bad files as config errors") {
    CHECK_THROWS_AS(load_config("no_such_config.json"), ConfigError);
    const std::string path = "experiment_test_cfg.json";
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    CHECK_THROWS_AS(load_config(path), ConfigError);
    {
        std::ofstream out(path);
        out << "{\"epochs\": \"ten\"}";
    }
    CHECK_THROWS_AS(load_config(path), ConfigError);
    {
        std::ofstream out(path);
        out << "{\"epsilon\": 0.5, \"method\": \"sg\"}";
    }
    ExperimentConfig cfg = load_config(path);
    CHECK(cfg.epsilon == 0.5);
    CHECK(cfg.method == "sg");
    std::remove(path.c_str());
}

TEST_CASE("attack reports serialize every reported field") {
    AttackReport r;
    r.x = Vector::Ones(2);
    r.x_adv = 2.0 * Vector::Ones(2);
    r.group_element = GroupElement::identity(2);
    r.epsilon = 0.5;
    r.inf_error = 0.25;
    r.logit_gap = 1e-9;
    r.argmax_preserved = true;
    r.cond1 = true;
    r.cond2 = true;
    r.clean_attr.values = Vector::Zero(2);
    r.adv_attr.values = Vector::Ones(2);
    r.divergence = {0.5, -0.25, 0.75};
    r.rel_attr_diff = 0.125;
    r.mode = "add";
    r.method = "ig";
    r.t = 0.0;
    r.delta = 0.1;

    nlohmann::json j = report_to_json(r);
    CHECK(j.at("mode") == "add");
    CHECK(j.at("method") == "ig");
    CHECK(j.at("epsilon") == 0.5);
    CHECK(j.at("inf_error") == 0.25);
    CHECK(j.at("logit_gap") == 1e-9);
    CHECK(j.at("argmax_preserved") == true);
    CHECK(j.at("cond1") == true);
    CHECK(j.at("cond2") == true);
    CHECK(j.at("delta") == 0.1);
    CHECK(j.at("divergence").at("cosine") == 0.5);
    CHECK(j.at("divergence").at("spearman") == -0.25);
    CHECK(j.at("divergence").at("topk_overlap") == 0.75);
    CHECK(j.at("rel_attr_diff") == 0.125);
    CHECK(j.at("x").size() == 2);
    CHECK(j.at("x_adv")[0] == 2.0);
    CHECK(j.at("clean_attr").size() == 2);
    CHECK(j.at("adv_attr")[1] == 1.0);
}

TEST_CASE("heatmaps are min-max scaled P5 images with a raw sidecar") {
    AttributionVector attr;
    attr.values.resize(4);
    attr.values << 0.0, 0.5, 1.0, 0.25;
    const std::string path = "experiment_test_heatmap.pgm";
    emit_heatmap(attr, 2, 2, path);

    std::ifstream in(path, std::ios::binary);
    std::string magic, dims1, dims2, maxval;
    in >> magic >> dims1 >> dims2 >> maxval;
    CHECK(magic == "P5");
    CHECK(dims1 == "2");
    CHECK(dims2 == "2");
    CHECK(maxval == "255");
    in.get();  // single whitespace after the header
    unsigned char px[4];
    in.read(reinterpret_cast<char*>(px), 4);
    CHECK(px[0] == 0);
    CHECK(px[1] == 128);
    CHECK(px[2] == 255);
    CHECK(px[3] == 64);

    std::ifstream side(path + ".csv");
    double v;
    side >> v;
    CHECK(v == 0.0);
    side >> v;
    CHECK(v == 0.5);

    AttributionVector flat;
    flat.values = Vector::Constant(4, 3.0);
    emit_heatmap(flat, 2, 2, path);
    std::ifstream in2(path, std::ios::binary);
    in2 >> magic >> dims1 >> dims2 >> maxval;
    in2.get();
    in2.read(reinterpret_cast<char*>(px), 4);
    CHECK(px[0] == 128);  // constant map renders mid-gray

    CHECK_THROWS_AS(emit_heatmap(attr, 3, 2, path), DimensionError);
    std::remove(path.c_str());
    std::remove((path + ".csv").c_str());
}

TEST_CASE("summary column contract is stable") {
    CHECK(std::string(summary_columns) ==
          "dataset,n_features,classes,hidden,seed,epsilon,mode,method,points,"
          "train_accuracy,test_accuracy,train_macro_f1,test_macro_f1,"
          "cond1_pass_rate,cond2_pass_rate,argmax_preserved_rate,"
          "mean_cosine,mean_spearman,mean_topk_overlap,mean_rel_attr_diff,"
          "frac_rel_attr_diff_gt_1e-3");
}

TEST_CASE("load_dataset falls back to a csv path") {
    const std::string path = "experiment_test_ds.csv";
    {
        std::ofstream out(path);
        out << "a,b,label\n";
        for (int i = 0; i < 10; ++i)
            out << i << "," << 2 * i << "," << i % 2 << "\n";
    }
    ExperimentConfig cfg;
    cfg.dataset = path;
    Dataset ds = load_dataset(cfg);
    CHECK(ds.sample_count() == 10);
    CHECK(ds.feature_count() == 2);
    CHECK(ds.class_count == 2);
    std::remove(path.c_str());
}

TEST_CASE("run_experiment writes reports, summary and nothing else fails") {
    for (const std::string mode : {"add", "mult", "targeted"}) {
        ExperimentConfig cfg;
        cfg.dataset = "synthetic";
        cfg.synthetic_samples = 240;
        cfg.hidden = 8;
        cfg.hp.epochs = 3;
        cfg.max_points = 6;
        cfg.mode = mode;
        cfg.method = "ig";
        cfg.steps = 64;
        cfg.out_dir = "experiment_test_out_" + mode;
        cfg.seed = 5;
        REQUIRE(run_experiment(cfg) == 0);

        std::ifstream reports(fs::path(cfg.out_dir) / "reports.jsonl");
        REQUIRE(reports.good());
        std::string line;
        int count = 0;
        while (std::getline(reports, line)) {
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            CHECK(j.at("mode") == mode);
            CHECK(j.at("cond1") == true);
            CHECK(j.at("cond2") == true);
            CHECK(j.at("epsilon") == 1.0);
            CHECK(j.at("x").size() == 20);
            ++count;
        }
        CHECK(count == 6);

        std::ifstream summary(fs::path(cfg.out_dir) / "summary.csv");
        REQUIRE(summary.good());
        std::string header, row;
        std::getline(summary, header);
        std::getline(summary, row);
        CHECK(header == summary_columns);
        int commas = 0;
        for (char c : row) commas += c == ',';
        CHECK(commas == 20);  // 21 fields
        std::stringstream ss(row);
        std::string cell;
        std::getline(ss, cell, ',');
        CHECK(cell == "synthetic");

        fs::remove_all(cfg.out_dir);
    }
}
