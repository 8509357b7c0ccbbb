#pragma once

#include <string>

#include <json.hpp>

#include "symattack/attack.hpp"
#include "symattack/data.hpp"

namespace symattack {

struct ExperimentConfig {
    std::string dataset = "synthetic";  // mnist | wisconsin | synthetic | a CSV path
    std::string data_dir = "data";
    std::string label_column = "label";
    int hidden = 16;
    int synthetic_samples = 4000;
    Hyperparams hp;

    double epsilon = 1.0;
    std::string mode = "mult";
    double t_fraction = 1.0;
    std::string method = "ig";
    int steps = 256;
    double sg_variance = 0.01;
    int sg_samples = 200;
    int topk = 5;

    int max_points = -1;  // test points to attack; -1 means all
    int heatmaps = 4;     // clean/adversarial PGM pairs for image data
    std::string out_dir = "out";
    std::string model_in;
    std::string model_out;
    std::uint64_t seed = 7;
};

ExperimentConfig load_config(const std::string& path);
void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& doc);

Dataset load_dataset(const ExperimentConfig& cfg);

nlohmann::json report_to_json(const AttackReport& r);

// trains or loads the model, attacks the test split, writes reports.jsonl,
// summary.csv and (for image data) PGM heatmaps into out_dir
int run_experiment(const ExperimentConfig& cfg);

// binary PGM (P5), min-max scaled to 0..255, plus a CSV sidecar of raw values
void emit_heatmap(const AttributionVector& attr, int width, int height, const std::string& path);

// fixed summary.csv column set, documented in the README
extern const char* const summary_columns;

}  // namespace symattack
