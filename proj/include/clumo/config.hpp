#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clumo/continual.hpp"
#include "clumo/datagen.hpp"
#include "json.hpp"

namespace clumo {

// The whole experiment surface: training hyperparameters, the synthetic
// stream, model width, task order, seeds and output directory. Parsing is
// strict -- unknown fields are rejected by name -- and to_json(from_json(x))
// reproduces an equivalent document.
struct ExperimentConfig {
    TrainConfig train;
    StreamConfig stream;
    std::size_t feature_dim = 32;
    std::string task_order;                  // "" means the natural order
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string out_dir = "out";
    std::string data_file;                   // optional: import a saved stream

    void validate() const;  // throws ConfigError
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// "train.lr=0.25"-style dotted-path assignment applied to the raw document.
// The value is parsed as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace clumo
