#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "purikit/net.hpp"
#include "purikit/pipeline.hpp"

namespace purikit {

struct DatasetConfig {
    std::string source = "synthetic";  // "synthetic" | "cifar10"
    int classes = 4;
    int per_class_train = 120;
    int per_class_eval = 40;
    int side = 16;
    double noise_sigma = 0.06;
    std::string cifar_train_path;
    std::string cifar_eval_path;
    int cifar_train_limit = 0;  // 0 = all records
    int cifar_eval_limit = 0;
};

// One validated object drives every stage command. A single global seed
// derives each stage seed by a fixed offset (see stage_seed below), so
// partial re-runs agree with full runs.
struct RunConfig {
    std::uint64_t seed = 7;
    int threads = 1;
    DatasetConfig dataset;
    TrainConfig net;
    RobustTrainConfig robust;
    SrdConfig srd;
    PurifyConfig purify;
    std::vector<AttackConfig> attacks;
};

// Fixed stage offsets added to the global seed.
enum class Stage : std::uint64_t {
    DatasetTrain = 1,
    DatasetEval = 2,
    Baseline = 3,
    Srd = 4,
    Robust = 5,
    Attack = 6,  // grid entry i uses seed + 6 + i
};

std::uint64_t stage_seed(std::uint64_t seed, Stage stage, std::uint64_t extra = 0);

nlohmann::json default_config_json();

// Total validation: every key must be known, typed, and within bounds
// before any compute starts. Unknown keys are rejected by name.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies a dotted override like "net.epochs=20" onto the raw JSON; the
// value parses as JSON when possible and falls back to a string.
void apply_override(nlohmann::json& j, const std::string& dotted_assignment);

nlohmann::json attack_to_json(const AttackConfig& cfg);
AttackConfig attack_from_json(const nlohmann::json& j, const std::string& path);

}  // namespace purikit
