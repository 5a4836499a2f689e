#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "mrgt/datamodel.hpp"
#include "mrgt/model.hpp"
#include "mrgt/trainer.hpp"

namespace mrgt {

/// Everything a training run needs besides the data.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    SplitRatios ratios;
    std::uint64_t split_seed = 5;
};

nlohmann::ordered_json to_json(const ModelConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);
nlohmann::ordered_json to_json(const RunConfig& c);

/// Missing keys keep the values already in `into`; unknown keys are errors.
void apply_json(const nlohmann::json& j, ModelConfig& into);
void apply_json(const nlohmann::json& j, TrainConfig& into);
void apply_json(const nlohmann::json& j, RunConfig& into);

RunConfig load_run_config(const std::filesystem::path& path, RunConfig defaults = {});

} // namespace mrgt
