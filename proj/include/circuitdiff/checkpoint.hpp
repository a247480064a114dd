#pragma once

// Versioned JSON checkpoints for trained diffusion models.

#include <filesystem>

#include "json.hpp"

#include "circuitdiff/diffusion.hpp"

namespace circuitdiff {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json model_to_json(const diffusion::DiffusionModel& model);
/// Throws MalformedCheckpoint on a missing field, wrong version or shapes that
/// do not fit together.
diffusion::DiffusionModel model_from_json(const nlohmann::json& j);

void save_model(const diffusion::DiffusionModel& model, const std::filesystem::path& path);
diffusion::DiffusionModel load_model(const std::filesystem::path& path);

nlohmann::json to_json(const diffusion::ScheduleConfig& s);
nlohmann::json to_json(const diffusion::DenoiserConfig& c);
diffusion::ScheduleConfig schedule_from_json(const nlohmann::json& j, diffusion::ScheduleConfig base = {});
diffusion::DenoiserConfig denoiser_from_json(const nlohmann::json& j, diffusion::DenoiserConfig base = {});

}  // namespace circuitdiff
