#pragma once

// Single JSON run configuration shared by every CLI command.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "circuitdiff/diffusion.hpp"
#include "circuitdiff/gbr.hpp"
#include "circuitdiff/simulator.hpp"

namespace circuitdiff {

/// Every random stream in a run is derived from one of these.
struct Seeds {
    std::uint64_t data = 7;       // real dataset
    std::uint64_t train = 11;     // denoiser init, batching, training noise
    std::uint64_t sample = 1;     // reverse-chain noise
    std::uint64_t reference = 2;  // fresh real rows for distribution checks
    std::uint64_t split = 3;      // real train/test split for the benchmark
    std::uint64_t gbr = 5;        // boosting subsample stream
};

struct RunConfig {
    Circuit circuit = Circuit::Not;
    Seeds seeds;
    std::size_t n_real = 500;
    std::size_t n_synthetic = 500;
    double test_fraction = 0.2;
    std::size_t histogram_bins = 30;
    diffusion::ScheduleConfig schedule;
    diffusion::DenoiserConfig denoiser;  // denoiser.seed is replaced by seeds.train
    diffusion::Sampler sampler = diffusion::Sampler::Paper;
    gbr::GbrConfig gbr;
    ProcessNominals nominals;
    std::filesystem::path out_dir = "out";

    /// Denoiser settings with the training seed applied.
    diffusion::DenoiserConfig resolved_denoiser() const;

    /// Checks every downstream precondition; throws InvalidConfig.
    void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const gbr::GbrConfig& c);
nlohmann::json to_json(const ProcessNominals& n);

}  // namespace circuitdiff
