#pragma once

// Scores generated rows by replaying their input features through the delay
// oracle, and compares marginal distributions against real data.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "circuitdiff/diffusion.hpp"
#include "circuitdiff/simulator.hpp"

namespace circuitdiff::eval {

/// 100 * mean(|generated - reference| / |reference|).
double mape(std::span<const double> reference, std::span<const double> generated);

/// Two-sample Kolmogorov-Smirnov statistic: sup |F_a(x) - F_b(x)|.
double ks_statistic(std::span<const double> sample_a, std::span<const double> sample_b);

struct FeatureScore {
    std::string name;
    double value;
};

struct EvalReport {
    Circuit circuit = Circuit::Not;
    std::size_t rows = 0;
    std::vector<FeatureScore> output_mape;  // percent, one per output feature
    std::vector<FeatureScore> ks;           // one per feature
    /// Rows with any generated delay <= 0.
    std::size_t nonphysical_rows = 0;
    /// Rows whose generated inputs violate the sampler's ranges (still scored).
    std::size_t out_of_range_rows = 0;
    /// Rows the oracle could not evaluate (non-conducting or non-finite);
    /// excluded from MAPE.
    std::size_t unscorable_rows = 0;

    // configuration echo
    std::uint64_t sample_seed = 0;
    std::uint64_t reference_seed = 0;
    std::string sampler;
    double lr = 0.0;
    std::size_t epochs = 0;
    std::size_t hidden_layers = 0;

    double mean_output_mape() const;
    double nonphysical_fraction() const { return rows ? static_cast<double>(nonphysical_rows) / rows : 0.0; }
};

/// Oracle replay on an existing dataset: outputs recomputed from each row's
/// inputs and compared with the stored outputs; KS against `reference`.
EvalReport evaluate_dataset(const Dataset& generated, const Dataset& reference, const GateTopology& topology,
                            const ProcessNominals& nominals = {});

struct EvalOptions {
    std::size_t n = 500;
    std::uint64_t sample_seed = 1;
    std::uint64_t reference_seed = 2;
    diffusion::Sampler sampler = diffusion::Sampler::Paper;
    ProcessNominals nominals{};
};

/// Generates `n` rows from the model and scores them. KS is computed against a
/// fresh n-row real dataset drawn with `reference_seed`.
EvalReport evaluate(diffusion::DiffusionModel& model, const GateTopology& topology, const EvalOptions& options);

/// Per-feature aligned histograms over the pooled range, written as CSV with
/// columns feature,bin,lower,upper,real_count,generated_count.
void export_histograms(const Dataset& real, const Dataset& generated, std::size_t bins,
                       const std::filesystem::path& path);

struct HistogramRow {
    std::string feature;
    std::size_t bin;
    double lower;
    double upper;
    std::size_t real_count;
    std::size_t generated_count;
};

std::vector<HistogramRow> histograms(const Dataset& real, const Dataset& generated, std::size_t bins);

}  // namespace circuitdiff::eval
