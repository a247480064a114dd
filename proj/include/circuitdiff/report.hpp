#pragma once

// JSON and CSV renderings of evaluation and benchmark results.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "circuitdiff/eval.hpp"
#include "circuitdiff/gbr.hpp"

namespace circuitdiff {

nlohmann::json to_json(const eval::EvalReport& r);
nlohmann::json to_json(const gbr::RegressionMetrics& m);
nlohmann::json to_json(const gbr::BenchReport& r);

/// Metric rows (R2, MSE, RMSE, MAE, MAPE) by
/// real-only / augmented / improvement columns for each target.
std::string bench_table_csv(const gbr::BenchReport& r);

/// One row per circuit, output MAPE in columns A..F (lh a, hl a, lh b, hl b,
/// lh c, hl c), blank where the circuit has fewer nodes.
std::string mape_table_csv(const std::vector<eval::EvalReport>& reports);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace circuitdiff
