#include "circuitdiff/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "circuitdiff/config.hpp"
#include "circuitdiff/error.hpp"

namespace circuitdiff {

using nlohmann::json;

namespace {

// JSON has no NaN; undefined scores become null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string cell(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

json scores(const std::vector<eval::FeatureScore>& s) {
    json out = json::object();
    for (const auto& f : s) out[f.name] = number(f.value);
    return out;
}

}  // namespace

json to_json(const eval::EvalReport& r) {
    return {{"circuit", std::string(circuit_name(r.circuit))},
            {"rows", r.rows},
            {"output_mape_percent", scores(r.output_mape)},
            {"mean_output_mape_percent", number(r.mean_output_mape())},
            {"ks", scores(r.ks)},
            {"nonphysical_rows", r.nonphysical_rows},
            {"nonphysical_fraction", r.nonphysical_fraction()},
            {"out_of_range_rows", r.out_of_range_rows},
            {"unscorable_rows", r.unscorable_rows},
            {"config",
             {{"sample_seed", r.sample_seed},
              {"reference_seed", r.reference_seed},
              {"sampler", r.sampler},
              {"lr", r.lr},
              {"epochs", r.epochs},
              {"hidden_layers", r.hidden_layers}}}};
}

json to_json(const gbr::RegressionMetrics& m) {
    return {{"r2", number(m.r2)}, {"mse", number(m.mse)}, {"rmse", number(m.rmse)},
            {"mae", number(m.mae)}, {"mape_fraction", number(m.mape)}};
}

json to_json(const gbr::BenchReport& r) {
    json targets = json::object();
    for (const auto& t : r.targets) {
        targets[t.target] = {{"real_only", to_json(t.real_only)},
                             {"augmented", to_json(t.augmented)},
                             {"improvement_percent", to_json(t.improvement)}};
    }
    return {{"circuit", std::string(circuit_name(r.circuit))},
            {"n_train", r.n_train},
            {"n_synthetic", r.n_synthetic},
            {"n_test", r.n_test},
            {"seed", r.seed},
            {"gbr", to_json(r.config)},
            {"targets", std::move(targets)}};
}

std::string bench_table_csv(const gbr::BenchReport& r) {
    std::ostringstream out;
    out << "metric";
    for (const char* group : {"real", "augmented", "improvement_percent"}) {
        for (const auto& t : r.targets) out << ',' << group << ':' << t.target;
    }
    out << '\n';
    using Getter = double (*)(const gbr::RegressionMetrics&);
    const std::pair<const char*, Getter> rows[] = {
        {"r2", [](const gbr::RegressionMetrics& m) { return m.r2; }},
        {"mse", [](const gbr::RegressionMetrics& m) { return m.mse; }},
        {"rmse", [](const gbr::RegressionMetrics& m) { return m.rmse; }},
        {"mae", [](const gbr::RegressionMetrics& m) { return m.mae; }},
        {"mape_fraction", [](const gbr::RegressionMetrics& m) { return m.mape; }},
    };
    for (const auto& [name, get] : rows) {
        out << name;
        for (const auto& t : r.targets) out << ',' << cell(get(t.real_only));
        for (const auto& t : r.targets) out << ',' << cell(get(t.augmented));
        for (const auto& t : r.targets) out << ',' << cell(get(t.improvement));
        out << '\n';
    }
    return out.str();
}

std::string mape_table_csv(const std::vector<eval::EvalReport>& reports) {
    std::ostringstream out;
    out << "circuit,A,B,C,D,E,F\n";
    for (const auto& r : reports) {
        out << circuit_name(r.circuit);
        for (std::size_t i = 0; i < 6; ++i) {
            out << ',';
            if (i < r.output_mape.size()) out << cell(r.output_mape[i].value);
        }
        out << '\n';
    }
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw Error(ErrorKind::IoFailure, "write to '" + path.string() + "' failed");
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace circuitdiff
