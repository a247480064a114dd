#include "circuitdiff/schema.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "circuitdiff/error.hpp"

namespace circuitdiff {

namespace {

struct CircuitInfo {
    Circuit circuit;
    std::string_view name;
    std::string_view label;
    std::size_t nodes;
};

constexpr std::array<CircuitInfo, 12> kCircuitInfo = {{
    {Circuit::Not, "not", "NOT gate", 1},
    {Circuit::Nand2, "nand2", "Two input NAND gate", 2},
    {Circuit::And2, "and2", "Two input AND gate", 2},
    {Circuit::Nor2, "nor2", "Two input NOR gate", 2},
    {Circuit::Or2, "or2", "Two input OR gate", 2},
    {Circuit::Xor2, "xor2", "Two input XOR gate", 2},
    {Circuit::AndOr3, "andor3", "Three input AND-OR circuit", 3},
    {Circuit::FullAdder, "full_adder", "Full adder", 3},
    {Circuit::Mux2, "mux2", "2:1 Multiplexer", 3},
    {Circuit::Nand3, "nand3", "Three input NAND gate", 3},
    {Circuit::And3, "and3", "Three input AND gate", 3},
    {Circuit::Nor3, "nor3", "Three input NOR gate", 3},
}};

// kCircuitInfo is ordered like the enum.
const CircuitInfo& info(Circuit c) noexcept { return kCircuitInfo[static_cast<std::size_t>(c)]; }

std::vector<FeatureSpec> build_features(Circuit circuit) {
    std::vector<FeatureSpec> f;
    f.push_back({"vdd", FeatureRole::Input, Unit::Volt});
    f.push_back({"temp", FeatureRole::Input, Unit::Celsius});
    f.push_back({"cload", FeatureRole::Input, Unit::Farad});
    for (std::string_view dev : {"nmos", "pmos"}) {
        const std::string d(dev);
        f.push_back({d + "_l", FeatureRole::Input, Unit::Meter});
        f.push_back({d + "_w", FeatureRole::Input, Unit::Meter});
        f.push_back({d + "_toxe", FeatureRole::Input, Unit::Meter});
        f.push_back({d + "_toxm", FeatureRole::Input, Unit::Meter});
        f.push_back({d + "_xj", FeatureRole::Input, Unit::Meter});
        f.push_back({d + "_ndep", FeatureRole::Input, Unit::PerCubicCm});
    }
    constexpr std::string_view node_names = "abc";
    for (std::size_t n = 0; n < info(circuit).nodes; ++n) {
        const std::string suffix(1, node_names[n]);
        f.push_back({"delay_lh_" + suffix, FeatureRole::Output, Unit::Second});
        f.push_back({"delay_hl_" + suffix, FeatureRole::Output, Unit::Second});
    }
    return f;
}

void check_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteValue, "dataset values must be finite");
    }
}

void check_stats(const Dataset& dataset, const NormStats& stats) {
    if (stats.circuit != dataset.schema().circuit() || stats.mean.size() != dataset.cols() ||
        stats.std.size() != dataset.cols()) {
        throw Error(ErrorKind::SchemaMismatch, "normalization stats were fit on a different schema");
    }
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

std::string_view circuit_name(Circuit c) noexcept { return info(c).name; }
std::string_view circuit_label(Circuit c) noexcept { return info(c).label; }

Circuit parse_circuit(std::string_view name) {
    for (const auto& i : kCircuitInfo) {
        if (i.name == name) return i.circuit;
    }
    throw Error(ErrorKind::UnknownCircuit, "unknown circuit '" + std::string(name) + "'");
}

std::string_view unit_symbol(Unit u) noexcept {
    switch (u) {
        case Unit::Volt: return "V";
        case Unit::Celsius: return "degC";
        case Unit::Meter: return "m";
        case Unit::Farad: return "F";
        case Unit::Second: return "s";
        case Unit::PerCubicCm: return "cm^-3";
        case Unit::Dimensionless: return "1";
    }
    return "?";
}

DatasetSchema::DatasetSchema(Circuit circuit) : circuit_(circuit), features_(build_features(circuit)) {}

std::size_t DatasetSchema::index_of(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].name == name) return i;
    }
    return features_.size();
}

std::vector<std::string> DatasetSchema::names() const {
    std::vector<std::string> out;
    out.reserve(features_.size());
    for (const auto& f : features_) out.push_back(f.name);
    return out;
}

DatasetSchema schema_for(Circuit circuit) { return DatasetSchema(circuit); }

Dataset::Dataset(DatasetSchema schema) : schema_(std::move(schema)) {}

Dataset::Dataset(DatasetSchema schema, std::vector<double> values)
    : schema_(std::move(schema)), values_(std::move(values)) {
    if (values_.size() % cols() != 0) {
        throw Error(ErrorKind::ShapeMismatch, "value count is not a multiple of the feature count");
    }
    check_finite(values_);
}

std::vector<double> Dataset::column(std::size_t c) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
}

void Dataset::append_row(std::span<const double> row) {
    if (row.size() != cols()) throw Error(ErrorKind::ShapeMismatch, "row width does not match schema");
    check_finite(row);
    values_.insert(values_.end(), row.begin(), row.end());
}

void Dataset::append(const Dataset& other) {
    if (!(other.schema() == schema_)) throw Error(ErrorKind::SchemaMismatch, "cannot append rows of another circuit");
    values_.insert(values_.end(), other.values_.begin(), other.values_.end());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<double> out;
    out.reserve(indices.size() * cols());
    for (std::size_t r : indices) {
        auto src = row(r);
        out.insert(out.end(), src.begin(), src.end());
    }
    return Dataset(schema_, std::move(out));
}

NormStats fit_normalizer(const Dataset& dataset) {
    const std::size_t n = dataset.rows();
    if (n < 2) throw Error(ErrorKind::TooFewRows, "need at least 2 rows to fit normalization");
    NormStats stats{dataset.schema().circuit(), std::vector<double>(dataset.cols(), 0.0),
                    std::vector<double>(dataset.cols(), 0.0)};
    for (std::size_t c = 0; c < dataset.cols(); ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) sum += dataset.at(r, c);
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double d = dataset.at(r, c) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (!(sd > 0.0)) {
            throw Error(ErrorKind::ConstantColumn, dataset.schema().features()[c].name);
        }
        stats.mean[c] = mean;
        stats.std[c] = sd;
    }
    return stats;
}

Dataset normalize(const Dataset& dataset, const NormStats& stats) {
    check_stats(dataset, stats);
    std::vector<double> out(dataset.values().begin(), dataset.values().end());
    const std::size_t cols = dataset.cols();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t c = i % cols;
        out[i] = (out[i] - stats.mean[c]) / stats.std[c];
    }
    return Dataset(dataset.schema(), std::move(out));
}

Dataset denormalize(const Dataset& dataset, const NormStats& stats) {
    check_stats(dataset, stats);
    std::vector<double> out(dataset.values().begin(), dataset.values().end());
    const std::size_t cols = dataset.cols();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t c = i % cols;
        out[i] = out[i] * stats.std[c] + stats.mean[c];
    }
    return Dataset(dataset.schema(), std::move(out));
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw Error(ErrorKind::IoFailure, "failed to format value");
    return std::string(buf.data(), end);
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::HeaderMismatch, path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);

    const DatasetSchema* match = nullptr;
    std::vector<DatasetSchema> schemas;
    schemas.reserve(kAllCircuits.size());
    for (Circuit c : kAllCircuits) schemas.emplace_back(c);
    for (const auto& s : schemas) {
        if (s.names() == header) {
            match = &s;
            break;
        }
    }
    if (match == nullptr) {
        throw Error(ErrorKind::HeaderMismatch, "header of " + path.string() + " matches no circuit schema");
    }

    Dataset dataset(*match);
    std::vector<double> row(match->feature_count());
    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != row.size()) {
            throw Error(ErrorKind::NonNumericCell, "row " + std::to_string(row_index) + " has " +
                                                        std::to_string(cells.size()) + " cells, expected " +
                                                        std::to_string(row.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& cell = cells[c];
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (first != last && *first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, row[c]);
            if (ec != std::errc{} || ptr != last || !std::isfinite(row[c])) {
                throw Error(ErrorKind::NonNumericCell, "row " + std::to_string(row_index) + ", column " +
                                                           std::to_string(c) + ": '" + cell + "'");
            }
        }
        dataset.append_row(row);
        ++row_index;
    }
    return dataset;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    const auto names = dataset.schema().names();
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
    out << '\n';
    for (std::size_t r = 0; r < dataset.rows(); ++r) {
        const auto row = dataset.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
        out << '\n';
    }
    if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

}  // namespace circuitdiff
