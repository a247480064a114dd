#pragma once

// Circuit dataset schemas, tabular storage, z-score normalization and CSV I/O.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace circuitdiff {

enum class Circuit {
    Not,
    Nand2,
    And2,
    Nor2,
    Or2,
    Xor2,
    AndOr3,
    FullAdder,
    Mux2,
    Nand3,
    And3,
    Nor3,
};

inline constexpr std::array<Circuit, 12> kAllCircuits = {
    Circuit::Not,    Circuit::Nand2,     Circuit::And2, Circuit::Nor2,
    Circuit::Or2,    Circuit::Xor2,      Circuit::AndOr3, Circuit::FullAdder,
    Circuit::Mux2,   Circuit::Nand3,     Circuit::And3, Circuit::Nor3,
};

/// Short identifier used on the command line and in files ("not", "nand2", ...).
std::string_view circuit_name(Circuit c) noexcept;
/// Human-readable label ("Two input NAND gate").
std::string_view circuit_label(Circuit c) noexcept;
Circuit parse_circuit(std::string_view name);

enum class FeatureRole { Input, Output };

enum class Unit { Volt, Celsius, Meter, Farad, Second, PerCubicCm, Dimensionless };

std::string_view unit_symbol(Unit u) noexcept;

struct FeatureSpec {
    std::string name;
    FeatureRole role;
    Unit unit;

    bool operator==(const FeatureSpec&) const = default;
};

/// Number of input features shared by every circuit: Vdd, T, C_L and six
/// process parameters for each of NMOS and PMOS.
inline constexpr std::size_t kInputFeatureCount = 15;

class DatasetSchema {
public:
    explicit DatasetSchema(Circuit circuit);

    Circuit circuit() const noexcept { return circuit_; }
    std::span<const FeatureSpec> features() const noexcept { return features_; }
    std::size_t feature_count() const noexcept { return features_.size(); }
    std::size_t input_count() const noexcept { return kInputFeatureCount; }
    std::size_t output_count() const noexcept { return features_.size() - kInputFeatureCount; }
    /// Number of observed output nodes (a, b, c); each contributes lh and hl.
    std::size_t node_count() const noexcept { return output_count() / 2; }

    /// Column index of `name`, or feature_count() if absent.
    std::size_t index_of(std::string_view name) const noexcept;
    std::vector<std::string> names() const;

    bool operator==(const DatasetSchema& other) const noexcept { return circuit_ == other.circuit_; }

private:
    Circuit circuit_;
    std::vector<FeatureSpec> features_;
};

DatasetSchema schema_for(Circuit circuit);

/// Row-major sample matrix bound to one schema. Rows may be empty (zero
/// samples); every stored value is finite.
class Dataset {
public:
    explicit Dataset(DatasetSchema schema);
    Dataset(DatasetSchema schema, std::vector<double> values);

    const DatasetSchema& schema() const noexcept { return schema_; }
    std::size_t rows() const noexcept { return cols() == 0 ? 0 : values_.size() / cols(); }
    std::size_t cols() const noexcept { return schema_.feature_count(); }

    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
    std::span<double> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    std::vector<double> column(std::size_t c) const;
    std::span<const double> values() const noexcept { return values_; }

    void append_row(std::span<const double> row);
    void append(const Dataset& other);

    /// Rows selected by index, in the given order.
    Dataset subset(std::span<const std::size_t> indices) const;

private:
    DatasetSchema schema_;
    std::vector<double> values_;
};

struct NormStats {
    Circuit circuit;
    std::vector<double> mean;
    std::vector<double> std;  // population standard deviation
};

NormStats fit_normalizer(const Dataset& dataset);
Dataset normalize(const Dataset& dataset, const NormStats& stats);
Dataset denormalize(const Dataset& dataset, const NormStats& stats);

Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v` (at most 17
/// significant digits).
std::string format_double(double v);

}  // namespace circuitdiff
