#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"

#include "circuitdiff/error.hpp"
#include "circuitdiff/eval.hpp"

using namespace circuitdiff;
using namespace circuitdiff::eval;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::InvalidConfig;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("mape examples") {
    CHECK(mape(std::vector<double>{100}, std::vector<double>{90}) == 10.0);
    CHECK(mape(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
    CHECK(mape(std::vector<double>{2, 4}, std::vector<double>{1, 5}) == 37.5);
}

TEST_CASE("mape errors") {
    CHECK(kind_of([] { mape(std::vector<double>{1, 0}, std::vector<double>{1, 1}); }) == ErrorKind::ZeroReference);
    CHECK(kind_of([] { mape(std::vector<double>{1}, std::vector<double>{1, 1}); }) == ErrorKind::LengthMismatch);
    CHECK(kind_of([] { mape(std::vector<double>{}, std::vector<double>{}); }) == ErrorKind::LengthMismatch);
}

TEST_CASE("mape is scale invariant") {
    const auto ref = testing::random_vector(50, 1, 1.0, 2.0);
    const auto gen = testing::random_vector(50, 2, 1.0, 2.0);
    const double base = mape(ref, gen);
    for (double k : {1e-12, -3.0, 7.5}) {
        std::vector<double> r2(ref), g2(gen);
        for (auto& v : r2) v *= k;
        for (auto& v : g2) v *= k;
        CHECK(testing::rel_err(mape(r2, g2), base) <= 1e-12);
    }
}

TEST_CASE("ks examples") {
    CHECK(ks_statistic(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
    CHECK(ks_statistic(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
    CHECK(ks_statistic(std::vector<double>{1, 2}, std::vector<double>{1, 3}) == 0.5);
    CHECK(kind_of([] { ks_statistic(std::vector<double>{}, std::vector<double>{1}); }) == ErrorKind::EmptySample);
}

TEST_CASE("ks is symmetric and invariant under increasing transforms") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = testing::random_vector(40 + seed, seed, -2.0, 2.0);
        const auto b = testing::random_vector(55, seed + 100, -1.5, 2.5);
        const double d = ks_statistic(a, b);
        CHECK(d == ks_statistic(b, a));
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        std::vector<double> ea(a), eb(b);
        for (auto& v : ea) v = std::exp(v);
        for (auto& v : eb) v = std::exp(v);
        CHECK(ks_statistic(ea, eb) == d);
    }
}

TEST_CASE("ks with ties across samples") {
    // ECDFs: a = {1,1,2}, b = {1,2,2}; at x=1: 2/3 vs 1/3
    CHECK(ks_statistic(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 2}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("real data scores exactly zero") {
    for (Circuit c : kAllCircuits) {
        const auto real = generate_dataset(c, 300, 7);
        const auto report = evaluate_dataset(real, generate_dataset(c, 300, 8), topology_for(c));
        CHECK(report.output_mape.size() == DatasetSchema(c).output_count());
        for (const auto& m : report.output_mape) CHECK(m.value == 0.0);
        CHECK(report.nonphysical_rows == 0);
        CHECK(report.unscorable_rows == 0);
        CHECK(report.out_of_range_rows == 0);
        CHECK(report.ks.size() == DatasetSchema(c).feature_count());
    }
}

TEST_CASE("perturbed outputs are scored and nonphysical rows counted") {
    const auto real = generate_dataset(Circuit::Not, 10, 7);
    std::vector<double> values(real.values().begin(), real.values().end());
    for (std::size_t r = 0; r < 10; ++r) values[r * 17 + 15] *= 1.1;  // delay_lh +10%
    values[3 * 17 + 16] = -1e-12;                                      // one negative delay
    const Dataset gen(real.schema(), values);
    const auto report = evaluate_dataset(gen, real, topology_for(Circuit::Not));
    CHECK(report.output_mape[0].value == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(report.nonphysical_rows == 1);
    CHECK(report.out_of_range_rows == 0);
    CHECK(report.rows == 10);
    CHECK(report.nonphysical_fraction() == doctest::Approx(0.1));
}

TEST_CASE("rows outside the sampled ranges are still scored") {
    const auto real = generate_dataset(Circuit::Not, 10, 7);
    std::vector<double> values(real.values().begin(), real.values().end());
    values[4 * 17 + 0] = 0.95;  // nominal 0.8 V, so outside +/-10%
    const Dataset gen(real.schema(), values);
    const auto report = evaluate_dataset(gen, real, topology_for(Circuit::Not));
    CHECK(report.out_of_range_rows == 1);
    CHECK(report.unscorable_rows == 0);
    CHECK(report.output_mape[0].value > 0.0);
}

TEST_CASE("rows the oracle cannot evaluate are excluded and counted") {
    const auto real = generate_dataset(Circuit::Not, 5, 7);
    std::vector<double> values(real.values().begin(), real.values().end());
    values[2 * 17 + 0] = 0.1;  // Vdd below threshold
    const Dataset gen(real.schema(), values);
    const auto report = evaluate_dataset(gen, real, topology_for(Circuit::Not));
    CHECK(report.unscorable_rows == 1);
    CHECK(report.out_of_range_rows == 1);
    CHECK(std::isfinite(report.output_mape[0].value));
}

TEST_CASE("evaluate_dataset schema checks") {
    const auto a = generate_dataset(Circuit::Not, 5, 1);
    const auto b = generate_dataset(Circuit::Nand2, 5, 1);
    CHECK(kind_of([&] { evaluate_dataset(a, b, topology_for(Circuit::Not)); }) == ErrorKind::SchemaMismatch);
    CHECK(kind_of([&] { evaluate_dataset(a, a, topology_for(Circuit::Nand2)); }) == ErrorKind::SchemaMismatch);
}

TEST_CASE("evaluate needs a trained model") {
    diffusion::DiffusionModel m;
    CHECK(kind_of([&] { evaluate(m, topology_for(Circuit::Not), {}); }) == ErrorKind::UntrainedModel);
}

TEST_CASE("histograms") {
    const auto real = generate_dataset(Circuit::Not, 500, 1);
    const auto gen = generate_dataset(Circuit::Not, 500, 2);
    const auto same = histograms(real, real, 30);
    for (const auto& row : same) CHECK(row.real_count == row.generated_count);
    const auto rows = histograms(real, gen, 30);
    CHECK(rows.size() == 30 * 17);
    for (std::size_t f = 0; f < 17; ++f) {
        std::size_t sr = 0, sg = 0;
        for (std::size_t k = 0; k < 30; ++k) {
            sr += rows[f * 30 + k].real_count;
            sg += rows[f * 30 + k].generated_count;
            CHECK(rows[f * 30 + k].bin == k);
            CHECK(rows[f * 30 + k].lower < rows[f * 30 + k].upper);
        }
        CHECK(sr == 500);
        CHECK(sg == 500);
    }
    CHECK(kind_of([&] { histograms(real, generate_dataset(Circuit::Nor2, 5, 1), 30); }) == ErrorKind::SchemaMismatch);
}

TEST_CASE("histogram export writes one row per bin and feature") {
    const auto real = generate_dataset(Circuit::Not, 50, 1);
    const auto path = std::filesystem::temp_directory_path() / "circuitdiff_hist.csv";
    export_histograms(real, real, 30, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "feature,bin,lower,upper,real_count,generated_count");
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    CHECK(n == 30 * 17);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
