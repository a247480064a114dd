#include <sstream>

#include "doctest.h"

#include "circuitdiff/config.hpp"
#include "circuitdiff/error.hpp"
#include "circuitdiff/report.hpp"

using namespace circuitdiff;
using nlohmann::json;

namespace {

ErrorKind config_error(const json& j) {
    try {
        config_from_json(j).validate();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::IoFailure;
}

std::size_t count_lines(const std::string& s) {
    std::istringstream in(s);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults are valid and round-trip through json") {
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    const auto j = to_json(c);
    CHECK(j.at("denoiser").at("seed") == c.seeds.train);
    const auto back = config_from_json(j);
    CHECK(to_json(back) == j);
}

TEST_CASE("partial configs keep defaults") {
    const auto c = config_from_json(json{{"circuit", "nand2"}, {"seeds", {{"train", 12}}}});
    CHECK(c.circuit == Circuit::Nand2);
    CHECK(c.seeds.train == 12);
    CHECK(c.seeds.data == 7);
    CHECK(c.resolved_denoiser().seed == 12);
    CHECK(c.n_real == 500);
}

TEST_CASE("hidden_layers selects a preset") {
    const auto c = config_from_json(json{{"denoiser", {{"hidden_layers", 6}}}});
    CHECK(c.denoiser.hidden_widths == diffusion::widths_for_layers(6));
}

TEST_CASE("invalid configs are rejected") {
    CHECK(config_error(json{{"bogus", 1}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json{{"seeds", {{"colour", 1}}}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json{{"circuit", "xor9"}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json{{"n_real", "many"}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json{{"n_real", 0}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json{{"test_fraction", 1.0}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json{{"schedule", {{"beta_start", 0.03}}}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json{{"denoiser", {{"learning_rate", -1.0}}}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json{{"gbr", {{"shrinkage", 0.0}}}}) == ErrorKind::InvalidConfig);
    // 20 rows leave 16 training rows, fewer than the default batch
    CHECK(config_error(json{{"n_real", 20}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json{{"nominals", {{"vdd", -1.0}}}}) == ErrorKind::InvalidConfig);
    CHECK(config_error(json::array()) == ErrorKind::InvalidConfig);
}

TEST_CASE("missing config file") {
    try {
        load_config("/nonexistent/run.json");
        FAIL("no error thrown");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::IoFailure);
    }
}

}  // TEST_SUITE

TEST_SUITE("report") {

TEST_CASE("eval report json maps NaN to null") {
    eval::EvalReport r;
    r.rows = 3;
    r.output_mape = {{"delay_lh_a", 1.5}, {"delay_hl_a", 2.5}};
    r.ks = {{"vdd", std::numeric_limits<double>::quiet_NaN()}};
    const auto j = to_json(r);
    CHECK(j.at("mean_output_mape_percent") == 2.0);
    CHECK(j.at("ks").at("vdd").is_null());
}

TEST_CASE("benchmark table has one row per metric") {
    gbr::BenchReport r;
    const gbr::RegressionMetrics m{0.9, 1.0, 1.0, 0.5, 0.1};
    r.targets = {{"delay_lh_a", m, m, {}}, {"delay_hl_a", m, m, {}}};
    const auto csv = bench_table_csv(r);
    CHECK(csv.rfind("metric,real:delay_lh_a,real:delay_hl_a,augmented:delay_lh_a,augmented:delay_hl_a,"
                    "improvement_percent:delay_lh_a,improvement_percent:delay_hl_a\n",
                    0) == 0);
    CHECK(count_lines(csv) == 6);
}

TEST_CASE("mape table leaves absent nodes blank") {
    eval::EvalReport a;
    a.circuit = Circuit::Not;
    a.output_mape = {{"delay_lh_a", 1.0}, {"delay_hl_a", 2.0}};
    const auto csv = mape_table_csv({a});
    std::istringstream in(csv);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "circuit,A,B,C,D,E,F");
    CHECK(row.substr(row.size() - 4) == ",,,,");
}

}  // TEST_SUITE
