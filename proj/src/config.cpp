#include "circuitdiff/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "circuitdiff/checkpoint.hpp"
#include "circuitdiff/error.hpp"

namespace circuitdiff {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); }

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) invalid(where + " must be a JSON object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) invalid("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        invalid(std::string("config key '") + key + "': " + e.what());
    }
}

json device_json(const DeviceNominals& d) {
    return {{"length", d.length}, {"width", d.width}, {"tox_e", d.tox_e},
            {"tox_nom", d.tox_nom}, {"xj", d.xj},       {"ndep", d.ndep}};
}

void read_device(const json& j, DeviceNominals& d, const std::string& where) {
    check_keys(j, {"length", "width", "tox_e", "tox_nom", "xj", "ndep"}, where);
    read(j, "length", d.length);
    read(j, "width", d.width);
    read(j, "tox_e", d.tox_e);
    read(j, "tox_nom", d.tox_nom);
    read(j, "xj", d.xj);
    read(j, "ndep", d.ndep);
}

}  // namespace

diffusion::DenoiserConfig RunConfig::resolved_denoiser() const {
    auto d = denoiser;
    d.seed = seeds.train;
    return d;
}

void RunConfig::validate() const {
    if (n_real < 1) invalid("n_real must be at least 1");
    if (n_synthetic < 1) invalid("n_synthetic must be at least 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) invalid("test_fraction must be in (0,1)");
    if (histogram_bins < 2) invalid("histogram_bins must be at least 2");
    if (schedule.steps < 2) invalid("schedule.steps must be at least 2");
    if (!(schedule.beta_start > 0.0 && schedule.beta_start <= schedule.beta_end && schedule.beta_end < 1.0)) {
        invalid("schedule needs 0 < beta_start <= beta_end < 1");
    }
    denoiser.validate();
    const auto n_val = static_cast<std::size_t>(std::floor(denoiser.validation_fraction * static_cast<double>(n_real)));
    if (n_real - n_val < denoiser.batch_size) {
        invalid("n_real leaves " + std::to_string(n_real - n_val) + " training rows, fewer than batch_size " +
                std::to_string(denoiser.batch_size));
    }
    gbr.validate();
    const auto n_test = static_cast<std::size_t>(std::round(test_fraction * static_cast<double>(n_real)));
    if (n_test < 1 || n_real - n_test < 2 * gbr.min_samples_leaf) {
        invalid("n_real is too small for the benchmark split and min_samples_leaf");
    }
    try {
        nominals.validate();
    } catch (const Error& e) {
        invalid(e.what());
    }
    if (out_dir.empty()) invalid("out_dir must not be empty");
}

json to_json(const gbr::GbrConfig& c) {
    return {{"n_trees", c.n_trees},
            {"max_depth", c.max_depth},
            {"shrinkage", c.shrinkage},
            {"min_samples_leaf", c.min_samples_leaf},
            {"subsample", c.subsample}};
}

json to_json(const ProcessNominals& n) {
    return {{"nmos", device_json(n.nmos)}, {"pmos", device_json(n.pmos)}, {"vdd", n.vdd},
            {"temp_min", n.temp_min},       {"temp_max", n.temp_max},     {"c_load", n.c_load},
            {"vth0", n.vth0}};
}

json to_json(const RunConfig& c) {
    return {{"circuit", std::string(circuit_name(c.circuit))},
            {"seeds",
             {{"data", c.seeds.data},
              {"train", c.seeds.train},
              {"sample", c.seeds.sample},
              {"reference", c.seeds.reference},
              {"split", c.seeds.split},
              {"gbr", c.seeds.gbr}}},
            {"n_real", c.n_real},
            {"n_synthetic", c.n_synthetic},
            {"test_fraction", c.test_fraction},
            {"histogram_bins", c.histogram_bins},
            {"schedule", to_json(c.schedule)},
            {"denoiser", to_json(c.resolved_denoiser())},
            {"sampler", std::string(diffusion::sampler_name(c.sampler))},
            {"gbr", to_json(c.gbr)},
            {"nominals", to_json(c.nominals)},
            {"out_dir", c.out_dir.generic_string()}};
}

RunConfig config_from_json(const json& j) {
    check_keys(j,
               {"circuit", "seeds", "n_real", "n_synthetic", "test_fraction", "histogram_bins", "schedule", "denoiser",
                "sampler", "gbr", "nominals", "out_dir"},
               "config");
    RunConfig c;
    std::string text;
    if (j.contains("circuit")) {
        read(j, "circuit", text);
        try {
            c.circuit = parse_circuit(text);
        } catch (const Error& e) {
            invalid(e.what());
        }
    }
    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        check_keys(s, {"data", "train", "sample", "reference", "split", "gbr"}, "seeds");
        read(s, "data", c.seeds.data);
        read(s, "train", c.seeds.train);
        read(s, "sample", c.seeds.sample);
        read(s, "reference", c.seeds.reference);
        read(s, "split", c.seeds.split);
        read(s, "gbr", c.seeds.gbr);
    }
    read(j, "n_real", c.n_real);
    read(j, "n_synthetic", c.n_synthetic);
    read(j, "test_fraction", c.test_fraction);
    read(j, "histogram_bins", c.histogram_bins);
    if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"), c.schedule);
    if (j.contains("denoiser")) c.denoiser = denoiser_from_json(j.at("denoiser"), c.denoiser);
    if (j.contains("sampler")) {
        read(j, "sampler", text);
        try {
            c.sampler = diffusion::parse_sampler(text);
        } catch (const Error& e) {
            invalid(e.what());
        }
    }
    if (j.contains("gbr")) {
        const auto& g = j.at("gbr");
        check_keys(g, {"n_trees", "max_depth", "shrinkage", "min_samples_leaf", "subsample"}, "gbr");
        read(g, "n_trees", c.gbr.n_trees);
        read(g, "max_depth", c.gbr.max_depth);
        read(g, "shrinkage", c.gbr.shrinkage);
        read(g, "min_samples_leaf", c.gbr.min_samples_leaf);
        read(g, "subsample", c.gbr.subsample);
    }
    if (j.contains("nominals")) {
        const auto& n = j.at("nominals");
        check_keys(n, {"nmos", "pmos", "vdd", "temp_min", "temp_max", "c_load", "vth0"}, "nominals");
        if (n.contains("nmos")) read_device(n.at("nmos"), c.nominals.nmos, "nominals.nmos");
        if (n.contains("pmos")) read_device(n.at("pmos"), c.nominals.pmos, "nominals.pmos");
        read(n, "vdd", c.nominals.vdd);
        read(n, "temp_min", c.nominals.temp_min);
        read(n, "temp_max", c.nominals.temp_max);
        read(n, "c_load", c.nominals.c_load);
        read(n, "vth0", c.nominals.vth0);
    }
    if (j.contains("out_dir")) {
        read(j, "out_dir", text);
        c.out_dir = text;
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        invalid(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace circuitdiff
