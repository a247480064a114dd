#include "circuitdiff/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "circuitdiff/error.hpp"

namespace circuitdiff {

using nlohmann::json;
using namespace diffusion;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorKind::MalformedCheckpoint, what); }

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) malformed(std::string("missing field '") + key + "'");
    return j.at(key);
}

template <typename T>
T get(const json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const json::exception& e) {
        malformed(std::string("field '") + key + "': " + e.what());
    }
}

std::vector<double> get_array(const json& j, const char* key, std::size_t expected) {
    auto v = get<std::vector<double>>(j, key);
    if (v.size() != expected) {
        malformed(std::string("field '") + key + "' has " + std::to_string(v.size()) + " values, expected " +
                  std::to_string(expected));
    }
    return v;
}

json layer_to_json(const nn::Layer& layer) {
    return std::visit(
        [](const auto& l) -> json {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, nn::DenseLayer>) {
                return {{"type", "dense"}, {"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"biases", l.biases}};
            } else if constexpr (std::is_same_v<L, nn::BatchNormLayer>) {
                return {{"type", "batchnorm"},          {"width", l.width},
                        {"gamma", l.gamma},             {"beta", l.beta},
                        {"running_mean", l.running_mean}, {"running_var", l.running_var},
                        {"stats_populated", l.stats_populated}};
            } else {
                return {{"type", "leaky_relu"}, {"slope", l.slope}};
            }
        },
        layer);
}

nn::Layer layer_from_json(const json& j) {
    const auto type = get<std::string>(j, "type");
    if (type == "dense") {
        nn::DenseLayer d(get<std::size_t>(j, "in"), get<std::size_t>(j, "out"));
        d.weights = get_array(j, "weights", d.in * d.out);
        d.biases = get_array(j, "biases", d.out);
        return d;
    }
    if (type == "batchnorm") {
        nn::BatchNormLayer b(get<std::size_t>(j, "width"));
        b.gamma = get_array(j, "gamma", b.width);
        b.beta = get_array(j, "beta", b.width);
        b.running_mean = get_array(j, "running_mean", b.width);
        b.running_var = get_array(j, "running_var", b.width);
        b.stats_populated = get<bool>(j, "stats_populated");
        return b;
    }
    if (type == "leaky_relu") return nn::LeakyReluLayer(get<double>(j, "slope"));
    malformed("unknown layer type '" + type + "'");
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const char* where) {
    if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, std::string(where) + " must be a JSON object");
    std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw Error(ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, std::string("config key '") + key + "': " + e.what());
    }
}

}  // namespace

json to_json(const ScheduleConfig& s) {
    return {{"steps", s.steps}, {"beta_start", s.beta_start}, {"beta_end", s.beta_end}};
}

json to_json(const DenoiserConfig& c) {
    return {{"hidden_widths", c.hidden_widths},
            {"slope", c.slope},
            {"lr", c.lr},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"validation_fraction", c.validation_fraction},
            {"seed", c.seed},
            {"target", std::string(noise_target_name(c.target))},
            {"time_encoding", std::string(time_encoding_name(c.time_encoding))},
            {"gaussian_skip", c.gaussian_skip}};
}

ScheduleConfig schedule_from_json(const json& j, ScheduleConfig base) {
    reject_unknown_keys(j, {"steps", "beta_start", "beta_end"}, "schedule");
    read_into(j, "steps", base.steps);
    read_into(j, "beta_start", base.beta_start);
    read_into(j, "beta_end", base.beta_end);
    return base;
}

DenoiserConfig denoiser_from_json(const json& j, DenoiserConfig base) {
    reject_unknown_keys(j,
                        {"hidden_widths", "hidden_layers", "slope", "lr", "batch_size", "max_epochs", "patience",
                         "validation_fraction", "seed", "target", "time_encoding", "gaussian_skip"},
                        "denoiser");
    if (j.contains("hidden_layers")) {
        std::size_t layers = 0;
        read_into(j, "hidden_layers", layers);
        base.hidden_widths = widths_for_layers(layers);
    }
    read_into(j, "hidden_widths", base.hidden_widths);
    read_into(j, "slope", base.slope);
    read_into(j, "lr", base.lr);
    read_into(j, "batch_size", base.batch_size);
    read_into(j, "max_epochs", base.max_epochs);
    read_into(j, "patience", base.patience);
    read_into(j, "validation_fraction", base.validation_fraction);
    read_into(j, "seed", base.seed);
    std::string name;
    if (j.contains("target")) {
        read_into(j, "target", name);
        base.target = parse_noise_target(name);
    }
    if (j.contains("time_encoding")) {
        read_into(j, "time_encoding", name);
        base.time_encoding = parse_time_encoding(name);
    }
    read_into(j, "gaussian_skip", base.gaussian_skip);
    return base;
}

json model_to_json(const DiffusionModel& model) {
    const DatasetSchema schema(model.circuit);
    json layers = json::array();
    for (const auto& layer : model.network.layers()) layers.push_back(layer_to_json(layer));
    const auto& h = model.history;
    return {{"format", "circuitdiff-model"},
            {"version", kCheckpointVersion},
            {"circuit", std::string(circuit_name(model.circuit))},
            {"features", schema.names()},
            {"hidden_widths", model.denoiser_config.hidden_widths},
            {"layers", std::move(layers)},
            {"norm", {{"mean", model.norm.mean}, {"std", model.norm.std}}},
            {"schedule", to_json(model.schedule_config)},
            {"denoiser", to_json(model.denoiser_config)},
            {"training",
             {{"epochs_run", h.epochs_run},
              {"best_epoch", h.best_epoch},
              {"best_validation_loss", h.best_validation_loss},
              {"stopped_early", h.stopped_early},
              {"final_train_loss", h.train_loss.empty() ? 0.0 : h.train_loss.back()}}},
            {"trained", model.trained}};
}

DiffusionModel model_from_json(const json& j) {
    if (get<std::string>(j, "format") != "circuitdiff-model") malformed("not a model checkpoint");
    const int version = get<int>(j, "version");
    if (version != kCheckpointVersion) malformed("unsupported checkpoint version " + std::to_string(version));

    DiffusionModel model;
    model.circuit = parse_circuit(get<std::string>(j, "circuit"));
    const DatasetSchema schema(model.circuit);
    if (get<std::vector<std::string>>(j, "features") != schema.names()) {
        malformed("feature names do not match the circuit schema");
    }
    const std::size_t f = schema.feature_count();
    try {
        model.schedule_config = schedule_from_json(field(j, "schedule"));
        model.denoiser_config = denoiser_from_json(field(j, "denoiser"));
    } catch (const Error& e) {
        malformed(e.what());
    }
    model.schedule = linear_schedule(model.schedule_config.steps, model.schedule_config.beta_start,
                                     model.schedule_config.beta_end);

    const auto& norm = field(j, "norm");
    model.norm = {model.circuit, get_array(norm, "mean", f), get_array(norm, "std", f)};

    std::vector<nn::Layer> layers;
    const auto& jl = field(j, "layers");
    if (!jl.is_array() || jl.empty()) malformed("'layers' must be a nonempty array");
    for (const auto& l : jl) layers.push_back(layer_from_json(l));
    model.network = nn::Network(std::move(layers));
    const std::size_t expected_in = f + time_width(model.denoiser_config.time_encoding);
    if (model.network.input_width() != expected_in || model.network.output_width() != f) {
        malformed("network widths do not fit the schema and time encoding");
    }

    const auto& t = field(j, "training");
    model.history.epochs_run = get<std::size_t>(t, "epochs_run");
    model.history.best_epoch = get<std::size_t>(t, "best_epoch");
    model.history.best_validation_loss = get<double>(t, "best_validation_loss");
    model.history.stopped_early = get<bool>(t, "stopped_early");
    model.trained = get<bool>(j, "trained");
    if (model.trained) {
        for (const auto& layer : model.network.layers()) {
            if (const auto* bn = std::get_if<nn::BatchNormLayer>(&layer); bn && !bn->stats_populated) {
                malformed("trained model has unpopulated batch-norm statistics");
            }
        }
    }
    return model;
}

void save_model(const DiffusionModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + path.string() + "' for writing");
    out << model_to_json(model).dump(1) << '\n';
    if (!out) throw Error(ErrorKind::IoFailure, "write to '" + path.string() + "' failed");
}

DiffusionModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        malformed(path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace circuitdiff
