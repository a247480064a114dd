// circuitdiff: generate circuit-delay data, train the diffusion model, sample,
// evaluate against the delay oracle, and run the augmentation benchmark.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "circuitdiff/checkpoint.hpp"
#include "circuitdiff/config.hpp"
#include "circuitdiff/error.hpp"
#include "circuitdiff/eval.hpp"
#include "circuitdiff/gbr.hpp"
#include "circuitdiff/kernels.hpp"
#include "circuitdiff/report.hpp"

namespace fs = std::filesystem;
using namespace circuitdiff;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot read '" + path.string() + "' for hashing");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char byte[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof byte, "%02x", digest[i]);
        hex += byte;
    }
    return hex;
}

// manifest.json in `dir` keeps one entry per command run there, plus hashes of
// every other file in the directory. No timestamps, so reruns are byte-identical.
void update_manifest(const fs::path& dir, const std::string& command, const json& entry) {
    const fs::path path = dir / "manifest.json";
    json manifest = json::object();
    if (fs::exists(path)) {
        std::ifstream in(path);
        manifest = json::parse(in, nullptr, false);
        if (manifest.is_discarded() || !manifest.is_object()) manifest = json::object();
    }
    manifest["tool"] = "circuitdiff";
    manifest["version"] = kVersion;
    manifest["runs"][command] = entry;
    json files = json::object();
    std::vector<fs::path> paths;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path() != path) paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) files[fs::relative(p, dir).generic_string()] = sha256_file(p);
    manifest["files"] = std::move(files);
    write_json(path, manifest);
}

json run_entry(const RunConfig& cfg, json args) {
    return {{"args", std::move(args)}, {"config", to_json(cfg)}, {"kernels", std::string(kernels::isa_name(kernels::active().isa))}};
}

struct Common {
    std::string config_path;
    std::string out_dir;
    std::string isa;
};

RunConfig load(const Common& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
    if (!c.isa.empty()) {
        const auto isa = kernels::parse_isa(c.isa);
        if (!isa || !kernels::set_active(*isa)) {
            throw Error(ErrorKind::InvalidConfig, "kernel set '" + c.isa + "' is not available on this machine");
        }
    }
    return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out_dir, "Output directory (default from config)");
    cmd->add_option("--isa", c.isa, "Kernel set: scalar or avx2 (default: best available)");
}

void log(const std::string& msg) { std::cerr << msg << '\n'; }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

diffusion::DiffusionModel train_model(const Dataset& real, const RunConfig& cfg) {
    log("training on " + std::to_string(real.rows()) + " rows (" + std::string(circuit_name(real.schema().circuit())) +
        ")");
    auto model = diffusion::train(real, cfg.schedule, cfg.resolved_denoiser());
    log("trained " + std::to_string(model.hidden_layers()) + " hidden layers for " +
        std::to_string(model.history.epochs_run) + " epochs, best validation loss " +
        fmt(model.history.best_validation_loss) + " at epoch " + std::to_string(model.history.best_epoch));
    return model;
}

eval::EvalReport score(diffusion::DiffusionModel& model, const Dataset& generated, const RunConfig& cfg,
                       Dataset* reference_out = nullptr) {
    const Dataset reference = generate_dataset(model.circuit, generated.rows(), cfg.seeds.reference, cfg.nominals);
    auto report = eval::evaluate_dataset(generated, reference, topology_for(model.circuit), cfg.nominals);
    report.sample_seed = cfg.seeds.sample;
    report.reference_seed = cfg.seeds.reference;
    report.sampler = std::string(diffusion::sampler_name(cfg.sampler));
    report.lr = model.denoiser_config.lr;
    report.epochs = model.history.epochs_run;
    report.hidden_layers = model.hidden_layers();
    if (reference_out) *reference_out = reference;
    return report;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<Circuit> circuits_from(const std::string& spec) {
    if (spec == "all") return {kAllCircuits.begin(), kAllCircuits.end()};
    std::vector<Circuit> out;
    for (const auto& name : split_list(spec)) out.push_back(parse_circuit(name));
    if (out.empty()) throw Error(ErrorKind::InvalidConfig, "no circuit given");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-model synthetic data for circuit delay datasets"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // gen-data
    Common gen_common;
    std::string gen_circuit;
    std::size_t gen_n = 0;
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("gen-data", "Monte-Carlo sample a circuit and write data.csv");
    add_common(gen, gen_common);
    gen->add_option("--circuit", gen_circuit, "Circuit name (not, nand2, ..., nor3)");
    gen->add_option("--n", gen_n, "Number of rows (default n_real)")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "Data seed (default seeds.data)");

    // train
    Common train_common;
    std::string train_data;
    std::size_t train_layers = 0;
    double train_lr = 0.0;
    std::size_t train_epochs = 0;
    auto* train = app.add_subcommand("train", "Fit the denoiser to a CSV dataset and write model.json");
    add_common(train, train_common);
    train->add_option("--data", train_data, "Real dataset CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--layers", train_layers, "Hidden layers (4, 5 or 6)");
    train->add_option("--lr", train_lr, "Learning rate");
    train->add_option("--epochs", train_epochs, "Maximum epochs");

    // sample
    Common sample_common;
    std::string sample_model;
    std::size_t sample_n = 0;
    std::uint64_t sample_seed = 0;
    std::string sample_sampler;
    auto* sample = app.add_subcommand("sample", "Generate synthetic rows from a trained model into synthetic.csv");
    add_common(sample, sample_common);
    sample->add_option("--model", sample_model, "Model checkpoint")->required()->check(CLI::ExistingFile);
    sample->add_option("--n", sample_n, "Rows to generate (default n_synthetic)")->check(CLI::PositiveNumber);
    sample->add_option("--seed", sample_seed, "Sample seed (default seeds.sample)");
    sample->add_option("--sampler", sample_sampler, "paper or ancestral");

    // eval
    Common eval_common;
    std::string eval_model;
    std::string eval_generated;
    std::string eval_sampler;
    auto* evalc = app.add_subcommand("eval", "Score generated rows by oracle replay; writes eval.json and histograms.csv");
    add_common(evalc, eval_common);
    auto* eval_model_opt = evalc->add_option("--model", eval_model, "Model checkpoint to sample from")
                               ->check(CLI::ExistingFile);
    evalc->add_option("--generated", eval_generated, "Score an existing CSV instead of sampling")
        ->check(CLI::ExistingFile)
        ->excludes(eval_model_opt);
    evalc->add_option("--sampler", eval_sampler, "paper or ancestral");

    // bench
    Common bench_common;
    std::string bench_data;
    std::string bench_synthetic;
    std::string bench_sampler;
    auto* bench = app.add_subcommand("bench", "GBR on real vs real+synthetic data; writes bench.json and bench.csv");
    add_common(bench, bench_common);
    bench->add_option("--data", bench_data, "Real dataset CSV (default: generated from config)")
        ->check(CLI::ExistingFile);
    bench->add_option("--synthetic", bench_synthetic, "Synthetic CSV (default: train on the real split and sample)")
        ->check(CLI::ExistingFile);
    bench->add_option("--sampler", bench_sampler, "paper or ancestral");

    // sweep
    Common sweep_common;
    std::string sweep_grid;
    std::string sweep_circuit;
    std::string sweep_sampler;
    auto* sweep = app.add_subcommand("sweep", "Train/evaluate over a grid; writes sweep.csv (and mape_table.csv)");
    add_common(sweep, sweep_common);
    sweep->add_option("--grid", sweep_grid, "layers=4,5,6 or lr=0.0001,0.0005,...; omit for one run per circuit");
    sweep->add_option("--circuit", sweep_circuit, "Circuit name, comma list, or all");
    sweep->add_option("--sampler", sweep_sampler, "paper or ancestral");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            RunConfig cfg = load(gen_common);
            if (!gen_circuit.empty()) cfg.circuit = parse_circuit(gen_circuit);
            if (gen_n) cfg.n_real = gen_n;
            if (gen->count("--seed")) cfg.seeds.data = gen_seed;
            cfg.validate();
            const auto data = generate_dataset(cfg.circuit, cfg.n_real, cfg.seeds.data, cfg.nominals);
            fs::create_directories(cfg.out_dir);
            save_csv(data, cfg.out_dir / "data.csv");
            update_manifest(cfg.out_dir, "gen-data", run_entry(cfg, {{"circuit", std::string(circuit_name(cfg.circuit))},
                                                                      {"n", cfg.n_real},
                                                                      {"seed", cfg.seeds.data}}));
            log("wrote " + (cfg.out_dir / "data.csv").string());
        } else if (train->parsed()) {
            RunConfig cfg = load(train_common);
            if (train_layers) cfg.denoiser.hidden_widths = diffusion::widths_for_layers(train_layers);
            if (train->count("--lr")) cfg.denoiser.lr = train_lr;
            if (train_epochs) cfg.denoiser.max_epochs = train_epochs;
            const Dataset data = load_csv(train_data);
            cfg.circuit = data.schema().circuit();
            cfg.n_real = data.rows();
            cfg.validate();
            const auto model = train_model(data, cfg);
            fs::create_directories(cfg.out_dir);
            save_model(model, cfg.out_dir / "model.json");
            json losses = json::array();
            for (std::size_t i = 0; i < model.history.train_loss.size(); ++i) {
                losses.push_back({{"epoch", i}, {"train", model.history.train_loss[i]},
                                  {"validation", model.history.validation_loss[i]}});
            }
            write_json(cfg.out_dir / "training_history.json", losses);
            update_manifest(cfg.out_dir, "train", run_entry(cfg, {{"data", train_data}}));
            log("wrote " + (cfg.out_dir / "model.json").string());
        } else if (sample->parsed()) {
            RunConfig cfg = load(sample_common);
            if (sample_n) cfg.n_synthetic = sample_n;
            if (sample->count("--seed")) cfg.seeds.sample = sample_seed;
            if (!sample_sampler.empty()) cfg.sampler = diffusion::parse_sampler(sample_sampler);
            auto model = load_model(sample_model);
            cfg.circuit = model.circuit;
            cfg.validate();
            const auto data = diffusion::sample(model, cfg.n_synthetic, cfg.seeds.sample, cfg.sampler);
            fs::create_directories(cfg.out_dir);
            save_csv(data, cfg.out_dir / "synthetic.csv");
            update_manifest(cfg.out_dir, "sample", run_entry(cfg, {{"model", sample_model}}));
            log("wrote " + (cfg.out_dir / "synthetic.csv").string());
        } else if (evalc->parsed()) {
            RunConfig cfg = load(eval_common);
            if (!eval_sampler.empty()) cfg.sampler = diffusion::parse_sampler(eval_sampler);
            if (eval_model.empty() && eval_generated.empty()) {
                throw Error(ErrorKind::InvalidConfig, "eval needs --model or --generated");
            }
            cfg.validate();
            Dataset generated{DatasetSchema(cfg.circuit)};
            Dataset reference{DatasetSchema(cfg.circuit)};
            eval::EvalReport report;
            if (!eval_model.empty()) {
                auto model = load_model(eval_model);
                generated = diffusion::sample(model, cfg.n_synthetic, cfg.seeds.sample, cfg.sampler);
                report = score(model, generated, cfg, &reference);
            } else {
                generated = load_csv(eval_generated);
                cfg.circuit = generated.schema().circuit();
                reference = generate_dataset(generated.schema().circuit(), generated.rows(), cfg.seeds.reference,
                                             cfg.nominals);
                report = eval::evaluate_dataset(generated, reference, topology_for(generated.schema().circuit()),
                                                cfg.nominals);
                report.reference_seed = cfg.seeds.reference;
            }
            fs::create_directories(cfg.out_dir);
            write_json(cfg.out_dir / "eval.json", to_json(report));
            eval::export_histograms(reference, generated, cfg.histogram_bins, cfg.out_dir / "histograms.csv");
            if (!eval_model.empty()) save_csv(generated, cfg.out_dir / "generated.csv");
            update_manifest(cfg.out_dir, "eval",
                            run_entry(cfg, {{"model", eval_model}, {"generated", eval_generated}}));
            std::cout << circuit_name(report.circuit) << " mean output MAPE " << fmt(report.mean_output_mape())
                      << "%\n";
            for (const auto& m : report.output_mape) std::cout << "  " << m.name << " " << fmt(m.value) << "%\n";
        } else if (bench->parsed()) {
            RunConfig cfg = load(bench_common);
            if (!bench_sampler.empty()) cfg.sampler = diffusion::parse_sampler(bench_sampler);
            Dataset real = bench_data.empty()
                               ? Dataset(DatasetSchema(cfg.circuit))
                               : load_csv(bench_data);
            if (!bench_data.empty()) {
                cfg.circuit = real.schema().circuit();
                cfg.n_real = real.rows();
            }
            cfg.validate();
            if (bench_data.empty()) real = generate_dataset(cfg.circuit, cfg.n_real, cfg.seeds.data, cfg.nominals);
            auto [real_train, real_test] = gbr::train_test_split(real, cfg.test_fraction, cfg.seeds.split);
            Dataset synthetic{real.schema()};
            if (!bench_synthetic.empty()) {
                synthetic = load_csv(bench_synthetic);
            } else {
                auto model = train_model(real_train, cfg);
                synthetic = diffusion::sample(model, cfg.n_synthetic, cfg.seeds.sample, cfg.sampler);
            }
            const auto& schema = real.schema();
            std::vector<std::string> targets;
            for (std::size_t c = schema.input_count(); c < schema.feature_count(); ++c) {
                targets.push_back(schema.features()[c].name);
            }
            const auto report = gbr::run_benchmark(real_train, synthetic, real_test, targets, cfg.gbr, cfg.seeds.gbr);
            fs::create_directories(cfg.out_dir);
            write_json(cfg.out_dir / "bench.json", to_json(report));
            write_text(cfg.out_dir / "bench.csv", bench_table_csv(report));
            if (bench_synthetic.empty()) save_csv(synthetic, cfg.out_dir / "synthetic.csv");
            update_manifest(cfg.out_dir, "bench",
                            run_entry(cfg, {{"data", bench_data}, {"synthetic", bench_synthetic}}));
            std::cout << bench_table_csv(report);
        } else if (sweep->parsed()) {
            RunConfig cfg = load(sweep_common);
            if (!sweep_sampler.empty()) cfg.sampler = diffusion::parse_sampler(sweep_sampler);
            const auto circuits = sweep_circuit.empty() ? std::vector<Circuit>{cfg.circuit} : circuits_from(sweep_circuit);
            std::string param;
            std::vector<std::string> values{""};
            if (!sweep_grid.empty()) {
                const auto eq = sweep_grid.find('=');
                if (eq == std::string::npos) throw Error(ErrorKind::InvalidConfig, "--grid must look like name=v1,v2");
                param = sweep_grid.substr(0, eq);
                values = split_list(sweep_grid.substr(eq + 1));
                if (param != "layers" && param != "lr") {
                    throw Error(ErrorKind::InvalidConfig, "--grid supports layers or lr, not '" + param + "'");
                }
                if (values.empty()) throw Error(ErrorKind::InvalidConfig, "--grid lists no values");
            }
            // Build and validate every run configuration before any training starts.
            struct Run {
                RunConfig cfg;
                std::string value;
            };
            std::vector<Run> runs;
            for (Circuit c : circuits) {
                for (const auto& v : values) {
                    RunConfig rc = cfg;
                    rc.circuit = c;
                    try {
                        if (param == "layers") rc.denoiser.hidden_widths = diffusion::widths_for_layers(std::stoul(v));
                        if (param == "lr") rc.denoiser.lr = std::stod(v);
                    } catch (const std::logic_error&) {
                        throw Error(ErrorKind::InvalidConfig, "bad grid value '" + v + "'");
                    }
                    rc.validate();
                    runs.push_back({rc, v});
                }
            }
            std::ostringstream table;
            table << "circuit,param,value,hidden_layers,lr,epochs,mean_mape";
            for (int k = 0; k < 6; ++k) table << ",mape_" << "ABCDEF"[k];
            table << ",ks_max,ks_count_le_0.15,features\n";
            std::vector<eval::EvalReport> reports;
            for (const auto& run : runs) {
                const auto real = generate_dataset(run.cfg.circuit, run.cfg.n_real, run.cfg.seeds.data, run.cfg.nominals);
                auto model = train_model(real, run.cfg);
                const auto generated = diffusion::sample(model, run.cfg.n_synthetic, run.cfg.seeds.sample, run.cfg.sampler);
                auto report = score(model, generated, run.cfg);
                double ks_max = 0.0;
                std::size_t ks_ok = 0;
                for (const auto& k : report.ks) {
                    ks_max = std::max(ks_max, k.value);
                    ks_ok += k.value <= 0.15 ? 1 : 0;
                }
                table << circuit_name(run.cfg.circuit) << ',' << param << ',' << run.value << ','
                      << report.hidden_layers << ',' << format_double(report.lr) << ',' << report.epochs << ','
                      << format_double(report.mean_output_mape());
                for (std::size_t k = 0; k < 6; ++k) {
                    table << ',';
                    if (k < report.output_mape.size()) table << format_double(report.output_mape[k].value);
                }
                table << ',' << format_double(ks_max) << ',' << ks_ok << ',' << report.ks.size() << '\n';
                log(std::string(circuit_name(run.cfg.circuit)) + (param.empty() ? "" : " " + param + "=" + run.value) +
                    ": mean MAPE " + fmt(report.mean_output_mape()) + "%");
                reports.push_back(std::move(report));
            }
            fs::create_directories(cfg.out_dir);
            write_text(cfg.out_dir / "sweep.csv", table.str());
            if (param.empty()) write_text(cfg.out_dir / "mape_table.csv", mape_table_csv(reports));
            update_manifest(cfg.out_dir, "sweep",
                            run_entry(cfg, {{"grid", sweep_grid}, {"circuit", sweep_circuit}}));
            std::cout << table.str();
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_numerical(e.kind()) ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
