#include "circuitdiff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "circuitdiff/error.hpp"

namespace circuitdiff::eval {

double mape(std::span<const double> reference, std::span<const double> generated) {
    if (reference.size() != generated.size() || reference.empty()) {
        throw Error(ErrorKind::LengthMismatch, "MAPE needs two equal-length, nonempty vectors");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (reference[i] == 0.0) throw Error(ErrorKind::ZeroReference, "reference value is zero");
        sum += std::abs(generated[i] - reference[i]) / std::abs(reference[i]);
    }
    return 100.0 * sum / static_cast<double>(reference.size());
}

double ks_statistic(std::span<const double> sample_a, std::span<const double> sample_b) {
    if (sample_a.empty() || sample_b.empty()) throw Error(ErrorKind::EmptySample, "KS needs two nonempty samples");
    std::vector<double> a(sample_a.begin(), sample_a.end());
    std::vector<double> b(sample_b.begin(), sample_b.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double EvalReport::mean_output_mape() const {
    if (output_mape.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (const auto& m : output_mape) s += m.value;
    return s / static_cast<double>(output_mape.size());
}

EvalReport evaluate_dataset(const Dataset& generated, const Dataset& reference, const GateTopology& topology,
                            const ProcessNominals& nominals) {
    const auto& schema = generated.schema();
    if (!(reference.schema() == schema) || topology.circuit != schema.circuit() ||
        topology.nodes.size() != schema.node_count()) {
        throw Error(ErrorKind::SchemaMismatch, "generated data, reference data and topology describe different circuits");
    }
    EvalReport report;
    report.circuit = schema.circuit();
    report.rows = generated.rows();

    const std::size_t n_in = schema.input_count();
    const std::size_t n_out = schema.output_count();
    std::vector<std::vector<double>> oracle(n_out);
    std::vector<std::vector<double>> stored(n_out);
    for (std::size_t r = 0; r < generated.rows(); ++r) {
        const auto row = generated.row(r);
        const auto pvt = PvtSample::from_span(row.first(n_in));
        if (!pvt.in_range(nominals)) ++report.out_of_range_rows;
        const auto outputs = row.subspan(n_in);
        if (std::any_of(outputs.begin(), outputs.end(), [](double v) { return v <= 0.0; })) {
            ++report.nonphysical_rows;
        }
        std::vector<double> delays;
        try {
            delays = delay_oracle(topology, pvt, nominals);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NonconductingDevice) throw;
            ++report.unscorable_rows;
            continue;
        }
        if (std::any_of(delays.begin(), delays.end(), [](double v) { return !std::isfinite(v) || v <= 0.0; })) {
            ++report.unscorable_rows;
            continue;
        }
        for (std::size_t k = 0; k < n_out; ++k) {
            oracle[k].push_back(delays[k]);
            stored[k].push_back(outputs[k]);
        }
    }

    for (std::size_t k = 0; k < n_out; ++k) {
        const double value =
            oracle[k].empty() ? std::numeric_limits<double>::quiet_NaN() : mape(oracle[k], stored[k]);
        report.output_mape.push_back({schema.features()[n_in + k].name, value});
    }
    for (std::size_t c = 0; c < schema.feature_count(); ++c) {
        double value = std::numeric_limits<double>::quiet_NaN();
        if (generated.rows() > 0 && reference.rows() > 0) {
            value = ks_statistic(generated.column(c), reference.column(c));
        }
        report.ks.push_back({schema.features()[c].name, value});
    }
    return report;
}

EvalReport evaluate(diffusion::DiffusionModel& model, const GateTopology& topology, const EvalOptions& options) {
    if (!model.trained) throw Error(ErrorKind::UntrainedModel, "model has not been trained");
    if (topology.circuit != model.circuit) {
        throw Error(ErrorKind::SchemaMismatch, "topology and model describe different circuits");
    }
    const Dataset generated = diffusion::sample(model, options.n, options.sample_seed, options.sampler);
    const Dataset reference = generate_dataset(model.circuit, options.n, options.reference_seed, options.nominals);
    auto report = evaluate_dataset(generated, reference, topology, options.nominals);
    report.sample_seed = options.sample_seed;
    report.reference_seed = options.reference_seed;
    report.sampler = std::string(diffusion::sampler_name(options.sampler));
    report.lr = model.denoiser_config.lr;
    report.epochs = model.history.epochs_run;
    report.hidden_layers = model.hidden_layers();
    return report;
}

std::vector<HistogramRow> histograms(const Dataset& real, const Dataset& generated, std::size_t bins) {
    if (!(real.schema() == generated.schema())) {
        throw Error(ErrorKind::SchemaMismatch, "histograms need two datasets of the same circuit");
    }
    if (bins < 2) throw Error(ErrorKind::InvalidConfig, "need at least two bins");
    std::vector<HistogramRow> out;
    const auto& features = real.schema().features();
    for (std::size_t c = 0; c < real.cols(); ++c) {
        const auto a = real.column(c);
        const auto b = generated.column(c);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
        for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
        if (!(lo < hi)) {
            const double pad = std::isfinite(lo) ? std::max(std::abs(lo) * 1e-9, 0.5) : 0.5;
            lo = std::isfinite(lo) ? lo - pad : 0.0;
            hi = std::isfinite(hi) ? hi + pad : 1.0;
        }
        const double width = (hi - lo) / static_cast<double>(bins);
        auto bin_of = [&](double v) {
            const auto k = static_cast<std::size_t>(std::max(0.0, std::floor((v - lo) / width)));
            return std::min(k, bins - 1);
        };
        std::vector<std::size_t> ca(bins, 0);
        std::vector<std::size_t> cb(bins, 0);
        for (double v : a) ++ca[bin_of(v)];
        for (double v : b) ++cb[bin_of(v)];
        for (std::size_t k = 0; k < bins; ++k) {
            const double upper = k + 1 == bins ? hi : lo + width * static_cast<double>(k + 1);
            out.push_back({features[c].name, k, lo + width * static_cast<double>(k), upper, ca[k], cb[k]});
        }
    }
    return out;
}

void export_histograms(const Dataset& real, const Dataset& generated, std::size_t bins,
                       const std::filesystem::path& path) {
    const auto rows = histograms(real, generated, bins);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out << "feature,bin,lower,upper,real_count,generated_count\n";
    for (const auto& r : rows) {
        out << r.feature << ',' << r.bin << ',' << format_double(r.lower) << ',' << format_double(r.upper) << ','
            << r.real_count << ',' << r.generated_count << '\n';
    }
    if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

}  // namespace circuitdiff::eval
