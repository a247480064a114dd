#include "circuitdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "circuitdiff/error.hpp"
#include "circuitdiff/kernels.hpp"
#include "circuitdiff/simulator.hpp"

namespace circuitdiff::diffusion {

namespace {

// Replicated noise draws per validation row; fixed for the whole run so the
// validation loss is comparable across epochs.
constexpr std::size_t kValidationReplicates = 32;

struct TrainingPair {
    std::size_t row;
    int t;
    std::vector<double> eps_prior;  // noise for the jump to t-1
    std::vector<double> eps;        // noise of the final forward step (the target)
};

TrainingPair draw_pair(std::size_t row, std::size_t features, int steps, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> step(1, steps);
    std::normal_distribution<double> normal(0.0, 1.0);
    TrainingPair p{row, step(rng), std::vector<double>(features), std::vector<double>(features)};
    for (auto& e : p.eps_prior) e = normal(rng);
    for (auto& e : p.eps) e = normal(rng);
    return p;
}

// Writes the network input [x_t, time features] for one pair into `input_row`.
void build_input(const Dataset& data, const TrainingPair& p, const NoiseSchedule& schedule, TimeEncoding enc,
                 std::span<double> input_row) {
    const std::size_t f = data.cols();
    const auto x0 = data.row(p.row);
    std::vector<double> x_prev(x0.begin(), x0.end());
    if (p.t > 1) forward_jump(x0, p.t - 1, schedule, p.eps_prior, x_prev);
    forward_step(x_prev, schedule.beta(p.t), p.eps, input_row.first(f));
    time_features(p.t, schedule.steps(), enc, input_row.subspan(f));
}

// Multiple of x_t that predicts the target exactly when x0 ~ N(0, I).
double baseline_scale(const NoiseSchedule& schedule, int t, NoiseTarget target) {
    return target == NoiseTarget::Step ? std::sqrt(schedule.beta(t)) : std::sqrt(1.0 - schedule.alpha_bar(t));
}

// Cumulative noise of x_t relative to x0:
// (sqrt(alpha_t (1 - abar_{t-1})) eps_prior + sqrt(beta_t) eps) / sqrt(1 - abar_t)
void cumulative_noise(const TrainingPair& p, const NoiseSchedule& schedule, std::span<double> out) {
    const double abar_prev = p.t > 1 ? schedule.alpha_bar(p.t - 1) : 1.0;
    const double scale = 1.0 / std::sqrt(1.0 - schedule.alpha_bar(p.t));
    const double a = std::sqrt(schedule.alpha(p.t) * (1.0 - abar_prev)) * scale;
    const double b = std::sqrt(schedule.beta(p.t)) * scale;
    kernels::active().axpby(a, p.eps_prior.data(), b, p.eps.data(), out.data(), out.size());
}

void assemble(const Dataset& data, std::span<const TrainingPair> pairs, const NoiseSchedule& schedule,
              const DenoiserConfig& config, nn::Matrix& input, nn::Matrix& target) {
    const std::size_t f = data.cols();
    input = nn::Matrix(pairs.size(), f + time_width(config.time_encoding));
    target = nn::Matrix(pairs.size(), f);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto in = input.row(i);
        auto out = target.row(i);
        build_input(data, pairs[i], schedule, config.time_encoding, in);
        if (config.target == NoiseTarget::Step) {
            std::copy(pairs[i].eps.begin(), pairs[i].eps.end(), out.begin());
        } else {
            cumulative_noise(pairs[i], schedule, out);
        }
        if (config.gaussian_skip) {
            kernels::active().axpy(-baseline_scale(schedule, pairs[i].t, config.target), in.data(), out.data(), f);
        }
    }
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
    alpha_.resize(beta_.size());
    alpha_bar_.resize(beta_.size());
    double cumulative = 1.0;
    for (std::size_t i = 0; i < beta_.size(); ++i) {
        alpha_[i] = 1.0 - beta_[i];
        cumulative *= alpha_[i];
        alpha_bar_[i] = cumulative;
    }
}

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 2 || !(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw Error(ErrorKind::InvalidRange, "need T >= 2 and 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(static_cast<std::size_t>(steps));
    const double slope = (beta_end - beta_start) / static_cast<double>(steps - 1);
    for (int t = 1; t <= steps; ++t) betas[static_cast<std::size_t>(t - 1)] = beta_start + (t - 1) * slope;
    betas.back() = beta_end;
    return NoiseSchedule(std::move(betas));
}

double forward_step(double x_prev, double beta, double eps) noexcept {
    return std::sqrt(1.0 - beta) * x_prev + std::sqrt(beta) * eps;
}

void forward_step(std::span<const double> x_prev, double beta, std::span<const double> eps, std::span<double> out) {
    if (x_prev.size() != eps.size() || out.size() != eps.size()) {
        throw Error(ErrorKind::ShapeMismatch, "forward_step operands differ in length");
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward_step(x_prev[i], beta, eps[i]);
}

double forward_jump(double x0, int t, const NoiseSchedule& schedule, double eps) {
    if (t < 1 || t > schedule.steps()) throw Error(ErrorKind::StepOutOfRange, "step outside 1..T");
    const double ab = schedule.alpha_bar(t);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

void forward_jump(std::span<const double> x0, int t, const NoiseSchedule& schedule, std::span<const double> eps,
                  std::span<double> out) {
    if (x0.size() != eps.size() || out.size() != eps.size()) {
        throw Error(ErrorKind::ShapeMismatch, "forward_jump operands differ in length");
    }
    if (t < 1 || t > schedule.steps()) throw Error(ErrorKind::StepOutOfRange, "step outside 1..T");
    const double ab = schedule.alpha_bar(t);
    kernels::active().axpby(std::sqrt(ab), x0.data(), std::sqrt(1.0 - ab), eps.data(), out.data(), out.size());
}

double invert_step(double x_t, double beta, double eps_hat) noexcept {
    return (x_t - std::sqrt(beta) * eps_hat) / std::sqrt(1.0 - beta);
}

std::string_view sampler_name(Sampler s) noexcept { return s == Sampler::Paper ? "paper" : "ancestral"; }

Sampler parse_sampler(std::string_view name) {
    if (name == "paper") return Sampler::Paper;
    if (name == "ancestral") return Sampler::Ancestral;
    throw Error(ErrorKind::InvalidConfig, "sampler must be 'paper' or 'ancestral'");
}

std::string_view noise_target_name(NoiseTarget t) noexcept {
    return t == NoiseTarget::Step ? "step" : "posterior_step";
}

NoiseTarget parse_noise_target(std::string_view name) {
    if (name == "step") return NoiseTarget::Step;
    if (name == "posterior_step") return NoiseTarget::PosteriorStep;
    throw Error(ErrorKind::InvalidConfig, "noise target must be 'step' or 'posterior_step'");
}

std::string_view time_encoding_name(TimeEncoding e) noexcept {
    return e == TimeEncoding::Scalar ? "scalar" : "sinusoidal";
}

TimeEncoding parse_time_encoding(std::string_view name) {
    if (name == "scalar") return TimeEncoding::Scalar;
    if (name == "sinusoidal") return TimeEncoding::Sinusoidal;
    throw Error(ErrorKind::InvalidConfig, "time encoding must be 'scalar' or 'sinusoidal'");
}

std::size_t time_width(TimeEncoding e) noexcept { return e == TimeEncoding::Scalar ? 1 : kSinusoidalWidth; }

void time_features(int t, int steps, TimeEncoding e, std::span<double> out) {
    if (out.size() != time_width(e)) throw Error(ErrorKind::ShapeMismatch, "time feature buffer has the wrong width");
    if (e == TimeEncoding::Scalar) {
        out[0] = static_cast<double>(t) / steps;
        return;
    }
    const std::size_t half = kSinusoidalWidth / 2;
    for (std::size_t k = 0; k < half; ++k) {
        const double freq = std::pow(1000.0, -static_cast<double>(k) / static_cast<double>(half));
        out[k] = std::sin(t * freq);
        out[half + k] = std::cos(t * freq);
    }
}

void DenoiserConfig::validate() const {
    if (!hidden_widths.empty()) {
        const std::size_t n = hidden_widths.size();
        if (n < 4 || n > 6) throw Error(ErrorKind::InvalidConfig, "hidden layer count must be 4, 5 or 6");
        for (std::size_t i = 0; i < n; ++i) {
            if (hidden_widths[i] == 0) throw Error(ErrorKind::InvalidConfig, "hidden widths must be positive");
            if (hidden_widths[i] != hidden_widths[n - 1 - i]) {
                throw Error(ErrorKind::InvalidConfig, "hidden widths must be symmetric (encoder-decoder)");
            }
        }
    }
    if (!(slope > 0.0 && slope < 1.0)) throw Error(ErrorKind::InvalidConfig, "LeakyReLU slope must be in (0,1)");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::InvalidConfig, "learning rate must be positive");
    if (batch_size < 2) throw Error(ErrorKind::InvalidConfig, "batch size must be at least 2");
    if (max_epochs < 1) throw Error(ErrorKind::InvalidConfig, "max_epochs must be at least 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "validation fraction must be in [0,1)");
    }
}

std::vector<std::size_t> widths_for_layers(std::size_t hidden_layers) {
    switch (hidden_layers) {
        case 4: return {64, 32, 32, 64};
        case 5: return {64, 32, 16, 32, 64};
        case 6: return {64, 32, 16, 16, 32, 64};
        default: throw Error(ErrorKind::InvalidConfig, "hidden layer count must be 4, 5 or 6");
    }
}

std::size_t default_hidden_layers(std::size_t feature_count) noexcept { return feature_count <= 19 ? 5 : 6; }

std::size_t DiffusionModel::hidden_layers() const {
    std::size_t n = 0;
    for (const auto& layer : network.layers()) n += std::holds_alternative<nn::BatchNormLayer>(layer) ? 1 : 0;
    return n;
}

DiffusionModel train(const Dataset& real, const ScheduleConfig& schedule_config, const DenoiserConfig& config) {
    config.validate();
    DiffusionModel model;
    model.circuit = real.schema().circuit();
    model.schedule_config = schedule_config;
    model.schedule = linear_schedule(schedule_config.steps, schedule_config.beta_start, schedule_config.beta_end);
    model.denoiser_config = config;
    if (model.denoiser_config.hidden_widths.empty()) {
        model.denoiser_config.hidden_widths = widths_for_layers(default_hidden_layers(real.cols()));
    }

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(real.rows());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * real.rows()));
    const std::size_t n_train = real.rows() - n_val;
    if (n_train < config.batch_size || n_train < 2) {
        throw Error(ErrorKind::TooFewRows, "training split has fewer rows than one batch");
    }
    const std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    const std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

    // Normalization is fit on the training split only.
    model.norm = fit_normalizer(real.subset(train_idx));
    const Dataset train_data = normalize(real.subset(train_idx), model.norm);
    const Dataset val_data = normalize(real.subset(val_idx), model.norm);

    const std::size_t f = real.cols();
    model.network = nn::make_encoder_decoder(f + time_width(config.time_encoding), f, model.denoiser_config.hidden_widths, config.slope,
                                             config.seed ^ 0x9e3779b97f4a7c15ULL);
    nn::AdamState adam;
    adam.lr = config.lr;

    const int steps = model.schedule.steps();
    nn::Matrix val_input;
    nn::Matrix val_target;
    if (n_val > 0) {
        std::mt19937_64 val_rng(config.seed + 0x5bd1e995ULL);
        std::vector<TrainingPair> pairs;
        for (std::size_t rep = 0; rep < kValidationReplicates; ++rep) {
            for (std::size_t r = 0; r < val_data.rows(); ++r) pairs.push_back(draw_pair(r, f, steps, val_rng));
        }
        assemble(val_data, pairs, model.schedule, config, val_input, val_target);
    }

    std::vector<std::size_t> perm(n_train);
    std::iota(perm.begin(), perm.end(), 0);
    nn::Network best = model.network;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    nn::Matrix input;
    nn::Matrix target;
    auto& history = model.history;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n_train; start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, n_train);
            if (end - start < 2) break;  // batch statistics need two rows
            std::vector<TrainingPair> pairs;
            pairs.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) pairs.push_back(draw_pair(perm[i], f, steps, rng));
            assemble(train_data, pairs, model.schedule, config, input, target);

            const auto prediction = model.network.forward(input, nn::Mode::Train);
            const auto loss = nn::mse_loss(prediction, target);
            if (!std::isfinite(loss.value)) {
                throw Error(ErrorKind::NonFiniteLoss,
                            "training diverged at epoch " + std::to_string(epoch) + "; try a lower learning rate");
            }
            model.network.backward(loss.grad);
            const auto params = model.network.parameters();
            nn::adam_step(adam, params);
            epoch_loss += loss.value;
            ++batches;
        }
        history.train_loss.push_back(epoch_loss / static_cast<double>(batches));

        double val_loss = history.train_loss.back();
        if (n_val > 0) {
            val_loss = nn::mse_loss(model.network.forward(val_input, nn::Mode::Infer), val_target).value;
            if (!std::isfinite(val_loss)) {
                throw Error(ErrorKind::NonFiniteLoss, "validation loss is not finite; try a lower learning rate");
            }
        }
        history.validation_loss.push_back(val_loss);
        if (val_loss < best_loss) {
            best_loss = val_loss;
            best_epoch = epoch;
            best = model.network;
        } else if (epoch - best_epoch >= config.patience) {
            history.stopped_early = true;
            break;
        }
    }

    model.network = std::move(best);
    history.epochs_run = history.train_loss.size();
    history.best_epoch = best_epoch;
    history.best_validation_loss = best_loss;
    model.trained = true;
    return model;
}

nn::Matrix predict_noise(DiffusionModel& model, const nn::Matrix& x_t, int t) {
    if (!model.trained) throw Error(ErrorKind::UntrainedModel, "model has not been trained");
    if (t < 1 || t > model.schedule.steps()) throw Error(ErrorKind::StepOutOfRange, "step outside 1..T");
    const std::size_t f = model.feature_count();
    if (x_t.cols() != f) throw Error(ErrorKind::ShapeMismatch, "rows do not match the model's feature count");
    const auto& config = model.denoiser_config;
    const std::size_t tw = time_width(config.time_encoding);
    std::vector<double> time_row(tw);
    time_features(t, model.schedule.steps(), config.time_encoding, time_row);
    nn::Matrix input(x_t.rows(), f + tw);
    for (std::size_t r = 0; r < x_t.rows(); ++r) {
        auto src = x_t.row(r);
        auto dst = input.row(r);
        std::copy(src.begin(), src.end(), dst.begin());
        std::copy(time_row.begin(), time_row.end(), dst.begin() + static_cast<std::ptrdiff_t>(f));
    }
    auto out = model.network.forward(input, nn::Mode::Infer);
    if (config.gaussian_skip) {
        kernels::active().axpy(baseline_scale(model.schedule, t, config.target), x_t.data(), out.data(),
                               out.values().size());
    }
    if (config.target == NoiseTarget::PosteriorStep) {
        const double c = std::sqrt(model.schedule.beta(t) / (1.0 - model.schedule.alpha_bar(t)));
        for (double& v : out.values()) v *= c;
    }
    return out;
}

nn::Matrix reverse_step(DiffusionModel& model, const nn::Matrix& x_t, int t) {
    const auto eps_hat = predict_noise(model, x_t, t);
    const double beta = model.schedule.beta(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
    nn::Matrix out(x_t.rows(), x_t.cols());
    kernels::active().axpby(inv_sqrt_alpha, x_t.data(), -std::sqrt(beta) * inv_sqrt_alpha, eps_hat.data(),
                            out.data(), out.values().size());
    return out;
}

Dataset sample(DiffusionModel& model, std::size_t n, std::uint64_t seed, Sampler sampler) {
    if (!model.trained) throw Error(ErrorKind::UntrainedModel, "model has not been trained");
    const std::size_t f = model.feature_count();
    std::vector<std::mt19937_64> streams;
    streams.reserve(n);
    for (std::size_t r = 0; r < n; ++r) streams.push_back(row_stream(seed, r));
    // One distribution per row: normal_distribution caches a second variate,
    // which must stay inside its own stream.
    std::vector<std::normal_distribution<double>> normal(n);

    nn::Matrix x(n, f);
    for (std::size_t r = 0; r < n; ++r) {
        for (double& v : x.row(r)) v = normal[r](streams[r]);
    }
    const auto& sched = model.schedule;
    for (int t = sched.steps(); t >= 1; --t) {
        x = reverse_step(model, x, t);
        if (sampler == Sampler::Ancestral && t > 1) {
            const double sigma =
                std::sqrt(sched.beta(t) * (1.0 - sched.alpha_bar(t - 1)) / (1.0 - sched.alpha_bar(t)));
            for (std::size_t r = 0; r < n; ++r) {
                for (double& v : x.row(r)) v += sigma * normal[r](streams[r]);
            }
        }
    }
    if (!x.all_finite()) throw Error(ErrorKind::NonFiniteValue, "sampling produced non-finite values");
    Dataset standardized(schema_for(model.circuit), std::vector<double>(x.values().begin(), x.values().end()));
    return denormalize(standardized, model.norm);
}

}  // namespace circuitdiff::diffusion
