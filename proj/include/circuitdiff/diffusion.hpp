#pragma once

// Denoising diffusion over standardized circuit rows: variance schedule,
// forward noising, noise-predictor training and reverse-chain sampling.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "circuitdiff/nn.hpp"
#include "circuitdiff/schema.hpp"

namespace circuitdiff::diffusion {

/// beta/alpha/alpha_bar for steps 1..T (accessors are 1-indexed).
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    explicit NoiseSchedule(std::vector<double> betas);

    int steps() const noexcept { return static_cast<int>(beta_.size()); }
    double beta(int t) const { return beta_.at(static_cast<std::size_t>(t - 1)); }
    double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t - 1)); }
    double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t - 1)); }
    std::span<const double> betas() const noexcept { return beta_; }

private:
    std::vector<double> beta_;
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
};

/// beta_t = beta_start + (t-1) (beta_end - beta_start) / (T-1).
NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end);

/// x_t = sqrt(1 - beta) x_{t-1} + sqrt(beta) eps
double forward_step(double x_prev, double beta, double eps) noexcept;
void forward_step(std::span<const double> x_prev, double beta, std::span<const double> eps, std::span<double> out);

/// Closed form of t composed forward steps: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
double forward_jump(double x0, int t, const NoiseSchedule& schedule, double eps);
void forward_jump(std::span<const double> x0, int t, const NoiseSchedule& schedule, std::span<const double> eps,
                  std::span<double> out);

/// Removes one step of predicted noise: (x_t - sqrt(beta) eps_hat) / sqrt(1 - beta).
double invert_step(double x_t, double beta, double eps_hat) noexcept;

enum class Sampler {
    /// Deterministic inversion of each forward step with the predicted noise.
    Paper,
    /// The same mean plus posterior noise sqrt(beta_tilde_t) z for t > 1.
    Ancestral,
};

std::string_view sampler_name(Sampler s) noexcept;
Sampler parse_sampler(std::string_view name);

/// What the network is fit to.
enum class NoiseTarget {
    /// The raw noise of the last forward step.
    Step,
    /// E[step noise | x0, x_t] = sqrt(beta_t / (1 - abar_t)) * cumulative noise.
    /// The network regresses the cumulative noise and predict_noise() rescales
    /// it, so the reverse update still receives a per-step noise estimate. Same
    /// minimizer as Step with far lower target variance.
    PosteriorStep,
};

std::string_view noise_target_name(NoiseTarget t) noexcept;
NoiseTarget parse_noise_target(std::string_view name);

/// How the step index reaches the network.
enum class TimeEncoding {
    /// One extra input channel holding t / T.
    Scalar,
    /// kSinusoidalWidth channels of sin/cos(t * 1000^(-k/(width/2))).
    Sinusoidal,
};

inline constexpr std::size_t kSinusoidalWidth = 16;

std::string_view time_encoding_name(TimeEncoding e) noexcept;
TimeEncoding parse_time_encoding(std::string_view name);
std::size_t time_width(TimeEncoding e) noexcept;
void time_features(int t, int steps, TimeEncoding e, std::span<double> out);

struct ScheduleConfig {
    int steps = 1000;
    double beta_start = 0.001;
    double beta_end = 0.02;
};

struct DenoiserConfig {
    /// Empty selects the default for the feature count (5 hidden layers up to
    /// 19 features, 6 beyond).
    std::vector<std::size_t> hidden_widths;
    double slope = 0.2;
    double lr = 5e-4;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 3000;
    std::size_t patience = 300;
    double validation_fraction = 0.1;
    std::uint64_t seed = 1;
    NoiseTarget target = NoiseTarget::PosteriorStep;
    TimeEncoding time_encoding = TimeEncoding::Scalar;
    /// Adds the exact noise predictor for standard-normal data (a fixed
    /// multiple of x_t) to the network output, so the network fits only the
    /// departure from that baseline.
    bool gaussian_skip = true;

    void validate() const;
};

/// Symmetric encoder-decoder widths for 4, 5 or 6 hidden layers.
std::vector<std::size_t> widths_for_layers(std::size_t hidden_layers);
std::size_t default_hidden_layers(std::size_t feature_count) noexcept;

struct TrainingHistory {
    std::vector<double> train_loss;       // mean batch loss per epoch
    std::vector<double> validation_loss;  // per epoch
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double best_validation_loss = 0.0;
    bool stopped_early = false;
};

struct DiffusionModel {
    Circuit circuit = Circuit::Not;
    ScheduleConfig schedule_config;
    NoiseSchedule schedule;
    DenoiserConfig denoiser_config;
    nn::Network network;  // input: features + time channels; output: features
    NormStats norm;
    TrainingHistory history;
    bool trained = false;

    std::size_t feature_count() const { return norm.mean.size(); }
    std::size_t hidden_layers() const;
};

/// Fits the noise predictor on `real` (raw units). Throws TooFewRows when the
/// training split is smaller than one batch and NonFiniteLoss on divergence.
DiffusionModel train(const Dataset& real, const ScheduleConfig& schedule, const DenoiserConfig& config);

/// Predicted per-step noise for standardized rows `x_t` at step t.
nn::Matrix predict_noise(DiffusionModel& model, const nn::Matrix& x_t, int t);

/// One reverse update with the learned noise predictor.
nn::Matrix reverse_step(DiffusionModel& model, const nn::Matrix& x_t, int t);

/// n rows in raw units, starting from standard-normal noise at step T.
Dataset sample(DiffusionModel& model, std::size_t n, std::uint64_t seed, Sampler sampler = Sampler::Paper);

}  // namespace circuitdiff::diffusion
