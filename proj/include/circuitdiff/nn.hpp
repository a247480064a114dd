#pragma once

// Dense-network machinery for the denoiser: dense, batch-norm and LeakyReLU
// layers with exact reverse-mode gradients, MSE loss and Adam.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace circuitdiff::nn {

/// Row-major batch matrix: rows are samples, cols are features.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    bool all_finite() const noexcept;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class Mode { Train, Infer };

/// y = x for x >= 0, slope * x otherwise.
double leaky_relu(double x, double slope) noexcept;
/// dy/dx, taking 1 at x = 0.
double leaky_relu_grad(double x, double slope) noexcept;

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // out x in
    std::vector<double> biases;   // out
    std::vector<double> grad_weights;
    std::vector<double> grad_biases;

    DenseLayer() = default;
    DenseLayer(std::size_t in_width, std::size_t out_width);

    Matrix forward(const Matrix& x, Mode mode);
    Matrix backward(const Matrix& grad_out);
    void clear_cache() noexcept { cached_input_ = {}; has_cache_ = false; }

private:
    Matrix cached_input_;
    bool has_cache_ = false;
};

struct BatchNormLayer {
    static constexpr double kMomentum = 0.9;
    static constexpr double kEpsilon = 1e-5;

    std::size_t width = 0;
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    std::vector<double> grad_gamma;
    std::vector<double> grad_beta;
    bool stats_populated = false;

    BatchNormLayer() = default;
    explicit BatchNormLayer(std::size_t units);

    Matrix forward(const Matrix& x, Mode mode);
    Matrix backward(const Matrix& grad_out);
    /// Normalized values before scale and shift from the last train-mode pass.
    const Matrix& last_normalized() const noexcept { return x_hat_; }
    void clear_cache() noexcept { x_hat_ = {}; inv_std_.clear(); has_cache_ = false; }

private:
    Matrix x_hat_;
    std::vector<double> inv_std_;
    bool has_cache_ = false;
};

struct LeakyReluLayer {
    double slope = 0.2;

    LeakyReluLayer() = default;
    explicit LeakyReluLayer(double s) : slope(s) {}

    Matrix forward(const Matrix& x, Mode mode);
    Matrix backward(const Matrix& grad_out);
    void clear_cache() noexcept { cached_input_ = {}; has_cache_ = false; }

private:
    Matrix cached_input_;
    bool has_cache_ = false;
};

using Layer = std::variant<DenseLayer, BatchNormLayer, LeakyReluLayer>;

/// A trainable parameter array and its gradient buffer.
struct ParamView {
    std::string name;
    std::span<double> value;
    std::span<double> grad;
};

class Network {
public:
    Network() = default;
    explicit Network(std::vector<Layer> layers);

    /// Train mode needs at least two rows (batch statistics) and caches the
    /// intermediates backward() uses; infer mode drops any cache.
    Matrix forward(const Matrix& x, Mode mode);
    /// Overwrites every parameter gradient with d(loss)/d(param) given
    /// d(loss)/d(output); returns d(loss)/d(input).
    Matrix backward(const Matrix& grad_out);

    std::vector<ParamView> parameters();
    std::size_t parameter_count() const;

    std::size_t input_width() const;
    std::size_t output_width() const;
    std::vector<Layer>& layers() noexcept { return layers_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

private:
    std::vector<Layer> layers_;
    bool has_cache_ = false;
};

/// Encoder-decoder stack: for each hidden width a Dense -> BatchNorm ->
/// LeakyReLU block, then a linear Dense output layer. Weights are drawn
/// uniformly from +/-sqrt(6 / (fan_in + fan_out)), biases start at zero.
Network make_encoder_decoder(std::size_t input_width, std::size_t output_width,
                             std::span<const std::size_t> hidden_widths, double slope, std::uint64_t seed);

struct Loss {
    double value;
    Matrix grad;
};

/// Mean of squared errors over every element, and its gradient.
Loss mse_loss(const Matrix& prediction, const Matrix& target);

struct AdamState {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update over every parameter group. Moment buffers
/// are sized on the first call; later calls must present the same shapes.
void adam_step(AdamState& state, std::span<const ParamView> params);
/// Single-group convenience form.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace circuitdiff::nn
