#include "circuitdiff/nn.hpp"

#include <cmath>
#include <random>

#include "circuitdiff/error.hpp"
#include "circuitdiff/kernels.hpp"

namespace circuitdiff::nn {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw Error(ErrorKind::ShapeMismatch, "matrix data size does not match shape");
}

bool Matrix::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double leaky_relu(double x, double slope) noexcept { return x >= 0.0 ? x : slope * x; }

double leaky_relu_grad(double x, double slope) noexcept { return x >= 0.0 ? 1.0 : slope; }

// ---------------------------------------------------------------------------
// Dense

DenseLayer::DenseLayer(std::size_t in_width, std::size_t out_width)
    : in(in_width),
      out(out_width),
      weights(in_width * out_width, 0.0),
      biases(out_width, 0.0),
      grad_weights(in_width * out_width, 0.0),
      grad_biases(out_width, 0.0) {}

Matrix DenseLayer::forward(const Matrix& x, Mode mode) {
    if (x.cols() != in) throw Error(ErrorKind::ShapeMismatch, "dense layer input width mismatch");
    Matrix y(x.rows(), out);
    const auto& k = kernels::active();
    k.gemm_abt(x.data(), weights.data(), y.data(), x.rows(), out, in);
    for (std::size_t r = 0; r < y.rows(); ++r) k.axpy(1.0, biases.data(), y.row(r).data(), out);
    if (mode == Mode::Train) {
        cached_input_ = x;
        has_cache_ = true;
    } else {
        clear_cache();
    }
    return y;
}

Matrix DenseLayer::backward(const Matrix& grad_out) {
    if (!has_cache_) throw Error(ErrorKind::NoCachedForward, "dense backward without a train-mode forward");
    if (grad_out.cols() != out || grad_out.rows() != cached_input_.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "dense layer gradient shape mismatch");
    }
    const auto& k = kernels::active();
    const std::size_t m = grad_out.rows();
    std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
    k.gemm_atb_acc(grad_out.data(), cached_input_.data(), grad_weights.data(), m, out, in);
    std::fill(grad_biases.begin(), grad_biases.end(), 0.0);
    for (std::size_t r = 0; r < m; ++r) k.axpy(1.0, grad_out.row(r).data(), grad_biases.data(), out);
    Matrix grad_in(m, in);
    k.gemm_ab(grad_out.data(), weights.data(), grad_in.data(), m, out, in);
    return grad_in;
}

// ---------------------------------------------------------------------------
// Batch normalization

BatchNormLayer::BatchNormLayer(std::size_t units)
    : width(units),
      gamma(units, 1.0),
      beta(units, 0.0),
      running_mean(units, 0.0),
      running_var(units, 1.0),
      grad_gamma(units, 0.0),
      grad_beta(units, 0.0) {}

Matrix BatchNormLayer::forward(const Matrix& x, Mode mode) {
    if (x.cols() != width) throw Error(ErrorKind::ShapeMismatch, "batch-norm input width mismatch");
    const std::size_t n = x.rows();
    Matrix y(n, width);
    if (mode == Mode::Infer) {
        clear_cache();
        for (std::size_t j = 0; j < width; ++j) {
            const double inv = 1.0 / std::sqrt(running_var[j] + kEpsilon);
            for (std::size_t r = 0; r < n; ++r) y(r, j) = gamma[j] * ((x(r, j) - running_mean[j]) * inv) + beta[j];
        }
        return y;
    }

    if (n < 2) throw Error(ErrorKind::BatchTooSmall, "batch normalization needs at least two rows in train mode");
    x_hat_ = Matrix(n, width);
    inv_std_.assign(width, 0.0);
    const double dn = static_cast<double>(n);
    for (std::size_t j = 0; j < width; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += x(r, j);
        mean /= dn;
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double d = x(r, j) - mean;
            var += d * d;
        }
        var /= dn;
        const double inv = 1.0 / std::sqrt(var + kEpsilon);
        inv_std_[j] = inv;
        for (std::size_t r = 0; r < n; ++r) {
            const double xh = (x(r, j) - mean) * inv;
            x_hat_(r, j) = xh;
            y(r, j) = gamma[j] * xh + beta[j];
        }
        running_mean[j] = kMomentum * running_mean[j] + (1.0 - kMomentum) * mean;
        running_var[j] = kMomentum * running_var[j] + (1.0 - kMomentum) * var;
    }
    stats_populated = true;
    has_cache_ = true;
    return y;
}

Matrix BatchNormLayer::backward(const Matrix& grad_out) {
    if (!has_cache_) throw Error(ErrorKind::NoCachedForward, "batch-norm backward without a train-mode forward");
    if (grad_out.cols() != width || grad_out.rows() != x_hat_.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "batch-norm gradient shape mismatch");
    }
    const std::size_t n = grad_out.rows();
    const double dn = static_cast<double>(n);
    Matrix grad_in(n, width);
    for (std::size_t j = 0; j < width; ++j) {
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            sum_dy += grad_out(r, j);
            sum_dy_xhat += grad_out(r, j) * x_hat_(r, j);
        }
        grad_beta[j] = sum_dy;
        grad_gamma[j] = sum_dy_xhat;
        // dx = gamma * inv_std / n * (n*dy - sum(dy) - x_hat * sum(dy * x_hat))
        const double scale = gamma[j] * inv_std_[j] / dn;
        for (std::size_t r = 0; r < n; ++r) {
            grad_in(r, j) = scale * (dn * grad_out(r, j) - sum_dy - x_hat_(r, j) * sum_dy_xhat);
        }
    }
    return grad_in;
}

// ---------------------------------------------------------------------------
// LeakyReLU

Matrix LeakyReluLayer::forward(const Matrix& x, Mode mode) {
    Matrix y(x.rows(), x.cols());
    auto in = x.values();
    auto out = y.values();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = leaky_relu(in[i], slope);
    if (mode == Mode::Train) {
        cached_input_ = x;
        has_cache_ = true;
    } else {
        clear_cache();
    }
    return y;
}

Matrix LeakyReluLayer::backward(const Matrix& grad_out) {
    if (!has_cache_) throw Error(ErrorKind::NoCachedForward, "activation backward without a train-mode forward");
    if (grad_out.rows() != cached_input_.rows() || grad_out.cols() != cached_input_.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "activation gradient shape mismatch");
    }
    Matrix grad_in(grad_out.rows(), grad_out.cols());
    auto x = cached_input_.values();
    auto g = grad_out.values();
    auto out = grad_in.values();
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * leaky_relu_grad(x[i], slope);
    return grad_in;
}

// ---------------------------------------------------------------------------
// Network

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {}

Matrix Network::forward(const Matrix& x, Mode mode) {
    if (x.cols() != input_width()) throw Error(ErrorKind::ShapeMismatch, "network input width mismatch");
    if (mode == Mode::Train && x.rows() < 2) {
        throw Error(ErrorKind::BatchTooSmall, "train-mode forward needs at least two rows");
    }
    Matrix h = x;
    for (auto& layer : layers_) {
        h = std::visit([&](auto& l) { return l.forward(h, mode); }, layer);
    }
    has_cache_ = mode == Mode::Train;
    return h;
}

Matrix Network::backward(const Matrix& grad_out) {
    if (!has_cache_) throw Error(ErrorKind::NoCachedForward, "backward called without a train-mode forward");
    Matrix g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        g = std::visit([&](auto& l) { return l.backward(g); }, *it);
    }
    return g;
}

std::vector<ParamView> Network::parameters() {
    std::vector<ParamView> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i) + ".";
        if (auto* d = std::get_if<DenseLayer>(&layers_[i])) {
            out.push_back({prefix + "weights", d->weights, d->grad_weights});
            out.push_back({prefix + "biases", d->biases, d->grad_biases});
        } else if (auto* b = std::get_if<BatchNormLayer>(&layers_[i])) {
            out.push_back({prefix + "gamma", b->gamma, b->grad_gamma});
            out.push_back({prefix + "beta", b->beta, b->grad_beta});
        }
    }
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) n += d->weights.size() + d->biases.size();
        if (const auto* b = std::get_if<BatchNormLayer>(&layer)) n += 2 * b->width;
    }
    return n;
}

std::size_t Network::input_width() const {
    for (const auto& layer : layers_) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->in;
        if (const auto* b = std::get_if<BatchNormLayer>(&layer)) return b->width;
    }
    return 0;
}

std::size_t Network::output_width() const {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        if (const auto* d = std::get_if<DenseLayer>(&*it)) return d->out;
        if (const auto* b = std::get_if<BatchNormLayer>(&*it)) return b->width;
    }
    return 0;
}

Network make_encoder_decoder(std::size_t input_width, std::size_t output_width,
                             std::span<const std::size_t> hidden_widths, double slope, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto init = [&](DenseLayer& d) {
        const double limit = std::sqrt(6.0 / static_cast<double>(d.in + d.out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : d.weights) w = dist(rng);
    };
    std::vector<Layer> layers;
    std::size_t prev = input_width;
    for (std::size_t w : hidden_widths) {
        DenseLayer d(prev, w);
        init(d);
        layers.emplace_back(std::move(d));
        layers.emplace_back(BatchNormLayer(w));
        layers.emplace_back(LeakyReluLayer(slope));
        prev = w;
    }
    DenseLayer head(prev, output_width);
    init(head);
    layers.emplace_back(std::move(head));
    return Network(std::move(layers));
}

Loss mse_loss(const Matrix& prediction, const Matrix& target) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "loss operands differ in shape");
    }
    Loss loss{0.0, Matrix(prediction.rows(), prediction.cols())};
    auto p = prediction.values();
    auto t = target.values();
    auto g = loss.grad.values();
    const double n = static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        loss.value += d * d;
        g[i] = 2.0 * d / n;
    }
    loss.value /= n;
    return loss;
}

void adam_step(AdamState& state, std::span<const ParamView> params) {
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.value.size(), 0.0);
            state.second_moment.emplace_back(p.value.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw Error(ErrorKind::ShapeMismatch, "optimizer state has a different number of parameter groups");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].value.size() != params[i].grad.size() ||
            params[i].value.size() != state.first_moment[i].size()) {
            throw Error(ErrorKind::ShapeMismatch, "parameter, gradient and moment shapes differ");
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const kernels::AdamCoefficients c{state.lr, state.beta1, state.beta2, state.eps,
                                      1.0 - std::pow(state.beta1, t), 1.0 - std::pow(state.beta2, t)};
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < params.size(); ++i) {
        k.adam_update(params[i].value.data(), params[i].grad.data(), state.first_moment[i].data(),
                      state.second_moment[i].data(), params[i].value.size(), c);
    }
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    // ParamView carries a mutable grad span; the update only reads it.
    std::span<double> g(const_cast<double*>(grads.data()), grads.size());
    const ParamView view{"params", params, g};
    adam_step(state, std::span<const ParamView>(&view, 1));
}

}  // namespace circuitdiff::nn
