#include "circuitdiff/gbr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "circuitdiff/error.hpp"

namespace circuitdiff::gbr {

namespace {

// A split must reduce squared error by more than this fraction of the node's
// sum of squared targets; rounding noise on constant residuals stays below it.
constexpr double kRelativeGainFloor = 1e-10;

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

Split best_split(const Matrix& x, std::span<const double> target, std::span<const std::size_t> rows,
                 std::size_t min_leaf) {
    const std::size_t n = rows.size();
    double total = 0.0;
    double total_sq = 0.0;
    for (std::size_t r : rows) {
        total += target[r];
        total_sq += target[r] * target[r];
    }
    const double parent = total * total / static_cast<double>(n);
    const double floor = kRelativeGainFloor * std::max(total_sq, std::numeric_limits<double>::min());

    Split best;
    std::vector<std::size_t> sorted(rows.begin(), rows.end());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
        double left = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left += target[sorted[i]];
            const std::size_t n_left = i + 1;
            const std::size_t n_right = n - n_left;
            const double v = x(sorted[i], f);
            const double next = x(sorted[i + 1], f);
            if (n_left < min_leaf) continue;
            if (n_right < min_leaf) break;
            if (!(v < next)) continue;
            const double right = total - left;
            const double gain = left * left / static_cast<double>(n_left) +
                                right * right / static_cast<double>(n_right) - parent;
            if (gain > floor && gain > best.gain) {
                double threshold = v + (next - v) / 2.0;
                if (!(threshold < next)) threshold = v;
                best = {static_cast<int>(f), threshold, gain};
            }
        }
    }
    return best;
}

int grow(const Matrix& x, std::span<const double> target, std::vector<std::size_t> rows, std::size_t depth,
         std::size_t max_depth, std::size_t min_leaf, std::vector<TreeNode>& nodes) {
    const int index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    double sum = 0.0;
    for (std::size_t r : rows) sum += target[r];
    nodes[index].value = sum / static_cast<double>(rows.size());
    if (depth >= max_depth || rows.size() < 2 * min_leaf) return index;

    const Split split = best_split(x, target, rows, min_leaf);
    if (split.feature < 0) return index;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows) {
        (x(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    }
    nodes[index].feature = split.feature;
    nodes[index].threshold = split.threshold;
    const int l = grow(x, target, std::move(left), depth + 1, max_depth, min_leaf, nodes);
    const int r = grow(x, target, std::move(right), depth + 1, max_depth, min_leaf, nodes);
    nodes[index].left = l;
    nodes[index].right = r;
    return index;
}

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

void GbrConfig::validate() const {
    if (max_depth < 1) throw Error(ErrorKind::InvalidConfig, "max_depth must be at least 1");
    if (min_samples_leaf < 1) throw Error(ErrorKind::InvalidConfig, "min_samples_leaf must be at least 1");
    if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw Error(ErrorKind::InvalidConfig, "shrinkage must be in (0,1]");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw Error(ErrorKind::InvalidConfig, "subsample must be in (0,1]");
}

double RegressionTree::predict(std::span<const double> x) const {
    int i = 0;
    while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = nodes_[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)].value;
}

std::size_t RegressionTree::depth() const {
    // Children always follow their parent in `nodes_`.
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (nodes_[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

RegressionTree fit_tree(const Matrix& x, std::span<const double> target, std::span<const std::size_t> rows,
                        std::size_t max_depth, std::size_t min_samples_leaf) {
    if (rows.empty()) throw Error(ErrorKind::TooFewRows, "cannot fit a tree on zero rows");
    std::vector<TreeNode> nodes;
    grow(x, target, std::vector<std::size_t>(rows.begin(), rows.end()), 0, max_depth, min_samples_leaf, nodes);
    return RegressionTree(std::move(nodes));
}

double GbrModel::predict(std::span<const double> x) const { return predict_staged(x, trees.size()); }

double GbrModel::predict_staged(std::span<const double> x, std::size_t n_trees) const {
    double y = init;
    for (std::size_t i = 0; i < std::min(n_trees, trees.size()); ++i) y += shrinkage[i] * trees[i].predict(x);
    return y;
}

std::vector<double> GbrModel::predict(const Matrix& x) const {
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(x.row(r));
    return out;
}

GbrModel fit_gbr(const Matrix& features, std::span<const double> target, const GbrConfig& config,
                 std::uint64_t seed) {
    config.validate();
    const std::size_t n = features.rows();
    if (target.size() != n) throw Error(ErrorKind::LengthMismatch, "feature rows and targets differ in count");
    if (n < 2 * config.min_samples_leaf || n < 2) {
        throw Error(ErrorKind::TooFewRows, "need at least 2 * min_samples_leaf rows");
    }
    GbrModel model;
    model.config = config;
    model.init = mean(target);

    std::vector<double> prediction(n, model.init);
    std::vector<double> residual(n);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(seed);
    const auto per_tree = std::max<std::size_t>(
        2 * config.min_samples_leaf, static_cast<std::size_t>(std::round(config.subsample * static_cast<double>(n))));

    for (std::size_t k = 0; k < config.n_trees; ++k) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = target[i] - prediction[i];
        std::vector<std::size_t> rows = all;
        if (per_tree < n) {
            std::shuffle(rows.begin(), rows.end(), rng);
            rows.resize(per_tree);
            std::sort(rows.begin(), rows.end());
        }
        auto tree = fit_tree(features, residual, rows, config.max_depth, config.min_samples_leaf);
        if (tree.is_leaf()) break;
        for (std::size_t i = 0; i < n; ++i) prediction[i] += config.shrinkage * tree.predict(features.row(i));
        model.trees.push_back(std::move(tree));
        model.shrinkage.push_back(config.shrinkage);
    }
    return model;
}

RegressionMetrics regression_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size() || y_true.empty()) {
        throw Error(ErrorKind::LengthMismatch, "metrics need two equal-length, nonempty vectors");
    }
    const double n = static_cast<double>(y_true.size());
    const double y_mean = mean(y_true);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    double abs_err = 0.0;
    double pct = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double e = y_true[i] - y_pred[i];
        ss_res += e * e;
        ss_tot += (y_true[i] - y_mean) * (y_true[i] - y_mean);
        abs_err += std::abs(e);
        if (y_true[i] == 0.0) throw Error(ErrorKind::ZeroReference, "MAPE undefined for a zero true value");
        pct += std::abs(e) / std::abs(y_true[i]);
    }
    RegressionMetrics m{};
    m.mse = ss_res / n;
    m.rmse = std::sqrt(m.mse);
    m.mae = abs_err / n;
    m.mape = pct / n;
    m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : std::numeric_limits<double>::quiet_NaN();
    return m;
}

RegressionMetrics improvement_percent(const RegressionMetrics& base, const RegressionMetrics& aug) {
    auto lower_better = [](double b, double a) { return 100.0 * (b - a) / b; };
    return {100.0 * (aug.r2 - base.r2) / base.r2, lower_better(base.mse, aug.mse), lower_better(base.rmse, aug.rmse),
            lower_better(base.mae, aug.mae), lower_better(base.mape, aug.mape)};
}

std::pair<Matrix, std::vector<double>> design_matrix(const Dataset& data, std::size_t target_column) {
    const std::size_t n_in = data.schema().input_count();
    Matrix x(data.rows(), n_in);
    std::vector<double> y(data.rows());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const auto row = data.row(r);
        std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n_in), x.row(r).begin());
        y[r] = row[target_column];
    }
    return {std::move(x), std::move(y)};
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "test fraction must be in (0,1)");
    }
    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::round(test_fraction * static_cast<double>(data.rows())));
    std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {data.subset(train), data.subset(test)};
}

BenchReport run_benchmark(const Dataset& real_train, const Dataset& synthetic, const Dataset& real_test,
                          std::span<const std::string> targets, const GbrConfig& config, std::uint64_t seed) {
    const auto& schema = real_train.schema();
    if (!(synthetic.schema() == schema) || !(real_test.schema() == schema)) {
        throw Error(ErrorKind::SchemaMismatch, "benchmark datasets describe different circuits");
    }
    std::set<std::vector<double>> train_rows;
    for (std::size_t r = 0; r < real_train.rows(); ++r) {
        auto row = real_train.row(r);
        train_rows.emplace(row.begin(), row.end());
    }
    for (std::size_t r = 0; r < real_test.rows(); ++r) {
        auto row = real_test.row(r);
        if (train_rows.count(std::vector<double>(row.begin(), row.end()))) {
            throw Error(ErrorKind::LeakageDetected, "test row " + std::to_string(r) + " also appears in training data");
        }
    }

    Dataset augmented = real_train;
    augmented.append(synthetic);

    BenchReport report;
    report.circuit = schema.circuit();
    report.n_train = real_train.rows();
    report.n_synthetic = synthetic.rows();
    report.n_test = real_test.rows();
    report.config = config;
    report.seed = seed;
    for (const auto& name : targets) {
        const std::size_t col = schema.index_of(name);
        if (col >= schema.feature_count() || schema.features()[col].role != FeatureRole::Output) {
            throw Error(ErrorKind::SchemaMismatch, "'" + name + "' is not an output feature of this circuit");
        }
        const auto [x_real, y_real] = design_matrix(real_train, col);
        const auto [x_aug, y_aug] = design_matrix(augmented, col);
        const auto [x_test, y_test] = design_matrix(real_test, col);
        const auto base_model = fit_gbr(x_real, y_real, config, seed);
        const auto aug_model = fit_gbr(x_aug, y_aug, config, seed);
        TargetComparison cmp;
        cmp.target = name;
        cmp.real_only = regression_metrics(y_test, base_model.predict(x_test));
        cmp.augmented = regression_metrics(y_test, aug_model.predict(x_test));
        cmp.improvement = improvement_percent(cmp.real_only, cmp.augmented);
        report.targets.push_back(std::move(cmp));
    }
    return report;
}

}  // namespace circuitdiff::gbr
