#pragma once

// Least-squares gradient-boosted regression trees and the real vs
// real+synthetic augmentation benchmark.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "circuitdiff/nn.hpp"
#include "circuitdiff/schema.hpp"

namespace circuitdiff::gbr {

using nn::Matrix;

struct GbrConfig {
    std::size_t n_trees = 200;
    std::size_t max_depth = 3;
    double shrinkage = 0.05;
    std::size_t min_samples_leaf = 5;
    /// Fraction of rows drawn (without replacement) for each tree; 1 uses all.
    double subsample = 1.0;

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // rows with x[feature] <= threshold go left
    double value = 0.0;      // leaf prediction
    int left = -1;
    int right = -1;
};

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    double predict(std::span<const double> x) const;
    std::size_t depth() const;
    bool is_leaf() const noexcept { return nodes_.size() == 1 && nodes_[0].feature < 0; }
    std::span<const TreeNode> nodes() const noexcept { return nodes_; }

private:
    std::vector<TreeNode> nodes_;
};

/// Exact greedy squared-error tree on `rows` of `x`. Ties in gain go to the
/// lowest feature index, then the lowest threshold.
RegressionTree fit_tree(const Matrix& x, std::span<const double> target, std::span<const std::size_t> rows,
                        std::size_t max_depth, std::size_t min_samples_leaf);

struct GbrModel {
    double init = 0.0;
    std::vector<RegressionTree> trees;
    std::vector<double> shrinkage;  // per tree
    GbrConfig config;

    double predict(std::span<const double> x) const;
    std::vector<double> predict(const Matrix& x) const;
    /// Prediction using only the first `n_trees` trees.
    double predict_staged(std::span<const double> x, std::size_t n_trees) const;
};

/// Boosting stops early once a tree finds no split with positive gain.
GbrModel fit_gbr(const Matrix& features, std::span<const double> target, const GbrConfig& config,
                 std::uint64_t seed);

struct RegressionMetrics {
    double r2;
    double mse;
    double rmse;
    double mae;
    double mape;  // fraction, not percent
};

/// R^2 is NaN when y_true is constant.
RegressionMetrics regression_metrics(std::span<const double> y_true, std::span<const double> y_pred);

/// Signed improvement of `augmented` over `baseline` in percent; positive is
/// better for every metric (higher R^2, lower errors).
RegressionMetrics improvement_percent(const RegressionMetrics& baseline, const RegressionMetrics& augmented);

struct TargetComparison {
    std::string target;
    RegressionMetrics real_only;
    RegressionMetrics augmented;
    RegressionMetrics improvement;
};

struct BenchReport {
    Circuit circuit = Circuit::Not;
    std::size_t n_train = 0;
    std::size_t n_synthetic = 0;
    std::size_t n_test = 0;
    GbrConfig config;
    std::uint64_t seed = 0;
    std::vector<TargetComparison> targets;
};

/// Input-feature matrix and one output column of a dataset.
std::pair<Matrix, std::vector<double>> design_matrix(const Dataset& data, std::size_t target_column);

/// Seeded shuffle split; returns {train, test}.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction, std::uint64_t seed);

/// Fits each target on real_train and on real_train + synthetic, scoring both
/// on real_test. Throws LeakageDetected if any row appears in both real sets.
BenchReport run_benchmark(const Dataset& real_train, const Dataset& synthetic, const Dataset& real_test,
                          std::span<const std::string> targets, const GbrConfig& config, std::uint64_t seed);

}  // namespace circuitdiff::gbr
