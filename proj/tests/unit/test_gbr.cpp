#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"

#include "circuitdiff/error.hpp"
#include "circuitdiff/gbr.hpp"
#include "circuitdiff/simulator.hpp"

using namespace circuitdiff;
using namespace circuitdiff::gbr;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::InvalidConfig;
}

const std::vector<double> kY{1.0, 1.2, 0.8, 1.1, 3.0, 3.2, 2.9, 5.0, 5.1, 4.9};

Matrix ten_points() {
    Matrix x(10, 1);
    for (std::size_t i = 0; i < 10; ++i) x(i, 0) = static_cast<double>(i + 1);
    return x;
}

// Brute-force best single split on one feature, for comparison with fit_tree.
std::pair<double, double> brute_force_split(const std::vector<double>& x, const std::vector<double>& y) {
    double best_sse = 1e300, best_thr = 0.0;
    for (double thr : x) {
        double sl = 0, sr = 0;
        int nl = 0, nr = 0;
        for (std::size_t i = 0; i < x.size(); ++i) (x[i] <= thr ? (sl += y[i], ++nl) : (sr += y[i], ++nr));
        if (nl == 0 || nr == 0) continue;
        double sse = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double m = x[i] <= thr ? sl / nl : sr / nr;
            sse += (y[i] - m) * (y[i] - m);
        }
        if (sse < best_sse - 1e-15) best_sse = sse, best_thr = thr;
    }
    return {best_thr, best_sse};
}

}  // namespace

TEST_SUITE("gbr") {

TEST_CASE("two-stump boosting matches the hand residual trace") {
    // init = 141/50; stump 1 splits at 4.5 with leaves -359/200 and 359/300;
    // stump 2 splits the residuals at 7.5 with leaves -59/140 and 59/60.
    GbrConfig cfg;
    cfg.n_trees = 2;
    cfg.max_depth = 1;
    cfg.shrinkage = 1.0;
    cfg.min_samples_leaf = 1;
    const auto model = fit_gbr(ten_points(), kY, cfg, 0);
    REQUIRE(model.trees.size() == 2);
    CHECK(std::abs(model.init - 2.82) <= 1e-12);
    const auto& s1 = model.trees[0].nodes();
    CHECK(s1[0].threshold == 4.5);
    CHECK(std::abs(s1[static_cast<std::size_t>(s1[0].left)].value - (-1.795)) <= 1e-12);
    CHECK(std::abs(s1[static_cast<std::size_t>(s1[0].right)].value - 359.0 / 300.0) <= 1e-12);
    const auto& s2 = model.trees[1].nodes();
    CHECK(s2[0].threshold == 7.5);
    CHECK(std::abs(s2[static_cast<std::size_t>(s2[0].left)].value - (-59.0 / 140.0)) <= 1e-12);
    CHECK(std::abs(s2[static_cast<std::size_t>(s2[0].right)].value - 59.0 / 60.0) <= 1e-12);

    const double after_one[] = {1.025, 1.025, 1.025, 1.025, 241.0 / 60, 241.0 / 60, 241.0 / 60,
                                241.0 / 60, 241.0 / 60, 241.0 / 60};
    const double after_two[] = {169.0 / 280, 169.0 / 280, 169.0 / 280, 169.0 / 280, 151.0 / 42,
                                151.0 / 42,  151.0 / 42,  5.0,         5.0,         5.0};
    const auto x = ten_points();
    for (std::size_t i = 0; i < 10; ++i) {
        CAPTURE(i);
        CHECK(std::abs(model.predict_staged(x.row(i), 1) - after_one[i]) <= 1e-12);
        CHECK(std::abs(model.predict(x.row(i)) - after_two[i]) <= 1e-12);
    }
}

TEST_CASE("constant target needs no trees") {
    Matrix x = testing::random_matrix(20, 3, 1);
    const std::vector<double> y(20, 4.25);
    const auto model = fit_gbr(x, y, {}, 1);
    CHECK(model.trees.empty());
    CHECK(model.init == 4.25);
    CHECK(model.predict(x.row(3)) == 4.25);
}

TEST_CASE("training MSE is nonincreasing in the number of trees") {
    const auto data = generate_dataset(Circuit::Not, 300, 4);
    const auto [x, y] = design_matrix(data, 15);
    GbrConfig cfg;
    cfg.n_trees = 60;
    const auto model = fit_gbr(x, y, cfg, 2);
    double prev = 1e300;
    for (std::size_t k = 0; k <= model.trees.size(); ++k) {
        double mse = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const double e = y[r] - model.predict_staged(x.row(r), k);
            mse += e * e;
        }
        CHECK(mse <= prev * (1.0 + 1e-12));
        prev = mse;
    }
}

TEST_CASE("tree split agrees with brute force") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto xv = testing::random_vector(30, seed);
        const auto yv = testing::random_vector(30, seed + 50);
        Matrix x(30, 1, xv);
        std::vector<std::size_t> rows(30);
        std::iota(rows.begin(), rows.end(), 0);
        const auto tree = fit_tree(x, yv, rows, 1, 1);
        const auto [thr, sse] = brute_force_split(xv, yv);
        double tree_sse = 0.0;
        for (std::size_t i = 0; i < 30; ++i) {
            const double e = yv[i] - tree.predict(x.row(i));
            tree_sse += e * e;
        }
        CHECK(tree_sse == doctest::Approx(sse).epsilon(1e-12));
        // the split separates the same points as the brute-force threshold
        for (std::size_t i = 0; i < 30; ++i) CHECK((xv[i] <= thr) == (xv[i] <= tree.nodes()[0].threshold));
    }
}

TEST_CASE("ties go to the lowest feature index") {
    // identical feature columns: the split must use column 0
    Matrix x(8, 3);
    for (std::size_t r = 0; r < 8; ++r) x(r, 0) = x(r, 1) = x(r, 2) = static_cast<double>(r);
    const std::vector<double> y{0, 0, 0, 0, 1, 1, 1, 1};
    std::vector<std::size_t> rows(8);
    std::iota(rows.begin(), rows.end(), 0);
    const auto tree = fit_tree(x, y, rows, 1, 1);
    CHECK(tree.nodes()[0].feature == 0);
    CHECK(tree.nodes()[0].threshold == 3.5);
}

TEST_CASE("depth and leaf size limits") {
    const auto data = generate_dataset(Circuit::Nand2, 200, 4);
    const auto [x, y] = design_matrix(data, 16);
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), 0);
    const auto tree = fit_tree(x, y, rows, 3, 5);
    CHECK(tree.depth() <= 3);
    CHECK(std::isfinite(tree.nodes()[0].threshold));
    // every leaf holds at least 5 training rows
    std::vector<int> count(tree.nodes().size(), 0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        int i = 0;
        while (tree.nodes()[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = tree.nodes()[static_cast<std::size_t>(i)];
            i = x(r, static_cast<std::size_t>(n.feature)) <= n.threshold ? n.left : n.right;
        }
        ++count[static_cast<std::size_t>(i)];
    }
    for (std::size_t i = 0; i < count.size(); ++i) {
        if (tree.nodes()[i].feature < 0) CHECK(count[i] >= 5);
    }
}

TEST_CASE("fit_gbr determinism and errors") {
    const auto data = generate_dataset(Circuit::Not, 100, 4);
    const auto [x, y] = design_matrix(data, 16);
    GbrConfig cfg;
    cfg.n_trees = 20;
    cfg.subsample = 0.7;
    const auto a = fit_gbr(x, y, cfg, 9);
    const auto b = fit_gbr(x, y, cfg, 9);
    CHECK(a.predict(x) == b.predict(x));
    Matrix small(9, 2);
    CHECK(kind_of([&] { fit_gbr(small, std::vector<double>(9, 1.0), {}, 1); }) == ErrorKind::TooFewRows);
    CHECK(kind_of([&] { fit_gbr(x, std::vector<double>(3, 1.0), {}, 1); }) == ErrorKind::LengthMismatch);
    GbrConfig bad;
    bad.shrinkage = 0.0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("regression metric examples") {
    const std::vector<double> y{1, 2, 3};
    const auto perfect = regression_metrics(y, y);
    CHECK(perfect.r2 == 1.0);
    CHECK(perfect.mse == 0.0);
    CHECK(perfect.rmse == 0.0);
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.mape == 0.0);
    const auto mean_pred = regression_metrics(y, std::vector<double>{2, 2, 2});
    CHECK(mean_pred.r2 == 0.0);
    const auto m = regression_metrics(y, std::vector<double>{1, 2, 4});
    CHECK(m.r2 == 0.5);
    CHECK(m.mse == 1.0 / 3.0);
    CHECK(m.mae == 1.0 / 3.0);
    CHECK(m.rmse * m.rmse == doctest::Approx(m.mse).epsilon(1e-15));
    CHECK(m.mape == doctest::Approx((1.0 / 3.0) / 3.0).epsilon(1e-15));
}

TEST_CASE("regression metric identities on random data") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto y = testing::random_vector(25, seed, 1.0, 2.0);
        const auto p = testing::random_vector(25, seed + 7, 1.0, 2.0);
        const auto m = regression_metrics(y, p);
        CHECK(testing::rel_err(m.rmse * m.rmse, m.mse) <= 1e-12);
        CHECK(m.r2 < 1.0);
    }
    CHECK(std::isnan(regression_metrics(std::vector<double>{2, 2}, std::vector<double>{1, 3}).r2));
    CHECK(kind_of([] { regression_metrics(std::vector<double>{0, 1}, std::vector<double>{0, 1}); }) ==
          ErrorKind::ZeroReference);
    CHECK(kind_of([] { regression_metrics(std::vector<double>{1}, std::vector<double>{1, 2}); }) ==
          ErrorKind::LengthMismatch);
}

TEST_CASE("improvement percentages follow the sign convention") {
    const RegressionMetrics base{0.93, 4.58e-25, 6.77e-13, 5.16e-13, 0.106};
    const RegressionMetrics aug{0.976, 2.25e-25, 4.75e-13, 3.44e-13, 0.099};
    const auto imp = improvement_percent(base, aug);
    CHECK(imp.r2 == doctest::Approx(4.946).epsilon(1e-3));
    CHECK(imp.mse == doctest::Approx(50.87).epsilon(1e-3));
    CHECK(imp.rmse == doctest::Approx(29.84).epsilon(1e-3));
    CHECK(imp.mae == doctest::Approx(33.33).epsilon(1e-3));
    CHECK(imp.mape == doctest::Approx(6.60).epsilon(1e-3));
}

TEST_CASE("train/test split is disjoint and seeded") {
    const auto data = generate_dataset(Circuit::Not, 500, 7);
    const auto [train, test] = train_test_split(data, 0.2, 3);
    CHECK(train.rows() == 400);
    CHECK(test.rows() == 100);
    const auto [train2, test2] = train_test_split(data, 0.2, 3);
    CHECK(std::equal(test.values().begin(), test.values().end(), test2.values().begin()));
}

TEST_CASE("benchmark with no synthetic rows changes nothing") {
    const auto data = generate_dataset(Circuit::Not, 200, 7);
    const auto [train, test] = train_test_split(data, 0.2, 3);
    const std::vector<std::string> targets{"delay_lh_a", "delay_hl_a"};
    GbrConfig cfg;
    cfg.n_trees = 50;
    const auto r = run_benchmark(train, Dataset(data.schema()), test, targets, cfg, 1);
    REQUIRE(r.targets.size() == 2);
    for (const auto& t : r.targets) {
        CHECK(t.real_only.r2 == t.augmented.r2);
        CHECK(t.real_only.mse == t.augmented.mse);
        CHECK(t.real_only.mae == t.augmented.mae);
        CHECK(t.improvement.mse == 0.0);
    }
    CHECK(r.n_train == 160);
    CHECK(r.n_test == 40);
}

TEST_CASE("benchmark errors") {
    const auto data = generate_dataset(Circuit::Not, 100, 7);
    const auto [train, test] = train_test_split(data, 0.2, 3);
    const std::vector<std::string> targets{"delay_lh_a"};
    CHECK(kind_of([&] { run_benchmark(train, generate_dataset(Circuit::Nand2, 10, 1), test, targets, {}, 1); }) ==
          ErrorKind::SchemaMismatch);
    CHECK(kind_of([&] { run_benchmark(train, Dataset(data.schema()), train, targets, {}, 1); }) ==
          ErrorKind::LeakageDetected);
    const std::vector<std::string> bad{"vdd"};
    CHECK(kind_of([&] { run_benchmark(train, Dataset(data.schema()), test, bad, {}, 1); }) ==
          ErrorKind::SchemaMismatch);
}

}  // TEST_SUITE
