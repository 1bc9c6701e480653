#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "hydrofit/fitting.hpp"
#include "hydrofit/rng.hpp"
#include "hydrofit/selection.hpp"
#include "hydrofit/simulator.hpp"

using namespace hydrofit;
using hydrofit::testing::small_protocol;

TEST_CASE("rmse") {
    Eigen::VectorXd y(2), yhat(2);
    y << 0.0, 0.0;
    yhat << 3.0, -3.0;
    CHECK(rmse(y, yhat) == doctest::Approx(3.0));
    CHECK(rmse(y, y) == 0.0);

    Eigen::VectorXd shifted = y.array() + 0.7;
    CHECK(rmse(y, shifted) == doctest::Approx(0.7));

    Eigen::VectorXd wrong(3);
    CHECK_THROWS_AS(rmse(y, wrong), LengthMismatchError);
}

TEST_CASE("adjusted R^2") {
    Eigen::VectorXd y(10);
    y.setLinSpaced(10, 0.0, 9.0);

    SUBCASE("perfect fit") { CHECK(r2_adj(y, y, 3) == doctest::Approx(1.0)); }
    SUBCASE("mean predictor with k = 0 scores zero") {
        const Eigen::VectorXd mean = Eigen::VectorXd::Constant(10, y.mean());
        CHECK(r2_adj(y, mean, 0) == doctest::Approx(0.0));
    }
    SUBCASE("plug-in arithmetic: SSR/SST = 0.1, N = 10, k = 3") {
        const double sst = (y.array() - y.mean()).square().sum();
        const double target_ssr = 0.1 * sst;
        Eigen::VectorXd yhat = y.array() + std::sqrt(target_ssr / 10.0);
        CHECK(r2_adj(y, yhat, 3) == doctest::Approx(0.85).epsilon(1e-12));
    }
    SUBCASE("guards") {
        const Eigen::VectorXd constant = Eigen::VectorXd::Constant(10, 2.0);
        CHECK_THROWS_AS(r2_adj(constant, constant, 1), DegenerateTargetError);
        CHECK_THROWS_AS(r2_adj(y, y, 9), TooFewSamplesError);
    }
}

TEST_CASE("aicc and bic reproduce the hand-verified plug-in values") {
    // N = 100, SSR = 100, nu = 2; reference values recomputed independently
    // with 30-digit arithmetic before this test was written.
    Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
    Eigen::VectorXd yhat = Eigen::VectorXd::Ones(100);
    CHECK(std::abs(aicc(y, yhat, 2) - 287.91141798114073) <= 1e-9);
    CHECK(std::abs(bic(y, yhat, 2) - 292.99804701291073) <= 1e-9);

    // nu = 0 leaves BIC at -2 ln L.
    const double lnl = -(100.0 / 2.0) * (std::log(2.0 * M_PI / 100.0 * 100.0) + 1.0);
    CHECK(bic(y, yhat, 0) == doctest::Approx(-2.0 * lnl).epsilon(1e-12));
}

TEST_CASE("aicc monotonicity and guards") {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
    Eigen::VectorXd big = Eigen::VectorXd::Ones(100);
    Eigen::VectorXd small_res = big * 0.9;
    CHECK(aicc(y, small_res, 2) < aicc(y, big, 2));

    CHECK(aicc(y, y, 2) == -std::numeric_limits<double>::infinity());
    CHECK(bic(y, y, 2) == -std::numeric_limits<double>::infinity());

    Eigen::VectorXd tiny = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd tiny_hat = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(aicc(tiny, tiny_hat, 2), TooFewSamplesError);
}

TEST_CASE("criterion sensitivities") {
    // d AICc / d nu at (N=100, nu=2): 2 + ((4*2+2)*(100-2-1) + 2*2*3)/(100-2-1)^2
    const double expected = 2.0 + (10.0 * 97.0 + 12.0) / (97.0 * 97.0);
    CHECK(aicc_sensitivity(2, 100) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(bic_sensitivity(100) == doctest::Approx(std::log(100.0)));

    // AICc penalizes parameters harder than BIC once nu approaches N.
    CHECK(aicc_sensitivity(40, 50) > bic_sensitivity(50));
}

TEST_CASE("joint cost weighting") {
    FitReport report;
    report.rmse = 0.5;
    report.r2_adj = 0.99;
    report.aicc = 5e4;

    CHECK(joint_cost(report, {1.0, 0.0, 0.0}) == doctest::Approx(0.5));
    CHECK(joint_cost(report, {0.0, 0.0, 1.0}) == doctest::Approx(5e4));
    CHECK(joint_cost(report, {1.0, 1.0, 1e-5}) == doctest::Approx(1.01).epsilon(1e-12));

    CHECK_THROWS_AS(validate(Weights{0.0, 0.0, 0.0}), InvariantError);
    CHECK_THROWS_AS(validate(Weights{-1.0, 0.0, 1.0}), InvariantError);
}

TEST_CASE("grid_search over polynomial specs") {
    const ActuatorTruth truth{.noise_sigma = 0.5};
    const Dataset ds = generate(truth, small_protocol(21, 1));
    const FitConfig cfg;
    const Weights w;

    GridRanges ranges;
    ranges.n = {1, 2, 3, 4};
    ranges.m = {1, 2, 3};
    // AICc-only weighting: the argmin is the AICc-minimizing spec.
    const GridResult grid = grid_search(ds, Family::Poly, ranges, Weights{0.0, 0.0, 1.0}, cfg);
    CHECK(grid.entries.size() == 12);
    for (const GridEntry& entry : grid.entries) CHECK(entry.report.has_value());

    const ModelSpec best = grid.entries[grid.best].spec;
    CHECK(best.n == 3);
    CHECK(best.m == 2);

    SUBCASE("single-spec grid") {
        GridRanges one;
        one.n = {2};
        one.m = {1};
        const GridResult single = grid_search(ds, Family::Poly, one, w, cfg);
        CHECK(single.entries.size() == 1);
        CHECK(single.best == 0);
    }
    SUBCASE("weight rescaling preserves the argmin") {
        const GridResult base = grid_search(ds, Family::Poly, ranges, w, cfg);
        const GridResult doubled =
            grid_search(ds, Family::Poly, ranges, Weights{2.0, 2.0, 2e-5}, cfg);
        CHECK(doubled.best == base.best);
    }
    SUBCASE("a 7x7 grid expands to 49 entries") {
        GridRanges wide;
        for (int i = 1; i <= 7; ++i) {
            wide.n.push_back(i);
            wide.m.push_back(i);
        }
        CHECK(expand_grid(Family::Poly, wide).size() == 49);
    }
}

TEST_CASE("grid_search records failed fits and excludes them from the argmin") {
    // 6 samples cannot support nu = 12, so (3,2) must fail while (1,1) fits
    // (the alternating flow keeps the (1,1) design full rank).
    std::vector<Sample> samples;
    for (int i = 0; i < 6; ++i) {
        samples.emplace_back(i * 0.04, 10.0 * i, 25.0 + 3.0 * (i % 2), 0.0, 2.0 + 0.1 * i);
    }
    const Dataset tiny({Trajectory(samples, 25.0, 0, Phase::Mixed, true, true)}, 0);
    GridRanges ranges;
    ranges.n = {1, 3};
    ranges.m = {1, 2};
    const GridResult grid = grid_search(tiny, Family::Poly, ranges, Weights{1.0, 0.0, 0.0},
                                        FitConfig{});
    bool saw_failure = false;
    for (const GridEntry& entry : grid.entries) {
        if (!entry.report) {
            saw_failure = true;
            CHECK_FALSE(entry.error.empty());
        }
    }
    CHECK(saw_failure);
    CHECK(grid.entries[grid.best].report.has_value());
}

TEST_CASE("nested polynomial RMSE decreases while AICc can increase") {
    const ActuatorTruth truth{.noise_sigma = 0.5};
    const Dataset ds = generate(truth, small_protocol(33, 1));
    const Weights w;

    const FitReport r32 = score_model(fit_poly(ds, {.family = Family::Poly, .n = 3, .m = 2}).model,
                                      ds, w);
    const FitReport r33 = score_model(fit_poly(ds, {.family = Family::Poly, .n = 3, .m = 3}).model,
                                      ds, w);
    // More terms: in-sample RMSE cannot get worse ...
    CHECK(r33.rmse <= r32.rmse + 1e-12);
    // ... but the complexity penalty outweighs a pure-noise improvement.
    CHECK(r33.aicc > r32.aicc);
}

TEST_CASE("identical nu makes AICc and BIC rank identically") {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(50);
    Eigen::VectorXd a = Eigen::VectorXd::Constant(50, 0.5);
    Eigen::VectorXd b = Eigen::VectorXd::Constant(50, 0.8);
    CHECK((aicc(y, a, 4) < aicc(y, b, 4)) == (bic(y, a, 4) < bic(y, b, 4)));
}

TEST_CASE("adjusted R^2 usually drops when a pure-noise column is added") {
    // The added column earns its keep only when its |t| exceeds 1, which
    // for pure noise happens with probability ~0.32; expect a clear
    // majority of decreases over 50 seeded trials.
    int decreases = 0;
    for (int trial = 0; trial < 50; ++trial) {
        SplitMix64 rng(1000 + static_cast<std::uint64_t>(trial));
        const int n = 60;
        Eigen::MatrixXd X(n, 4);
        Eigen::VectorXd y(n);
        for (int r = 0; r < n; ++r) {
            X(r, 0) = 1.0;
            for (int c = 1; c < 4; ++c) X(r, c) = rng.next_gaussian();
            y(r) = 2.0 + 0.5 * X(r, 1) - 1.5 * X(r, 2) + 0.3 * X(r, 3) + rng.next_gaussian();
        }
        Eigen::MatrixXd Xn(n, 5);
        Xn.leftCols(4) = X;
        for (int r = 0; r < n; ++r) Xn(r, 4) = rng.next_gaussian();

        const double base = r2_adj(y, X * fit_linear(X, y), 3);
        const double extra = r2_adj(y, Xn * fit_linear(Xn, y), 4);
        if (extra < base) ++decreases;
    }
    CHECK(decreases >= 30);  // seeded, deterministic; majority behaviour
}

TEST_CASE("flops estimates") {
    const CostEstimate poly = flops_estimate({.family = Family::Poly, .n = 3, .m = 2}, 100000);
    CHECK(poly.cls == CostClass::Lsq);
    CHECK(poly.proportional_cost == doctest::Approx(1e5 * 144.0));

    const CostEstimate nn = flops_estimate({.family = Family::NN, .d = 8}, 1000, 3000);
    CHECK(nn.cls == CostClass::Sgd);
    CHECK(nn.proportional_cost == doctest::Approx(3000.0 * 1000.0 * 33.0));

    const CostEstimate lm = flops_estimate({.family = Family::Exponential, .k = 3}, 500);
    CHECK(lm.cls == CostClass::LmLsq);
    CHECK(lm.proportional_cost == doctest::Approx(500.0 * 64.0));
}
