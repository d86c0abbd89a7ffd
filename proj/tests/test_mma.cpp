#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ftop/errors.hpp"
#include "ftop/mma.hpp"

using namespace ftop;

namespace {

double model_objective(const MmaApprox& a, const std::vector<double>& x) {
    double v = a.r0;
    for (std::size_t j = 0; j < x.size(); ++j)
        v += a.p0[j] / (a.upp[j] - x[j]) + a.q0[j] / (x[j] - a.low[j]);
    return v;
}

double model_constraint(const MmaApprox& a, std::size_t i, const std::vector<double>& x) {
    double v = -a.b[i];
    for (std::size_t j = 0; j < x.size(); ++j)
        v += a.pc[i][j] / (a.upp[j] - x[j]) + a.qc[i][j] / (x[j] - a.low[j]);
    return v;
}

void require_bracketed(const MmaState& s) {
    for (std::size_t j = 0; j < s.x.size(); ++j) {
        REQUIRE(s.low[j] < s.x[j]);
        REQUIRE(s.upp[j] > s.x[j]);
        REQUIRE(s.x[j] >= 0.0);
        REQUIRE(s.x[j] <= 1.0);
    }
}

}  // namespace

TEST_CASE("scalar quadratic reaches its minimum in a few iterations") {
    auto state = mma_init({0.9});
    double x = 0.9;
    int iters = 0;
    for (; iters < 30; ++iters) {
        const double f = (x - 0.3) * (x - 0.3);
        std::vector<double> g = {2.0 * (x - 0.3)};
        x = mma_step(state, f, g, {}, {})[0];
        require_bracketed(state);
        if (std::fabs(x - 0.3) <= 1e-4) break;
    }
    CHECK(std::fabs(x - 0.3) <= 1e-4);
    CHECK(iters < 30);
}

TEST_CASE("linear objective settles on the active volume constraint") {
    const std::size_t n = 8;
    const double vstar = 2.0;
    auto state = mma_init(std::vector<double>(n, 0.9));
    std::vector<double> x = state.x;
    for (int it = 0; it < 120; ++it) {
        double sum = 0.0;
        for (double v : x) sum += v;
        std::vector<double> obj_grad(n, 1.0);
        std::vector<double> cons = {1.0 - sum / vstar};
        std::vector<std::vector<double>> cons_grad = {std::vector<double>(n, -1.0 / vstar)};
        x = mma_step(state, sum, obj_grad, cons, cons_grad);
        require_bracketed(state);
    }
    double sum = 0.0;
    for (double v : x) sum += v;
    CHECK(std::fabs(sum - vstar) <= 2e-3);
    CHECK(1.0 - sum / vstar <= 1e-3);
    CHECK_FALSE(state.feasibility_restored);
}

TEST_CASE("zero gradient leaves the iterate in place") {
    auto state = mma_init({0.37, 0.62});
    auto x = mma_step(state, 1.0, {0.0, 0.0}, {}, {});
    CHECK(std::fabs(x[0] - 0.37) <= 1e-12);
    CHECK(std::fabs(x[1] - 0.62) <= 1e-12);
}

TEST_CASE("convex QP converges to the analytic KKT point") {
    // min 0.5 |x - t|^2  s.t.  sum(x)/2 - 1 <= 0; the multiplier 0.1 shifts
    // every coordinate down by 0.05.
    const std::vector<double> target = {0.2, 0.7, 0.4, 0.9};
    const std::vector<double> opt = {0.15, 0.65, 0.35, 0.85};
    auto state = mma_init(std::vector<double>(4, 0.1));
    std::vector<double> x = state.x;
    for (int it = 0; it < 800; ++it) {
        double f = 0.0, sum = 0.0;
        std::vector<double> g(4);
        for (int j = 0; j < 4; ++j) {
            f += 0.5 * (x[j] - target[j]) * (x[j] - target[j]);
            g[j] = x[j] - target[j];
            sum += x[j];
        }
        std::vector<double> cons = {sum / 2.0 - 1.0};
        std::vector<std::vector<double>> cons_grad = {std::vector<double>(4, 0.5)};
        auto x_new = mma_step(state, f, g, cons, cons_grad);
        double shift = 0.0;
        for (int j = 0; j < 4; ++j) shift = std::max(shift, std::fabs(x_new[j] - x[j]));
        x = x_new;
        require_bracketed(state);
        if (shift <= 1e-12) break;
    }
    for (int j = 0; j < 4; ++j) CHECK(std::fabs(x[j] - opt[j]) <= 1e-6);
    double sum = 0.0;
    for (double v : x) sum += v;
    CHECK(std::fabs(sum / 2.0 - 1.0) <= 1e-6);
}

TEST_CASE("subproblem model is first-order consistent at the expansion point") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> x0 = {0.3, 0.55, 0.7, 0.45, 0.6};
    auto state = mma_init(x0);

    std::vector<double> obj_grad(5), cg0(5), cg1(5);
    for (auto& v : obj_grad) v = 2.0 * U(rng);
    for (auto& v : cg0) v = U(rng);
    for (auto& v : cg1) v = U(rng);
    const double f0 = 1.7;
    const std::vector<double> cons = {0.2, -0.4};
    auto a = mma_build_approximation(state, f0, obj_grad, cons, {cg0, cg1});

    CHECK(std::fabs(model_objective(a, x0) - f0) <= 1e-12);
    CHECK(std::fabs(model_constraint(a, 0, x0) - cons[0]) <= 1e-12);
    CHECK(std::fabs(model_constraint(a, 1, x0) - cons[1]) <= 1e-12);

    const double h = 1e-7;
    for (std::size_t j = 0; j < x0.size(); ++j) {
        auto xp = x0, xm = x0;
        xp[j] += h;
        xm[j] -= h;
        const double slope = (model_objective(a, xp) - model_objective(a, xm)) / (2.0 * h);
        CHECK(std::fabs(slope - obj_grad[j]) <= 1e-6 * std::max(1.0, std::fabs(obj_grad[j])));
        const double cslope =
            (model_constraint(a, 0, xp) - model_constraint(a, 0, xm)) / (2.0 * h);
        CHECK(std::fabs(cslope - cg0[j]) <= 1e-6 * std::max(1.0, std::fabs(cg0[j])));
    }
}

TEST_CASE("asymptotes expand on monotone progress and shrink on oscillation") {
    SUBCASE("monotone descent expands by 1.2") {
        auto state = mma_init({0.9});
        for (int it = 0; it < 2; ++it) mma_step(state, 0.0, {1.0}, {}, {});
        const double interval_before = state.x_prev[0] - state.low[0];
        mma_step(state, 0.0, {1.0}, {}, {});
        // After the third step, state.x_prev is the expansion point just used.
        CHECK(state.low[0] ==
              doctest::Approx(state.x_prev[0] - 1.2 * interval_before).epsilon(1e-12));
    }
    SUBCASE("sign flips shrink by 0.7") {
        auto state = mma_init({0.5});
        mma_step(state, 0.0, {1.0}, {}, {});
        mma_step(state, 0.0, {-1.0}, {}, {});
        const double interval_before = state.x_prev[0] - state.low[0];
        mma_step(state, 0.0, {1.0}, {}, {});
        CHECK((state.x[0] - state.x_prev[0]) * (state.x_prev[0] - state.x_prev2[0]) < 0.0);
        CHECK(state.low[0] ==
              doctest::Approx(state.x_prev[0] - 0.7 * interval_before).epsilon(1e-12));
    }
}

TEST_CASE("box bounds hold even under a constraint the move limit cannot reach") {
    auto state = mma_init({0.9});
    std::vector<double> x = state.x;
    bool restored_seen = false;
    for (int it = 0; it < 10; ++it) {
        std::vector<double> cons = {x[0] - 0.1};
        std::vector<std::vector<double>> cons_grad = {{1.0}};
        x = mma_step(state, 0.0, {0.0}, cons, cons_grad);
        require_bracketed(state);
        restored_seen = restored_seen || state.feasibility_restored;
    }
    CHECK(restored_seen);
    CHECK(x[0] <= 0.1 + 1e-6);
    CHECK_FALSE(state.feasibility_restored);  // feasible again at the end
}

TEST_CASE("malformed optimizer inputs are rejected") {
    CHECK_THROWS_AS(mma_init({0.5, 1.5}), ConfigError);
    CHECK_THROWS_AS(mma_init(std::vector<double>{}), ConfigError);
    auto state = mma_init({0.5});
    CHECK_THROWS_AS(mma_step(state, 0.0, {1.0, 2.0}, {}, {}), ConfigError);
    CHECK_THROWS_AS(mma_step(state, 0.0, {std::nan("")}, {}, {}), ConfigError);
    CHECK_THROWS_AS(mma_step(state, 0.0, {1.0}, {0.0}, {}), ConfigError);
}

TEST_CASE("adam first step moves by the learning rate") {
    AdamState state;
    state.learning_rate = 0.01;
    auto out = adam_step(state, {1.0}, {3.7});
    CHECK(state.step == 1);
    CHECK_FALSE(state.last_step_rejected);
    CHECK(std::fabs((1.0 - out[0]) - 0.01) <= 1e-9);
}

TEST_CASE("adam ignores zero gradients and rejects non-finite ones") {
    AdamState state;
    auto out = adam_step(state, {0.4, -0.2}, {0.0, 0.0});
    CHECK(out[0] == 0.4);
    CHECK(out[1] == -0.2);

    auto kept = adam_step(state, {0.4, -0.2}, {std::nan(""), 1.0});
    CHECK(state.last_step_rejected);
    CHECK(state.step == 1);  // rejected step leaves the counter alone
    CHECK(kept[0] == 0.4);
    CHECK(kept[1] == -0.2);

    auto moved = adam_step(state, kept, {1.0, 1.0});
    CHECK_FALSE(state.last_step_rejected);
    CHECK(state.step == 2);
    CHECK(moved[0] < kept[0]);

    CHECK_THROWS_AS(adam_step(state, {1.0}, {1.0}), ConfigError);
}

TEST_CASE("adam descends a ten-dimensional bowl to near machine floor") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.2, 0.8);
    std::vector<double> center(10);
    for (auto& c : center) c = U(rng);
    std::vector<double> x(10);
    for (std::size_t j = 0; j < 10; ++j) x[j] = center[j] + (j % 2 ? 0.5 : -0.5);

    AdamState state;
    state.learning_rate = 2e-4;
    auto loss = [&](const std::vector<double>& p) {
        double f = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j)
            f += 0.5 * (p[j] - center[j]) * (p[j] - center[j]);
        return f;
    };

    std::vector<double> history;
    double best = loss(x);
    for (int it = 0; it < 20000; ++it) {
        history.push_back(loss(x));
        std::vector<double> g(10);
        for (std::size_t j = 0; j < 10; ++j) g[j] = x[j] - center[j];
        x = adam_step(state, x, g);
        best = std::min(best, loss(x));
    }
    CHECK(best <= 1e-6);
    for (int it = 100; it < 300; ++it) CHECK(history[std::size_t(it + 1)] < history[std::size_t(it)]);
}
