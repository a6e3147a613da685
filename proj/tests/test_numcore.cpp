#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "mdf/autodiff.hpp"
#include "mdf/optim.hpp"

using namespace mdf;
using testutil::DArray;
using testutil::DTape;
using testutil::DValue;

TEST_CASE("array construction rejects non-finite values and bad shapes", "[numcore]") {
    CHECK_THROWS_AS(Array({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()}), std::invalid_argument);
    CHECK_THROWS_AS(Array({2}, {1.0f, std::numeric_limits<float>::infinity()}), std::invalid_argument);
    CHECK_THROWS_AS(Array({2, 2}, {1.0f, 2.0f}), std::invalid_argument);
    CHECK_NOTHROW(Array({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}));
}

TEST_CASE("grad of x*x at 3 is 6", "[numcore]") {
    auto grads = grad<double>(
        [](DTape&, const std::vector<DValue>& params) { return sum_all(mul(params[0], params[0])); },
        {DArray::scalar(3.0)});
    REQUIRE(grads.size() == 1);
    CHECK(grads[0][0] == Catch::Approx(6.0).margin(1e-12));
}

TEST_CASE("grad of a constant function is all zeros", "[numcore]") {
    auto grads = grad<double>(
        [](DTape& t, const std::vector<DValue>& params) {
            (void)params;
            return t.leaf(DArray::scalar(42.0));
        },
        {DArray({3}, {1.0, 2.0, 3.0})});
    for (std::size_t i = 0; i < grads[0].numel(); ++i) CHECK(grads[0][i] == 0.0);
}

namespace {

// Small two-layer rectifier network loss over fixed inputs; fixtures are
// resampled until every rectifier input clears a margin — central
// differences are invalid across the kink.
struct TwoLayerFixture {
    DArray inputs;  // [n × d]
    std::vector<DArray> params;  // w1 [d×h], b1 [h], w2 [h×1], b2 [1]
};

testutil::LossFn two_layer_loss(const DArray& inputs) {
    return [inputs](DTape& tape, std::span<const DValue> p) {
        DValue x = tape.leaf(inputs);
        DValue h = relu(add_rowvec(matmul(x, p[0]), p[1]));
        DValue y = add_rowvec(matmul(h, p[2]), p[3]);
        return mean_all(mul(y, y));
    };
}

double min_preact_margin(const DArray& inputs, const std::vector<DArray>& p) {
    DArray pre = add_rowvec(matmul(inputs, p[0]), p[1]);
    double margin = 1e30;
    for (std::size_t i = 0; i < pre.numel(); ++i) margin = std::min(margin, std::abs(pre[i]));
    return margin;
}

TwoLayerFixture sample_two_layer(std::mt19937_64& rng, double kink_margin) {
    const std::size_t n = 4, d = 5, h = 6;
    for (int attempt = 0; attempt < 100; ++attempt) {
        TwoLayerFixture f;
        f.inputs = testutil::random_darray({n, d}, rng);
        f.params = {testutil::random_darray({d, h}, rng, 0.7), testutil::random_darray({h}, rng, 0.3),
                    testutil::random_darray({h, 1}, rng, 0.7), testutil::random_darray({1}, rng, 0.3)};
        if (min_preact_margin(f.inputs, f.params) > kink_margin) return f;
    }
    FAIL("could not sample a fixture clear of the rectifier kink");
    return {};
}

}  // namespace

TEST_CASE("two-layer network gradient matches central finite differences", "[numcore]") {
    std::mt19937_64 rng(1234);
    TwoLayerFixture f = sample_two_layer(rng, 5e-3);
    auto report = testutil::fd_check(two_layer_loss(f.inputs), f.params, 1e-3);
    CHECK(report.max_rel_err < 1e-4);
    CHECK(report.checked > 0);
}

TEST_CASE("reverse-mode gradients match finite differences on randomized graphs", "[numcore]") {
    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        TwoLayerFixture f = sample_two_layer(rng, 1e-3);
        auto report = testutil::fd_check(two_layer_loss(f.inputs), f.params, 1e-5);
        worst = std::max(worst, report.max_rel_err);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("gradient of a sum equals the sum of gradients", "[numcore]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        DArray x = testutil::random_darray({4, 3}, rng);
        auto f = [](DTape&, const std::vector<DValue>& p) { return mean_all(mul(p[0], p[0])); };
        auto g = [](DTape&, const std::vector<DValue>& p) { return sum_all(mdf::exp(scale(p[0], 0.3))); };
        auto fg = [&](DTape& t, const std::vector<DValue>& p) { return add(f(t, p), g(t, p)); };
        auto gf = grad<double>(f, {x});
        auto gg = grad<double>(g, {x});
        auto gfg = grad<double>(fg, {x});
        for (std::size_t i = 0; i < x.numel(); ++i) {
            CHECK(gfg[0][i] == Catch::Approx(gf[0][i] + gg[0][i]).margin(1e-12));
        }
    }
}

TEST_CASE("forward replay is bit-identical", "[numcore]") {
    std::mt19937_64 rng(2024);
    DArray x = testutil::random_darray({8, 8}, rng);
    DArray w = testutil::random_darray({8, 4}, rng);
    auto run = [&] {
        DTape tape;
        DValue out = mdf::exp(scale(matmul(tape.leaf(x), tape.leaf(w)), 0.1));
        return tape.value(mean_all(out))[0];
    };
    const double a = run();
    const double b = run();
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
}

TEST_CASE("non-finite forward values name the offending op", "[numcore]") {
    Tape tape;
    Value big = tape.leaf(Array::scalar(1e30f));
    CHECK_THROWS_WITH(mul(big, big), Catch::Matchers::ContainsSubstring("mul"));  // overflows float
}

TEST_CASE("op shape mismatches are construction errors", "[numcore]") {
    Tape tape;
    Value a = tape.leaf(Array({2, 2}, {1, 2, 3, 4}));
    Value b = tape.leaf(Array({3}, {1, 2, 3}));
    CHECK_THROWS_AS(add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("gradients require a scalar loss", "[numcore]") {
    Tape tape;
    Value a = tape.leaf(Array({2}, {1, 2}));
    std::vector<Value> wrt{a};
    CHECK_THROWS_AS(tape.gradients(a, std::span<const Value>(wrt)), std::invalid_argument);
}

TEST_CASE("adam first step moves a scalar by about lr", "[numcore]") {
    std::vector<Array> params{Array::scalar(1.0f)};
    std::vector<Array> grads{Array::scalar(1.0f)};
    AdamState state = AdamState::init(params);
    auto out = adam_step(params, grads, state, 0.1f);
    CHECK(out.params[0][0] == Catch::Approx(1.0 - 0.1).margin(1e-6));
    CHECK(out.state.step == 1);
}

TEST_CASE("adam with zero gradients is a fixed point", "[numcore]") {
    std::mt19937_64 rng(3);
    std::vector<Array> params{testutil::random_farray({3, 3}, rng), testutil::random_farray({3}, rng)};
    std::vector<Array> grads{Array::zeros({3, 3}), Array::zeros({3})};
    AdamState state = AdamState::init(params);
    auto out = adam_step(params, grads, state, 0.1f);
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].numel(); ++i) {
            CHECK(std::memcmp(&out.params[p][i], &params[p][i], sizeof(float)) == 0);
        }
    }
    CHECK(out.state.step == 1);
}

TEST_CASE("adam minimizes a convex quadratic", "[numcore]") {
    std::vector<Array> params{Array::scalar(0.0f)};
    AdamState state = AdamState::init(params);
    for (int step = 0; step < 500; ++step) {
        const float x = params[0][0];
        std::vector<Array> grads{Array::scalar(2.0f * (x - 2.0f))};
        auto out = adam_step(params, grads, state, 0.1f);
        params = std::move(out.params);
        state = std::move(out.state);
    }
    CHECK(std::abs(params[0][0] - 2.0f) < 1e-2);
}

TEST_CASE("adam validates shapes and finiteness", "[numcore]") {
    std::vector<Array> params{Array::scalar(1.0f)};
    AdamState state = AdamState::init(params);
    std::vector<Array> bad_shape{Array({2}, {1, 1})};
    CHECK_THROWS_AS(adam_step(params, bad_shape, state, 0.1f), std::invalid_argument);
}

TEST_CASE("lr schedule steps down at the decay boundaries", "[numcore]") {
    LrSchedule sched;
    CHECK(lr_at(sched, 0) == Catch::Approx(0.03));
    CHECK(lr_at(sched, 49) == Catch::Approx(0.03));
    CHECK(lr_at(sched, 50) == Catch::Approx(0.003));
    CHECK(lr_at(sched, 80) == Catch::Approx(0.0003));
    CHECK(lr_at(sched, 99) == Catch::Approx(0.0003));
    CHECK_THROWS_AS(lr_at(sched, 100), std::invalid_argument);
    for (int e = 1; e < 100; ++e) {
        CHECK(lr_at(sched, e) <= lr_at(sched, e - 1));
        CHECK(lr_at(sched, e) > 0.0);
    }
}
