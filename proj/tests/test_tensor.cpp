#include <cmath>
#include <random>

#include "doctest.h"
#include "painscope/errors.hpp"
#include "painscope/rng.hpp"
#include "support.hpp"

using namespace painscope;
using testing::check_gradients;
using testing::random_away_from_zero;
using testing::random_tensor;

namespace {

Tensor make(Shape shape, std::vector<double> values) {
    return Tensor(std::move(shape), std::move(values));
}

Tensor forward_value(const std::function<Var(Tape&)>& f) {
    Tape tape;
    return tape.value(f(tape));
}

/// Weighted sum against fixed random weights, so every output element gets a
/// distinct upstream gradient.
Var probe(Tape& tape, Var y, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    const Tensor w = random_tensor(tape.value(y).shape(), gen);
    return sum(tape, mul(tape, y, tape.constant(w)));
}

} // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t(Shape{2, 3, 4}, 1.5);
    CHECK(t.size() == 24);
    CHECK(t.at(1, 2, 3) == 1.5);
    CHECK(t.reshaped({24}).rank() == 1);
    CHECK_THROWS_AS(t.reshaped({5}), DimensionError);
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
    CHECK(t.all_finite());
    t[0] = NAN;
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("conv2d forward") {
    SUBCASE("identity kernel") {
        const Tensor out = forward_value([](Tape& t) {
            return conv2d(t, t.constant(Tensor(Shape{1, 3, 3}, 1.0)),
                          t.constant(Tensor(Shape{1, 1, 1, 1}, 1.0)), t.constant(Tensor(Shape{1})), 1, 0);
        });
        CHECK(out.shape() == Shape{1, 3, 3});
        for (double v : out.values()) CHECK(v == 1.0);
    }
    SUBCASE("stride 2 shape") {
        const Tensor out = forward_value([](Tape& t) {
            return conv2d(t, t.constant(Tensor(Shape{1, 4, 4}, 1.0)),
                          t.constant(Tensor(Shape{1, 1, 2, 2}, 1.0)), t.constant(Tensor(Shape{1})), 2, 0);
        });
        CHECK(out.shape() == Shape{1, 2, 2});
        CHECK(out[0] == 4.0);
    }
    SUBCASE("same padding keeps the extent and zero-pads") {
        const Tensor out = forward_value([](Tape& t) {
            return conv2d(t, t.constant(Tensor(Shape{1, 3, 3}, 1.0)),
                          t.constant(Tensor(Shape{1, 1, 3, 3}, 1.0)), t.constant(Tensor(Shape{1}, 0.5)), 1, 1);
        });
        CHECK(out.shape() == Shape{1, 3, 3});
        CHECK(out.at(0, 0, 0) == 4.5);
        CHECK(out.at(0, 1, 1) == 9.5);
    }
    SUBCASE("channel mismatch") {
        Tape t;
        CHECK_THROWS_AS(conv2d(t, t.constant(Tensor(Shape{2, 3, 3})), t.constant(Tensor(Shape{1, 1, 1, 1})),
                               t.constant(Tensor(Shape{1})), 1, 0),
                        DimensionError);
        CHECK_THROWS_AS(conv2d(t, t.constant(Tensor(Shape{1, 2, 2})), t.constant(Tensor(Shape{1, 1, 3, 3})),
                               t.constant(Tensor(Shape{1})), 1, 0),
                        DimensionError);
    }
}

TEST_CASE("maxpool2d forward and ties") {
    CHECK(forward_value([](Tape& t) {
              return maxpool2d(t, t.constant(make({1, 2, 2}, {1, 2, 3, 4})), 2, 2);
          }).values()[0] == 4.0);
    const Tensor flat = forward_value([](Tape& t) {
        return maxpool2d(t, t.constant(Tensor(Shape{2, 4, 4}, 0.7)), 2, 2);
    });
    for (double v : flat.values()) CHECK(v == 0.7);

    Tape tape;
    const Var x = tape.variable(make({1, 2, 2}, {5, 5, 5, 5}));
    backward(tape, sum(tape, maxpool2d(tape, x, 2, 2)));
    const auto g = tape.grad(x);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
    CHECK(g[3] == 0.0);

    Tape bad;
    CHECK_THROWS_AS(maxpool2d(bad, bad.constant(Tensor(Shape{1, 2, 2})), 3, 1), DimensionError);
}

TEST_CASE("relu") {
    const Tensor out = forward_value([](Tape& t) { return relu(t, t.constant(make({3}, {-1, 0, 2}))); });
    CHECK(out.storage() == std::vector<double>{0, 0, 2});
    Tape tape;
    const Var x = tape.variable(make({2}, {3, -3}));
    backward(tape, sum(tape, relu(tape, x)));
    CHECK(tape.grad(x)[0] == 1.0);
    CHECK(tape.grad(x)[1] == 0.0);
}

TEST_CASE("dense") {
    CHECK(forward_value([](Tape& t) {
              return dense(t, t.constant(make({2}, {3, 4})), t.constant(make({1, 2}, {1, 2})),
                           t.constant(make({1}, {1})));
          }).values()[0] == 12.0);
    const Tensor id = forward_value([](Tape& t) {
        return dense(t, t.constant(make({2}, {0.25, -7})), t.constant(make({2, 2}, {1, 0, 0, 1})),
                     t.constant(Tensor(Shape{2})));
    });
    CHECK(id.storage() == std::vector<double>{0.25, -7});
    Tape t;
    CHECK_THROWS_AS(dense(t, t.constant(Tensor(Shape{3})), t.constant(Tensor(Shape{1, 2})),
                          t.constant(Tensor(Shape{1}))),
                    DimensionError);
}

TEST_CASE("softmax") {
    auto sm = [](std::vector<double> v) { return softmax(std::span<const double>(v)); };
    CHECK(sm({0, 0}) == std::vector<double>{0.5, 0.5});
    for (double c : {-50.0, 0.0, 3.0, 700.0}) {
        const auto p = sm({c, c + std::log(3.0)});
        CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
    }
    const std::vector<double> x{2, -1, 0.5};
    const auto p = sm(x);
    const double z = std::exp(2.0) + std::exp(-1.0) + std::exp(0.5);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(p[i] - std::exp(x[i]) / z) <= 1e-12);
    }
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor logits = random_tensor({4}, gen, -20, 20);
        std::vector<double> shifted(logits.storage());
        for (auto& v : shifted) v += 13.25;
        const auto a = sm(logits.storage());
        const auto b = sm(shifted);
        double total = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            total += a[i];
            CHECK(a[i] > 0.0);
            CHECK(std::abs(a[i] - b[i]) <= 1e-9);
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }
}

TEST_CASE("cross entropy against soft targets") {
    CHECK(cross_entropy_soft({0, 1}, {0, 1}) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(cross_entropy_soft({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    const double hand = -(0.15 * std::log(0.3) + 0.85 * std::log(0.7));
    CHECK(std::abs(cross_entropy_soft({0.3, 0.7}, {0.15, 0.85}) - hand) <= 1e-6);
    CHECK(std::abs(hand - 0.4838) <= 1e-4);
    CHECK(std::isfinite(cross_entropy_soft({1, 0}, {0, 1})));
    CHECK(cross_entropy_soft({0.2, 0.8}, {0, 1}) >= 0.0);
}

TEST_CASE("backward basics") {
    SUBCASE("sum") {
        Tape tape;
        const Var x = tape.variable(Tensor(Shape{5}, 2.0));
        backward(tape, sum(tape, x));
        for (double g : tape.grad(x)) CHECK(g == 1.0);
    }
    SUBCASE("product rule") {
        Tape tape;
        const Var x = tape.variable(Tensor::scalar(3.0));
        const Var y = tape.variable(Tensor::scalar(-2.0));
        backward(tape, mul(tape, x, y));
        CHECK(tape.grad(x)[0] == -2.0);
        CHECK(tape.grad(y)[0] == 3.0);
    }
    SUBCASE("non-scalar loss") {
        Tape tape;
        const Var x = tape.variable(Tensor(Shape{2}));
        CHECK_THROWS_AS(backward(tape, x), ContractError);
    }
    SUBCASE("fan-out accumulates and each op is visited once") {
        Tape tape;
        const Var x = tape.variable(make({3}, {1, 2, 3}));
        const Var y = mul(tape, x, x);
        const Var loss = add(tape, sum(tape, y), sum(tape, x));
        backward(tape, loss);
        for (std::size_t i = 0; i < 3; ++i) CHECK(tape.grad(x)[i] == 2 * (i + 1.0) + 1);
        for (int v : tape.visit_counts()) CHECK(v == 1);
    }
    SUBCASE("gradient of L1 + L2 is the sum of the separate gradients") {
        std::mt19937_64 gen(11);
        const Tensor xv = random_tensor({2, 5, 5}, gen);
        const Tensor k = random_tensor({3, 2, 3, 3}, gen);
        auto grads = [&](int which) {
            Tape tape;
            const Var x = tape.variable(xv);
            const Var y = conv2d(tape, x, tape.constant(k), tape.constant(Tensor(Shape{3})), 1, 1);
            const Var l1 = probe(tape, y, 1), l2 = probe(tape, relu(tape, y), 2);
            backward(tape, which == 0 ? add(tape, l1, l2) : which == 1 ? l1 : l2);
            return std::vector<double>(tape.grad(x).begin(), tape.grad(x).end());
        };
        const auto both = grads(0), a = grads(1), b = grads(2);
        for (std::size_t i = 0; i < both.size(); ++i) CHECK(std::abs(both[i] - (a[i] + b[i])) <= 1e-9);
    }
}

TEST_CASE("forward determinism") {
    std::mt19937_64 gen(5);
    const Tensor x = random_tensor({2, 7, 7}, gen), k = random_tensor({3, 2, 3, 3}, gen);
    auto run = [&] {
        return forward_value([&](Tape& t) {
            return relu(t, conv2d(t, t.constant(x), t.constant(k), t.constant(Tensor(Shape{3})), 1, 1));
        });
    };
    CHECK(run() == run());
}

TEST_CASE("finite-difference gradients per op") {
    std::mt19937_64 gen(2024);
    SUBCASE("conv2d input and kernels") {
        for (int stride : {1, 2}) {
            for (int pad : {0, 1}) {
                const auto r = check_gradients(
                    [&](Tape& t, const std::vector<Var>& v) {
                        return probe(t, conv2d(t, v[0], v[1], v[2], stride, pad), 7);
                    },
                    {random_tensor({2, 5, 5}, gen), random_tensor({3, 2, 3, 3}, gen), random_tensor({3}, gen)},
                    gen);
                CHECK(r.max_error <= 1e-4);
            }
        }
    }
    SUBCASE("maxpool2d away from ties") {
        const auto r = check_gradients(
            [](Tape& t, const std::vector<Var>& v) { return probe(t, maxpool2d(t, v[0], 2, 2), 8); },
            {random_tensor({1, 6, 6}, gen)}, gen);
        CHECK(r.max_error <= 1e-4);
    }
    SUBCASE("dense 8 -> 4") {
        const auto r = check_gradients(
            [](Tape& t, const std::vector<Var>& v) { return probe(t, dense(t, v[0], v[1], v[2]), 9); },
            {random_tensor({8}, gen), random_tensor({4, 8}, gen), random_tensor({4}, gen)}, gen);
        CHECK(r.max_error <= 1e-4);
    }
    SUBCASE("relu away from the kink") {
        const auto r = check_gradients(
            [](Tape& t, const std::vector<Var>& v) { return probe(t, relu(t, v[0]), 10); },
            {random_away_from_zero({12}, gen)}, gen);
        CHECK(r.max_error <= 1e-4);
    }
    SUBCASE("softmax + soft cross entropy") {
        const auto r = check_gradients(
            [](Tape& t, const std::vector<Var>& v) {
                return cross_entropy_soft(t, softmax(t, v[0]), LabelDistribution{0.15, 0.85});
            },
            {random_tensor({2}, gen, -3, 3)}, gen);
        CHECK(r.max_error <= 1e-4);
    }
    SUBCASE("concat and flatten") {
        const auto r = check_gradients(
            [](Tape& t, const std::vector<Var>& v) {
                const Var parts[] = {v[0], v[1]};
                return probe(t, flatten(t, concat_channels(t, parts)), 12);
            },
            {random_tensor({1, 3, 3}, gen), random_tensor({2, 3, 3}, gen)}, gen);
        CHECK(r.max_error <= 1e-4);
    }
}

TEST_CASE("dropout") {
    Rng rng(4);
    Tape tape;
    const Var x = tape.constant(Tensor(Shape{1000}, 1.0));
    const Tensor eval = tape.value(dropout(tape, x, 0.5, false, &rng));
    for (double v : eval.values()) CHECK(v == 1.0);
    const Tensor train = tape.value(dropout(tape, x, 0.5, true, &rng));
    int kept = 0;
    for (double v : train.values()) {
        CHECK((v == 0.0 || v == 2.0));
        kept += v != 0.0;
    }
    CHECK(kept > 400);
    CHECK(kept < 600);
    CHECK_THROWS_AS(dropout(tape, x, 1.0, true, &rng), ContractError);
}
