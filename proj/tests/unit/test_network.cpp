#include <cmath>
#include <cstring>

#include "doctest.h"
#include "slicing/nn/grad_check.hpp"
#include "slicing/nn/network.hpp"
#include "slicing/rng.hpp"

using namespace slicing;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

GradCheckReport check_net(const Network& net, std::size_t batch, std::uint64_t seed) {
    Shape in{batch};
    in.insert(in.end(), net.input_shape().begin(), net.input_shape().end());
    Shape out{batch};
    out.insert(out.end(), net.output_shape().begin(), net.output_shape().end());
    GradCheckOptions opt;
    opt.seed = seed;
    return grad_check(net, random_tensor(in, seed + 1), random_linear_loss(out, seed + 2), opt);
}

}  // namespace

TEST_CASE("conv2d output shape follows the layer algebra") {
    Network net({1, 32, 32}, {LayerSpec::conv2d(1, 8, 3, 2, 1)}, {7});
    CHECK(net.output_shape() == Shape{8, 16, 16});
    auto out = infer(net, random_tensor({2, 1, 32, 32}, 3));
    CHECK(out.shape() == Shape{2, 8, 16, 16});
}

TEST_CASE("relu zeroes an all-negative tensor") {
    Network net({5}, {LayerSpec::relu()}, {});
    auto out = infer(net, random_tensor({3, 5}, 1, -2.0, -0.1));
    CHECK(out.max_abs() == 0.0);
}

TEST_CASE("dense with identity weights and zero bias is the identity") {
    Network net({3}, {LayerSpec::dense(3, 3)}, {1});
    auto& w = net.mutable_params().at(Network::weight_name(0));
    w.fill(0.0);
    for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
    auto x = random_tensor({2, 3}, 5);
    CHECK(infer(net, x) == x);
}

TEST_CASE("shape mismatches are rejected with the layer index") {
    CHECK_THROWS_AS(Network({4}, {LayerSpec::dense(4, 3), LayerSpec::relu(), LayerSpec::dense(4, 2)}, {}),
                    ShapeError);
    try {
        Network({4}, {LayerSpec::dense(4, 3), LayerSpec::relu(), LayerSpec::dense(4, 2)}, {});
    } catch (const ShapeError& e) {
        CHECK(e.layer_index() == 2);
    }
    Network net({4}, {LayerSpec::dense(4, 3)}, {});
    try {
        (void)forward_pass(net, Tensor({1, 5}));
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(e.layer_index() == 0);
    }
    CHECK_THROWS_AS(Network({1, 2, 2}, {LayerSpec::conv2d(1, 1, 5, 1, 0)}, {}), ShapeError);
}

TEST_CASE("forward_pass is bitwise deterministic") {
    Network net({1, 8, 8}, {LayerSpec::conv2d(1, 2, 3, 1, 1), LayerSpec::relu(), LayerSpec::flatten(),
                            LayerSpec::dense(128, 4)},
                {11});
    auto x = random_tensor({3, 1, 8, 8}, 2);
    auto a = forward_pass(net, x).output;
    auto b = forward_pass(net, x).output;
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("gradient check passes for every layer kind") {
    SUBCASE("dense") { CHECK(check_net(Network({3}, {LayerSpec::dense(3, 4)}, {1}), 2, 10).passed); }
    SUBCASE("conv2d") {
        Network net({2, 5, 5}, {LayerSpec::conv2d(2, 3, 3, 2, 1)}, {2});
        auto r = check_net(net, 2, 20);
        CHECK(r.passed);
        CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("relu") {
        Network net({6}, {LayerSpec::dense(6, 6), LayerSpec::relu()}, {3});
        CHECK(check_net(net, 3, 30).passed);
    }
    SUBCASE("flatten") {
        Network net({2, 3, 3}, {LayerSpec::flatten(), LayerSpec::dense(18, 2)}, {4});
        CHECK(check_net(net, 2, 40).passed);
    }
    SUBCASE("stacked") {
        Network net({1, 6, 6}, {LayerSpec::conv2d(1, 2, 3, 2, 1), LayerSpec::relu(), LayerSpec::flatten(),
                                LayerSpec::dense(18, 5), LayerSpec::relu(), LayerSpec::dense(5, 3)},
                    {5});
        auto r = check_net(net, 2, 50);
        CHECK(r.passed);
        CHECK(r.entries.size() == net.params().size() + 1);
    }
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
    Network net({4}, {LayerSpec::dense(4, 5), LayerSpec::relu(), LayerSpec::dense(5, 2)}, {9});
    auto f = forward_pass(net, random_tensor({2, 4}, 1));
    auto g = backward_pass(net, f.tape, Tensor({2, 2}, 0.0));
    for (const auto& [name, t] : g.params) CHECK(t.max_abs() == 0.0);
    CHECK(g.input.max_abs() == 0.0);
}

TEST_CASE("dense 2x2 gradient equals the hand expansion") {
    Network net({2}, {LayerSpec::dense(2, 2)}, {0});
    auto& p = net.mutable_params();
    p.at("layer0.weight") = Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0});
    p.at("layer0.bias") = Tensor({2}, {0.5, -0.5});
    const double x1 = 0.3, x2 = -0.7, g1 = 1.5, g2 = -2.0;
    auto f = forward_pass(net, Tensor({1, 2}, {x1, x2}));
    CHECK(f.output[0] == doctest::Approx(1.0 * x1 + 2.0 * x2 + 0.5));
    auto g = backward_pass(net, f.tape, Tensor({1, 2}, {g1, g2}));
    const auto& dw = g.params.at("layer0.weight");
    CHECK(dw[0] == doctest::Approx(g1 * x1));
    CHECK(dw[1] == doctest::Approx(g1 * x2));
    CHECK(dw[2] == doctest::Approx(g2 * x1));
    CHECK(dw[3] == doctest::Approx(g2 * x2));
    CHECK(g.params.at("layer0.bias")[1] == doctest::Approx(g2));
    CHECK(g.input[0] == doctest::Approx(g1 * 1.0 + g2 * 3.0));
    CHECK(g.input[1] == doctest::Approx(g1 * 2.0 + g2 * 4.0));
}

TEST_CASE("stale or foreign tapes are rejected") {
    Network net({3}, {LayerSpec::dense(3, 2)}, {1});
    Network other({3}, {LayerSpec::dense(3, 2)}, {1});
    auto f = forward_pass(net, random_tensor({1, 3}, 2));
    CHECK_THROWS_AS(backward_pass(other, f.tape, Tensor({1, 2})), std::invalid_argument);
    CHECK_THROWS_AS(backward_pass(net, f.tape, Tensor({1, 3})), ShapeError);
    net.mutable_params();
    CHECK_THROWS_AS(backward_pass(net, f.tape, Tensor({1, 2})), std::invalid_argument);
}

TEST_CASE("grad_check on a network with no layers passes vacuously") {
    Network net({4}, {}, {});
    auto r = grad_check(net, random_tensor({1, 4}, 1), random_linear_loss({1, 4}, 2));
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-9);
}

TEST_CASE("grad_check catches an off-by-transpose dense backward") {
    Network net({4}, {LayerSpec::dense(4, 4)}, {3});
    BackwardFn corrupted = [](const Network& n, const Tape& t, const Tensor& dy) {
        auto g = backward_pass(n, t, dy);
        auto& dw = g.params.at("layer0.weight");
        Tensor tr = dw;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) tr[i * 4 + j] = dw[j * 4 + i];
        dw = tr;
        return g;
    };
    GradCheckOptions opt;
    opt.probes = 16;
    auto r = grad_check(net, random_tensor({1, 4}, 4), random_linear_loss({1, 4}, 5), opt, corrupted);
    CHECK_FALSE(r.passed);
    CHECK(r.max_rel_error > 1e-1);
}

TEST_CASE("chain composes two networks") {
    Network a({3}, {LayerSpec::dense(3, 4), LayerSpec::relu()}, {1});
    Network b({4}, {LayerSpec::dense(4, 2)}, {2});
    Network ab = Network::chain(a, b);
    auto x = random_tensor({2, 3}, 3);
    CHECK(infer(ab, x) == infer(b, infer(a, x)));
    CHECK_THROWS_AS(Network::chain(b, a), ShapeError);
}
