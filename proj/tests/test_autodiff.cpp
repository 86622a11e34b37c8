#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "lle/loss.hpp"
#include "lle/net.hpp"
#include "lle/tensor.hpp"

using namespace lle;

namespace {

using DTensor = TensorT<double>;
using DTape = TapeT<double>;

DTensor random_tensor(std::vector<int> shape, std::mt19937& rng, double lo = -1.0, double hi = 1.0) {
    DTensor t(std::move(shape));
    std::uniform_real_distribution<double> ud(lo, hi);
    for (auto& v : t.data) v = ud(rng);
    return t;
}

// Central finite differences of a scalar-valued builder over every element
// of every input tensor, compared against one reverse sweep.
void check_op(const std::vector<DTensor>& inputs,
              const std::function<DTape::NodeId(DTape&, const std::vector<DTape::NodeId>&)>& build,
              double step = 1e-6, double tol = 1e-6) {
    auto eval = [&](const std::vector<DTensor>& xs) {
        DTape tape;
        std::vector<DTape::NodeId> ids;
        for (const auto& x : xs) ids.push_back(tape.leaf(x, true));
        return tape.value(build(tape, ids)).data[0];
    };

    DTape tape;
    std::vector<DTape::NodeId> ids;
    for (const auto& x : inputs) ids.push_back(tape.leaf(x, true));
    tape.backward(build(tape, ids));

    for (size_t t = 0; t < inputs.size(); ++t) {
        for (size_t i = 0; i < inputs[t].size(); ++i) {
            std::vector<DTensor> xs = inputs;
            xs[t].data[i] += step;
            const double lp = eval(xs);
            xs[t].data[i] -= 2.0 * step;
            const double lm = eval(xs);
            const double fd = (lp - lm) / (2.0 * step);
            const double an = tape.grad(ids[t]).data[i];
            const double denom = std::max({std::fabs(an), std::fabs(fd), 1.0});
            CHECK(std::fabs(an - fd) / denom < tol);
        }
    }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    std::mt19937 rng(1);
    DTensor x = random_tensor({5, 4, 2}, rng);
    DTensor w = random_tensor({3, 3, 3, 2}, rng);
    check_op({x, w}, [](DTape& t, const std::vector<DTape::NodeId>& in) {
        return t.mean(t.conv2d(in[0], in[1]));
    });
    // a nonlinear head exercises the data path too
    check_op({x, w}, [](DTape& t, const std::vector<DTape::NodeId>& in) {
        auto y = t.conv2d(in[0], in[1]);
        return t.mean(t.mul(y, y));
    });
}

TEST_CASE("bias_add gradients match finite differences") {
    std::mt19937 rng(2);
    DTensor x = random_tensor({4, 4, 3}, rng);
    DTensor b = random_tensor({3}, rng);
    check_op({x, b}, [](DTape& t, const std::vector<DTape::NodeId>& in) {
        auto y = t.bias_add(in[0], in[1]);
        return t.mean(t.mul(y, y));
    });
}

TEST_CASE("relu gradients match finite differences away from the kink") {
    std::mt19937 rng(3);
    DTensor x = random_tensor({6, 6, 2}, rng);
    for (auto& v : x.data)
        if (std::fabs(v) < 1e-3) v = 0.1;  // keep clear of the nondifferentiable point
    check_op({x}, [](DTape& t, const std::vector<DTape::NodeId>& in) {
        auto y = t.relu(in[0]);
        return t.mean(t.mul(y, y));
    });
}

TEST_CASE("softplus gradients match finite differences") {
    std::mt19937 rng(4);
    DTensor x = random_tensor({4, 4, 2}, rng, -3.0, 3.0);
    const double shift = softplus_shift();
    check_op({x}, [shift](DTape& t, const std::vector<DTape::NodeId>& in) {
        auto y = t.softplus(in[0], shift);
        return t.mean(t.mul(y, y));
    });
}

TEST_CASE("elementwise arithmetic gradients match finite differences") {
    std::mt19937 rng(5);
    DTensor a = random_tensor({3, 3, 2}, rng);
    DTensor b = random_tensor({3, 3, 2}, rng, 0.5, 2.0);  // keep divisor away from zero
    check_op({a, b}, [](DTape& t, const std::vector<DTape::NodeId>& in) {
        auto sum = t.add(in[0], in[1]);
        auto diff = t.sub(in[0], in[1]);
        auto prod = t.mul(sum, diff);
        return t.mean(t.div(prod, in[1]));
    });
}

TEST_CASE("scalar op gradients match finite differences") {
    std::mt19937 rng(6);
    DTensor x = random_tensor({4, 4, 1}, rng, 0.1, 0.9);
    check_op({x}, [](DTape& t, const std::vector<DTape::NodeId>& in) {
        auto y = t.mul_scalar(t.add_scalar(in[0], 0.3), 1.7);
        auto z = t.rsub_scalar(2.0, y);
        return t.mean(t.pow_scalar(z, 1.15));
    });
}

TEST_CASE("abs gradients match finite differences away from zero") {
    std::mt19937 rng(7);
    DTensor x = random_tensor({5, 5, 1}, rng);
    for (auto& v : x.data)
        if (std::fabs(v) < 1e-3) v = 0.2;
    check_op({x}, [](DTape& t, const std::vector<DTape::NodeId>& in) {
        return t.mean(t.abs(in[0]));
    });
}

TEST_CASE("window_filter adjoint matches finite differences") {
    std::mt19937 rng(8);
    DTensor x = random_tensor({6, 6, 2}, rng);
    const auto k = gaussian_kernel_1d(1.5, 2);
    check_op({x}, [&k](DTape& t, const std::vector<DTape::NodeId>& in) {
        auto y = t.window_filter(in[0], k);
        return t.mean(t.mul(y, y));
    });
}

TEST_CASE("mean gradient is uniform") {
    DTape tape;
    DTensor x({2, 2, 1});
    x.data = {1.0, 2.0, 3.0, 4.0};
    auto id = tape.leaf(x, true);
    tape.backward(tape.mean(id));
    for (double g : tape.grad(id).data) CHECK(g == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar root") {
    DTape tape;
    auto id = tape.leaf(DTensor({2, 2, 1}), true);
    CHECK_THROWS(tape.backward(id));
}

TEST_CASE("constants receive no gradient but leaves do") {
    DTape tape;
    DTensor x({1}, 2.0);
    auto c = tape.constant(x);
    auto l = tape.leaf(x, true);
    tape.backward(tape.mean(tape.mul(c, l)));
    CHECK(tape.grad(l).data[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(tape.grad(c).data[0] == 0.0);
}

TEST_CASE("gradient of L1 loss w.r.t. final bias matches the 1x1 chain rule") {
    // One conv layer 3->3 on a 1x1 image: h = softplus(w*x + b + shift),
    // y_p = 1 - (h*(x-1) + 1) = -h*(x-1); d l1 / d b = sign * (1-x) * sigmoid(z) / 3.
    NetConfig config;
    config.layers = {{3, 3}};
    ParamStoreT<double> store = init_params<double>(config, 42);

    DTensor inv({1, 1, 3});
    inv.data = {0.3, 0.5, 0.7};
    DTensor y_g({1, 1, 3});
    y_g.data = {0.6, 0.6, 0.6};

    DTape tape;
    auto in = tape.constant(inv);
    auto fw = net_forward(tape, store, in);
    auto b = tape.add_scalar(tape.mul(fw.h, tape.add_scalar(tape.constant(inv), -1.0)), 1.0);
    auto y_p = tape.rsub_scalar(1.0, b);
    tape.backward(l1_loss_node(tape, y_p, y_g));
    store.zero_grads();
    accumulate_grads(tape, fw, store);

    // Hand derivation per output channel o: with a 1x1 image mirrored padding
    // makes all nine kernel taps see the same pixel, so
    // z_o = sum_k w[o][k]*x[k] summed over the 9 taps, + b_o + shift.
    const auto& w = store.entries[0].value;
    const auto& bias = store.entries[1].value;
    for (int o = 0; o < 3; ++o) {
        double z = bias.data[o] + softplus_shift();
        for (int k = 0; k < 9; ++k)
            for (int c = 0; c < 3; ++c) z += w.data[(o * 9 + k) * 3 + c] * inv.data[c];
        const double h = std::log1p(std::exp(z));
        const double yp = -h * (inv.data[o] - 1.0);
        const double sign = (y_g.data[o] - yp) > 0 ? 1.0 : -1.0;
        const double sig = 1.0 / (1.0 + std::exp(-z));
        const double expected = sign * (inv.data[o] - 1.0) * sig / 3.0;
        CHECK(store.entries[1].grad.data[o] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("parameter counting follows the layer sum") {
    ParamStoreT<float> empty;
    CHECK(count_params(empty) == 0);

    NetConfig one;
    one.layers = {{3, 16}};
    CHECK_THROWS(init_params<float>(one, 0));  // 16 != 3 output channels

    NetConfig pair;
    pair.layers = {{3, 16}, {16, 3}};
    ParamStoreT<float> store = init_params<float>(pair, 0);
    CHECK(count_params(store) == 3 * 3 * 3 * 16 + 16 + 3 * 3 * 16 * 3 + 3);

    ParamStoreT<float> full = init_params<float>(default_net_config(), 0);
    CHECK(count_params(full) >= 10000);
    CHECK(count_params(full) <= 12000);
    CHECK(count_params(full) == 10163);
}

TEST_CASE("freshly initialized network is near the identity enhancer") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    for (int seed = 0; seed < 20; ++seed) {
        ParamStore store = init_params<float>(default_net_config(seed), seed);
        Tensor inv({8, 8, 3});
        for (auto& v : inv.data) v = ud(rng);
        Tape tape;
        auto fw = net_forward(tape, store, tape.constant(inv));
        const Tensor& h = tape.value(fw.h);
        double mean = 0.0;
        for (float v : h.data) {
            CHECK(v > 0.0f);  // softplus output is strictly positive
            mean += v;
        }
        mean /= static_cast<double>(h.size());
        CHECK(std::fabs(mean - 1.0) < 0.25);
    }
}

TEST_CASE("init rejects malformed configs and enforces the budget") {
    NetConfig bad;
    bad.layers = {{3, 16}, {8, 3}};
    CHECK_THROWS(init_params<float>(bad, 0));

    NetConfig huge;
    huge.layers = {{3, 64}, {64, 64}, {64, 3}};
    CHECK_THROWS(init_params<float>(huge, 0));
}

TEST_CASE("full network gradients pass the finite-difference oracle") {
    LossWeights w;
    w.ssim_window = 5;
    NetConfig small;
    small.layers = {{3, 4}, {4, 3}};

    for (LossKind kind : {LossKind::L1, LossKind::Brightness, LossKind::Smooth, LossKind::Ssim,
                          LossKind::Total}) {
        GradCheckReport r = grad_check<double>(small, kind, 1, w, 6);
        INFO("loss kind ", static_cast<int>(kind), " worst ", r.worst_param, " err ", r.max_rel_error);
        CHECK(r.pass);
    }
}

TEST_CASE("corrupted gradients are caught by the checker") {
    LossWeights w;
    w.ssim_window = 5;
    NetConfig small;
    small.layers = {{3, 4}, {4, 3}};
    GradCheckReport r = grad_check<double>(small, LossKind::L1, 1, w, 6, true);
    CHECK_FALSE(r.pass);
}

TEST_CASE("grad_check validates its arguments") {
    CHECK_THROWS(grad_check<float>(default_net_config(), LossKind::L1, 0, LossWeights{}));
}
