#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "lle/loss.hpp"
#include "lle/tensor.hpp"

namespace lle {

// Shift making softplus(bias=1) emit exactly h = 1 at initialization.
inline double softplus_shift() { return std::log(std::exp(1.0) - 1.0) - 1.0; }

struct LayerSpec {
    int in_channels = 0;
    int out_channels = 0;
};

struct NetConfig {
    std::vector<LayerSpec> layers;  // 3x3 kernels, stride 1, ReLU between layers
    int seed = 0;
};

// 6 conv layers, 3->16->16->16->16->16->3, 10163 parameters.
inline NetConfig default_net_config(int seed = 0) {
    NetConfig c;
    c.layers = {{3, 16}, {16, 16}, {16, 16}, {16, 16}, {16, 16}, {16, 3}};
    c.seed = seed;
    return c;
}

inline constexpr size_t kMaxParamCount = 12000;

template <typename T>
struct ParamStoreT {
    struct Entry {
        std::string name;
        TensorT<T> value;
        TensorT<T> grad;
    };
    std::vector<Entry> entries;
    NetConfig config;

    size_t total_count() const {
        size_t n = 0;
        for (const auto& e : entries) n += e.value.size();
        return n;
    }
    void zero_grads() {
        for (auto& e : entries) e.grad.data.assign(e.grad.size(), T(0));
    }
};

using ParamStore = ParamStoreT<float>;

template <typename T>
size_t count_params(const ParamStoreT<T>& store) {
    return store.total_count();
}

// He fan-in init; biases zero except the final layer bias, which starts
// at 1 so the untrained network is the identity enhancer (h == 1).
template <typename T>
ParamStoreT<T> init_params(const NetConfig& config, int seed) {
    if (config.layers.empty() || config.layers.front().in_channels != 3 ||
        config.layers.back().out_channels != 3)
        throw std::invalid_argument("init_params: config must map 3 -> 3 channels");
    for (size_t i = 1; i < config.layers.size(); ++i)
        if (config.layers[i].in_channels != config.layers[i - 1].out_channels)
            throw std::invalid_argument("init_params: channel chain mismatch");

    ParamStoreT<T> store;
    store.config = config;
    store.config.seed = seed;
    std::mt19937 rng(static_cast<unsigned>(seed));
    for (size_t l = 0; l < config.layers.size(); ++l) {
        const auto& spec = config.layers[l];
        const bool last = l + 1 == config.layers.size();
        // The output head gets a 0.1 gain so the initial h map stays close
        // to the bias-driven value of 1 (identity enhancement).
        const double stddev = (last ? 0.1 : 1.0) * std::sqrt(2.0 / (9.0 * spec.in_channels));
        std::normal_distribution<double> dist(0.0, stddev);

        typename ParamStoreT<T>::Entry w;
        w.name = "conv" + std::to_string(l) + ".w";
        w.value = TensorT<T>({spec.out_channels, 3, 3, spec.in_channels});
        for (auto& v : w.value.data) v = static_cast<T>(dist(rng));
        w.grad = TensorT<T>(w.value.shape);
        store.entries.push_back(std::move(w));

        typename ParamStoreT<T>::Entry b;
        b.name = "conv" + std::to_string(l) + ".b";
        b.value = TensorT<T>({spec.out_channels}, last ? T(1) : T(0));
        b.grad = TensorT<T>(b.value.shape);
        store.entries.push_back(std::move(b));
    }
    if (store.total_count() > kMaxParamCount)
        throw std::invalid_argument("init_params: parameter budget exceeded (" +
                                    std::to_string(store.total_count()) + ")");
    return store;
}

template <typename T>
struct NetForwardT {
    typename TapeT<T>::NodeId h;                       // strictly positive {H,W,3}
    std::vector<std::pair<size_t, typename TapeT<T>::NodeId>> param_nodes;
};

// Runs the estimator on an inverted image node; records the tape.
template <typename T>
NetForwardT<T> net_forward(TapeT<T>& tape, const ParamStoreT<T>& store,
                           typename TapeT<T>::NodeId input) {
    if (tape.value(input).shape.size() != 3 || tape.value(input).shape[2] != 3)
        throw std::invalid_argument("net_forward: expected {H,W,3} input");
    NetForwardT<T> fw;
    auto x = input;
    const size_t n_layers = store.entries.size() / 2;
    for (size_t l = 0; l < n_layers; ++l) {
        auto wid = tape.leaf(store.entries[2 * l].value, true);
        auto bid = tape.leaf(store.entries[2 * l + 1].value, true);
        fw.param_nodes.emplace_back(2 * l, wid);
        fw.param_nodes.emplace_back(2 * l + 1, bid);
        x = tape.bias_add(tape.conv2d(x, wid), bid);
        if (l + 1 < n_layers)
            x = tape.relu(x);
        else
            x = tape.softplus(x, static_cast<T>(softplus_shift()));
    }
    fw.h = x;
    return fw;
}

// Adds the tape's parameter gradients into the store slots, in entry order.
template <typename T>
void accumulate_grads(const TapeT<T>& tape, const NetForwardT<T>& fw, ParamStoreT<T>& store) {
    for (const auto& [idx, node] : fw.param_nodes) {
        const TensorT<T>& g = tape.grad(node);
        auto& slot = store.entries[idx].grad;
        for (size_t i = 0; i < g.size(); ++i) slot.data[i] += g.data[i];
    }
}

enum class LossKind { L1, Brightness, Smooth, Ssim, Total };

LossKind parse_loss_kind(const std::string& name);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    size_t worst_index = 0;
    bool pass = false;
    double tolerance = 0.0;
};

template <typename A, typename B>
ParamStoreT<B> cast_params(const ParamStoreT<A>& src) {
    ParamStoreT<B> dst;
    dst.config = src.config;
    for (const auto& e : src.entries) {
        typename ParamStoreT<B>::Entry out;
        out.name = e.name;
        out.value = TensorT<B>(e.value.shape);
        for (size_t i = 0; i < e.value.size(); ++i)
            out.value.data[i] = static_cast<B>(e.value.data[i]);
        out.grad = TensorT<B>(e.value.shape);
        dst.entries.push_back(std::move(out));
    }
    return dst;
}

// Builds the full invert->net->apply-h->re-invert->loss chain on a random
// HxWx3 instance and compares every parameter gradient against central
// finite differences. The difference quotient is always evaluated in double
// so the oracle is not limited by the precision under test. `corrupt`
// injects a deliberate error (negative control).
template <typename T>
GradCheckReport grad_check(const NetConfig& config, LossKind kind, int trials,
                           const LossWeights& weights, int hw = 8, bool corrupt = false) {
    if (trials < 1) throw std::invalid_argument("grad_check: trials must be >= 1");
    const bool is_double = sizeof(T) == 8;
    const double step = is_double ? 3e-5 : 1e-3;
    const double tol = is_double ? 1e-6 : 1e-3;

    GradCheckReport report;
    report.tolerance = tol;
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> ud(0.05, 0.95);

    for (int trial = 0; trial < trials; ++trial) {
        ParamStoreT<T> store = init_params<T>(config, 1000 + trial);
        TensorT<T> inverted({hw, hw, 3});
        TensorT<T> y_g({hw, hw, 3});
        for (auto& v : inverted.data) v = static_cast<T>(ud(rng));
        for (auto& v : y_g.data) v = static_cast<T>(ud(rng));

        auto eval = [&]<typename U>(TapeT<U>& tape, const ParamStoreT<U>& params,
                                    const TensorT<U>& inv, const TensorT<U>& target,
                                    bool do_backward) -> std::pair<double, NetForwardT<U>> {
            auto in = tape.constant(inv);
            auto fw = net_forward(tape, params, in);
            // B = h*(I'-1) + 1; y_p = 1 - B
            auto b = tape.add_scalar(tape.mul(fw.h, tape.add_scalar(tape.constant(inv), U(-1))), U(1));
            auto y_p = tape.rsub_scalar(U(1), b);
            typename TapeT<U>::NodeId loss;
            switch (kind) {
                case LossKind::L1: loss = l1_loss_node(tape, y_p, target); break;
                case LossKind::Brightness:
                    loss = brightness_loss_node(tape, y_p, target, weights.gamma1, weights.gamma2);
                    break;
                case LossKind::Smooth: loss = smooth_loss_node(tape, y_p, target, weights); break;
                case LossKind::Ssim: loss = ssim_loss_node(tape, y_p, target, weights); break;
                default: loss = total_loss_node(tape, y_p, target, weights).total; break;
            }
            if (do_backward) tape.backward(loss);
            return {static_cast<double>(tape.value(loss).data[0]), std::move(fw)};
        };

        TapeT<T> tape;
        store.zero_grads();
        auto [base, fw] = eval(tape, store, inverted, y_g, true);
        (void)base;
        accumulate_grads(tape, fw, store);

        ParamStoreT<double> dstore = cast_params<T, double>(store);
        TensorT<double> dinv({hw, hw, 3}), dtarget({hw, hw, 3});
        for (size_t i = 0; i < inverted.size(); ++i) {
            dinv.data[i] = static_cast<double>(inverted.data[i]);
            dtarget.data[i] = static_cast<double>(y_g.data[i]);
        }
        if (corrupt && !store.entries.empty() && !store.entries[0].grad.data.empty())
            store.entries[0].grad.data[0] += T(1);

        double gmax = 0.0;
        for (const auto& e : store.entries)
            for (const T g : e.grad.data) gmax = std::max(gmax, std::fabs(static_cast<double>(g)));

        for (size_t pi = 0; pi < store.entries.size(); ++pi) {
            const auto& entry = store.entries[pi];
            auto& dentry = dstore.entries[pi];
            for (size_t i = 0; i < entry.value.size(); ++i) {
                const double saved = dentry.value.data[i];
                const double an = static_cast<double>(entry.grad.data[i]);
                auto fd_at = [&](double h) {
                    dentry.value.data[i] = saved + h;
                    TapeT<double> tp;
                    const double lp = eval(tp, dstore, dinv, dtarget, false).first;
                    dentry.value.data[i] = saved - h;
                    TapeT<double> tm;
                    const double lm = eval(tm, dstore, dinv, dtarget, false).first;
                    dentry.value.data[i] = saved;
                    return (lp - lm) / (2.0 * h);
                };

                double fd = fd_at(step);
                double denom = std::max({std::fabs(an), std::fabs(fd), 0.01 * gmax,
                                         is_double ? 1e-10 : 1e-5});
                double rel = std::fabs(an - fd) / denom;
                // A wide central difference straddling a ReLU/abs kink is not
                // a valid derivative estimate; shrink the step and keep the
                // comparison only if it still disagrees.
                for (double h = step / 8.0; rel > tol && h > step / 1024.0; h /= 8.0) {
                    fd = fd_at(h);
                    denom = std::max({std::fabs(an), std::fabs(fd), 0.01 * gmax,
                                      is_double ? 1e-10 : 1e-5});
                    rel = std::fabs(an - fd) / denom;
                }
                if (rel > report.max_rel_error) {
                    report.max_rel_error = rel;
                    report.worst_param = entry.name;
                    report.worst_index = i;
                }
            }
        }
    }
    report.pass = report.max_rel_error < tol;
    return report;
}

}  // namespace lle
