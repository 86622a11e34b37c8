#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace lle {

// Dense tensor with a small fixed shape vector. Image activations use
// {H, W, C}; conv weights use {OC, KH, KW, IC}; scalars use {1}.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) {
            if (d < 1) throw std::invalid_argument("TensorT: non-positive dimension");
            n *= static_cast<size_t>(d);
        }
        data.assign(n, fill);
    }
    size_t size() const { return data.size(); }
    bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

inline int tensor_mirror(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

// Separable correlation with a fixed 1D kernel, symmetric padding,
// applied per channel on {H,W,C} tensors. adjoint=true scatters through
// the same mirrored index map (exact transpose of the forward pass).
template <typename T>
TensorT<T> filter_separable(const TensorT<T>& x, const std::vector<double>& k1d, bool adjoint = false) {
    if (x.shape.size() != 3) throw std::invalid_argument("filter_separable: need {H,W,C}");
    const int radius = static_cast<int>(k1d.size() / 2);
    const int h = x.shape[0], w = x.shape[1], c = x.shape[2];
    TensorT<T> tmp({h, w, c});
    TensorT<T> out({h, w, c});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int ch = 0; ch < c; ++ch) {
                if (!adjoint) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += k1d[i + radius] *
                               x.data[(static_cast<size_t>(y) * w + tensor_mirror(xx + i, w)) * c + ch];
                    tmp.data[(static_cast<size_t>(y) * w + xx) * c + ch] = static_cast<T>(acc);
                } else {
                    const T g = x.data[(static_cast<size_t>(y) * w + xx) * c + ch];
                    for (int i = -radius; i <= radius; ++i)
                        tmp.data[(static_cast<size_t>(y) * w + tensor_mirror(xx + i, w)) * c + ch] +=
                            static_cast<T>(k1d[i + radius]) * g;
                }
            }
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int ch = 0; ch < c; ++ch) {
                if (!adjoint) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += k1d[i + radius] *
                               tmp.data[(static_cast<size_t>(tensor_mirror(y + i, h)) * w + xx) * c + ch];
                    out.data[(static_cast<size_t>(y) * w + xx) * c + ch] = static_cast<T>(acc);
                } else {
                    const T g = tmp.data[(static_cast<size_t>(y) * w + xx) * c + ch];
                    for (int i = -radius; i <= radius; ++i)
                        out.data[(static_cast<size_t>(tensor_mirror(y + i, h)) * w + xx) * c + ch] +=
                            static_cast<T>(k1d[i + radius]) * g;
                }
            }
    return out;
}

// Reverse-mode tape over a closed op set: conv2d, bias add, ReLU,
// shifted softplus, elementwise arithmetic, scalar pow, abs, fixed
// depthwise filters, and mean reduction. Backward visits nodes in
// reverse creation order, which is a valid reverse topological order
// because inputs always precede their consumers.
template <typename T>
class TapeT {
public:
    using NodeId = int;

    NodeId leaf(TensorT<T> value, bool requires_grad) {
        nodes_.push_back(Node{std::move(value), TensorT<T>(), nullptr, requires_grad});
        return static_cast<NodeId>(nodes_.size() - 1);
    }
    NodeId constant(TensorT<T> value) { return leaf(std::move(value), false); }

    const TensorT<T>& value(NodeId id) const { return nodes_.at(id).value; }
    const TensorT<T>& grad(NodeId id) const { return nodes_.at(id).grad; }

    // x: {H,W,IC}; w: {OC,3,3,IC}; stride 1, symmetric padding.
    NodeId conv2d(NodeId xid, NodeId wid) {
        const TensorT<T>& x = value(xid);
        const TensorT<T>& w = value(wid);
        if (x.shape.size() != 3 || w.shape.size() != 4 || w.shape[1] != 3 || w.shape[2] != 3)
            throw std::invalid_argument("conv2d: bad shapes");
        if (w.shape[3] != x.shape[2]) throw std::invalid_argument("conv2d: channel mismatch");
        const int h = x.shape[0], wd = x.shape[1], ic = x.shape[2], oc = w.shape[0];

        TensorT<T> out({h, wd, oc});
        const T* xd = x.data.data();
        const T* wdat = w.data.data();
        T* od = out.data.data();
        for (int y = 0; y < h; ++y) {
            const int ym[3] = {tensor_mirror(y - 1, h), y, tensor_mirror(y + 1, h)};
            for (int xx = 0; xx < wd; ++xx) {
                const int xm[3] = {tensor_mirror(xx - 1, wd), xx, tensor_mirror(xx + 1, wd)};
                const T* in[9];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx)
                        in[ky * 3 + kx] = xd + (static_cast<size_t>(ym[ky]) * wd + xm[kx]) * ic;
                T* op = od + (static_cast<size_t>(y) * wd + xx) * oc;
                for (int o = 0; o < oc; ++o) {
                    const T* wp = wdat + static_cast<size_t>(o) * 9 * ic;
                    double acc = 0.0;
                    for (int k = 0; k < 9; ++k) {
                        const T* ip = in[k];
                        const T* wk = wp + k * ic;
                        T s = T(0);
                        for (int c = 0; c < ic; ++c) s += wk[c] * ip[c];
                        acc += static_cast<double>(s);
                    }
                    op[o] = static_cast<T>(acc);
                }
            }
        }
        return make(std::move(out), {xid, wid}, [h, wd, ic, oc](TapeT& t, const Node& n) {
            const TensorT<T>& x = t.value(n.inputs[0]);
            const TensorT<T>& w = t.value(n.inputs[1]);
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            TensorT<T>* gw = t.grad_slot(n.inputs[1]);
            const T* gd = n.grad.data.data();
            for (int y = 0; y < h; ++y) {
                const int ym[3] = {tensor_mirror(y - 1, h), y, tensor_mirror(y + 1, h)};
                for (int xx = 0; xx < wd; ++xx) {
                    const int xm[3] = {tensor_mirror(xx - 1, wd), xx, tensor_mirror(xx + 1, wd)};
                    const T* gp = gd + (static_cast<size_t>(y) * wd + xx) * oc;
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const size_t ioff = (static_cast<size_t>(ym[ky]) * wd + xm[kx]) * ic;
                            const T* ip = x.data.data() + ioff;
                            for (int o = 0; o < oc; ++o) {
                                const T g = gp[o];
                                if (g == T(0)) continue;
                                const size_t woff = (static_cast<size_t>(o) * 9 + ky * 3 + kx) * ic;
                                if (gw)
                                    for (int c = 0; c < ic; ++c) gw->data[woff + c] += g * ip[c];
                                if (gx) {
                                    const T* wp = w.data.data() + woff;
                                    for (int c = 0; c < ic; ++c) gx->data[ioff + c] += g * wp[c];
                                }
                            }
                        }
                }
            }
        });
    }

    // x: {H,W,C}; b: {C}
    NodeId bias_add(NodeId xid, NodeId bid) {
        const TensorT<T>& x = value(xid);
        const TensorT<T>& b = value(bid);
        if (x.shape.size() != 3 || b.shape.size() != 1 || b.shape[0] != x.shape[2])
            throw std::invalid_argument("bias_add: bad shapes");
        TensorT<T> out = x;
        const int c = b.shape[0];
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i % c];
        return make(std::move(out), {xid, bid}, [c](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            TensorT<T>* gb = t.grad_slot(n.inputs[1]);
            if (gx)
                for (size_t i = 0; i < n.grad.size(); ++i) gx->data[i] += n.grad.data[i];
            if (gb)
                for (size_t i = 0; i < n.grad.size(); ++i) gb->data[i % c] += n.grad.data[i];
        });
    }

    NodeId relu(NodeId xid) {
        TensorT<T> out = value(xid);
        for (auto& v : out.data) v = v > T(0) ? v : T(0);
        return make(std::move(out), {xid}, [](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            if (!gx) return;
            const TensorT<T>& x = t.value(n.inputs[0]);
            for (size_t i = 0; i < n.grad.size(); ++i)
                if (x.data[i] > T(0)) gx->data[i] += n.grad.data[i];
        });
    }

    // log(1 + exp(x + shift)); strictly positive output.
    NodeId softplus(NodeId xid, T shift) {
        TensorT<T> out = value(xid);
        for (auto& v : out.data) {
            const double z = static_cast<double>(v) + static_cast<double>(shift);
            out_from_softplus(v, z);
        }
        return make(std::move(out), {xid}, [shift](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            if (!gx) return;
            const TensorT<T>& x = t.value(n.inputs[0]);
            for (size_t i = 0; i < n.grad.size(); ++i) {
                const double z = static_cast<double>(x.data[i]) + static_cast<double>(shift);
                const double sig = 1.0 / (1.0 + std::exp(-z));
                gx->data[i] += n.grad.data[i] * static_cast<T>(sig);
            }
        });
    }

    NodeId add(NodeId a, NodeId b) { return binary(a, b, Binary::Add); }
    NodeId sub(NodeId a, NodeId b) { return binary(a, b, Binary::Sub); }
    NodeId mul(NodeId a, NodeId b) { return binary(a, b, Binary::Mul); }
    NodeId div(NodeId a, NodeId b) { return binary(a, b, Binary::Div); }

    NodeId add_scalar(NodeId xid, T s) {
        TensorT<T> out = value(xid);
        for (auto& v : out.data) v += s;
        return make(std::move(out), {xid}, [](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            if (!gx) return;
            for (size_t i = 0; i < n.grad.size(); ++i) gx->data[i] += n.grad.data[i];
        });
    }

    NodeId mul_scalar(NodeId xid, T s) {
        TensorT<T> out = value(xid);
        for (auto& v : out.data) v *= s;
        return make(std::move(out), {xid}, [s](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            if (!gx) return;
            for (size_t i = 0; i < n.grad.size(); ++i) gx->data[i] += s * n.grad.data[i];
        });
    }

    // s - x
    NodeId rsub_scalar(T s, NodeId xid) {
        TensorT<T> out = value(xid);
        for (auto& v : out.data) v = s - v;
        return make(std::move(out), {xid}, [](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            if (!gx) return;
            for (size_t i = 0; i < n.grad.size(); ++i) gx->data[i] -= n.grad.data[i];
        });
    }

    // max(x,0)^p with subgradient 0 at x <= 0.
    NodeId pow_scalar(NodeId xid, T p) {
        TensorT<T> out = value(xid);
        for (auto& v : out.data) v = v > T(0) ? static_cast<T>(std::pow(static_cast<double>(v), static_cast<double>(p))) : T(0);
        return make(std::move(out), {xid}, [p](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            if (!gx) return;
            const TensorT<T>& x = t.value(n.inputs[0]);
            for (size_t i = 0; i < n.grad.size(); ++i)
                if (x.data[i] > T(0))
                    gx->data[i] += n.grad.data[i] * p *
                                   static_cast<T>(std::pow(static_cast<double>(x.data[i]),
                                                           static_cast<double>(p) - 1.0));
        });
    }

    NodeId abs(NodeId xid) {
        TensorT<T> out = value(xid);
        for (auto& v : out.data) v = v < T(0) ? -v : v;
        return make(std::move(out), {xid}, [](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            if (!gx) return;
            const TensorT<T>& x = t.value(n.inputs[0]);
            for (size_t i = 0; i < n.grad.size(); ++i) {
                const T s = x.data[i] > T(0) ? T(1) : (x.data[i] < T(0) ? T(-1) : T(0));
                gx->data[i] += s * n.grad.data[i];
            }
        });
    }

    // Per-channel 2D filter with a fixed (non-trainable) separable kernel,
    // symmetric padding. Used by the SSIM window statistics.
    NodeId window_filter(NodeId xid, const std::vector<double>& k1d) {
        TensorT<T> out = filter_separable(value(xid), k1d);
        return make(std::move(out), {xid}, [k1d](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            if (!gx) return;
            TensorT<T> gin = filter_separable(n.grad, k1d, true);
            for (size_t i = 0; i < gin.size(); ++i) gx->data[i] += gin.data[i];
        });
    }

    // Mean over all elements; scalar output, double accumulation.
    NodeId mean(NodeId xid) {
        const TensorT<T>& x = value(xid);
        double acc = 0.0;
        for (const T v : x.data) acc += static_cast<double>(v);
        TensorT<T> out({1});
        out.data[0] = static_cast<T>(acc / static_cast<double>(x.size()));
        const T inv_n = static_cast<T>(1.0 / static_cast<double>(x.size()));
        return make(std::move(out), {xid}, [inv_n](TapeT& t, const Node& n) {
            TensorT<T>* gx = t.grad_slot(n.inputs[0]);
            if (!gx) return;
            const T g = n.grad.data[0] * inv_n;
            for (auto& v : gx->data) v += g;
        });
    }

    // Seeds d(root)/d(root) = upstream and propagates to every leaf.
    void backward(NodeId root, T upstream = T(1)) {
        for (auto& n : nodes_) {
            n.grad = TensorT<T>(n.value.shape);
        }
        if (nodes_.at(root).grad.size() != 1)
            throw std::invalid_argument("backward: root must be scalar");
        nodes_[root].grad.data[0] = upstream;
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back(*this, nodes_[i]);
    }

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        TensorT<T> value;
        TensorT<T> grad;
        std::function<void(TapeT&, const Node&)> back;
        bool requires_grad = true;
        std::vector<NodeId> inputs;
    };

    enum class Binary { Add, Sub, Mul, Div };

    NodeId make(TensorT<T> out, std::vector<NodeId> inputs,
                std::function<void(TapeT&, const Node&)> back) {
        Node n;
        n.value = std::move(out);
        n.inputs = std::move(inputs);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    TensorT<T>* grad_slot(NodeId id) {
        Node& n = nodes_.at(id);
        if (!n.requires_grad && !n.back) return nullptr;
        return &n.grad;
    }

    NodeId binary(NodeId a, NodeId b, Binary op) {
        const TensorT<T>& xa = value(a);
        const TensorT<T>& xb = value(b);
        if (!xa.same_shape(xb)) throw std::invalid_argument("binary op: shape mismatch");
        TensorT<T> out = xa;
        switch (op) {
            case Binary::Add: for (size_t i = 0; i < out.size(); ++i) out.data[i] += xb.data[i]; break;
            case Binary::Sub: for (size_t i = 0; i < out.size(); ++i) out.data[i] -= xb.data[i]; break;
            case Binary::Mul: for (size_t i = 0; i < out.size(); ++i) out.data[i] *= xb.data[i]; break;
            case Binary::Div: for (size_t i = 0; i < out.size(); ++i) out.data[i] /= xb.data[i]; break;
        }
        return make(std::move(out), {a, b}, [op](TapeT& t, const Node& n) {
            const TensorT<T>& xa = t.value(n.inputs[0]);
            const TensorT<T>& xb = t.value(n.inputs[1]);
            TensorT<T>* ga = t.grad_slot(n.inputs[0]);
            TensorT<T>* gb = t.grad_slot(n.inputs[1]);
            for (size_t i = 0; i < n.grad.size(); ++i) {
                const T g = n.grad.data[i];
                switch (op) {
                    case Binary::Add:
                        if (ga) ga->data[i] += g;
                        if (gb) gb->data[i] += g;
                        break;
                    case Binary::Sub:
                        if (ga) ga->data[i] += g;
                        if (gb) gb->data[i] -= g;
                        break;
                    case Binary::Mul:
                        if (ga) ga->data[i] += g * xb.data[i];
                        if (gb) gb->data[i] += g * xa.data[i];
                        break;
                    case Binary::Div:
                        if (ga) ga->data[i] += g / xb.data[i];
                        if (gb) gb->data[i] -= g * xa.data[i] / (xb.data[i] * xb.data[i]);
                        break;
                }
            }
        });
    }

    static void out_from_softplus(T& v, double z) {
        if (z > 30.0)
            v = static_cast<T>(z);
        else if (z < -30.0)
            v = static_cast<T>(std::exp(z));
        else
            v = static_cast<T>(std::log1p(std::exp(z)));
    }

    std::vector<Node> nodes_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace lle
