#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lle/convert.hpp"
#include "lle/image.hpp"
#include "lle/tensor.hpp"

namespace lle {

enum class Smoother { Gaussian, Median, Resample };

struct LossWeights {
    double lambda1 = 0.35;
    double lambda2 = 0.5;
    double lambda3 = 0.15;
    double gamma1 = 0.85;
    double gamma2 = 1.15;
    Smoother smoother = Smoother::Gaussian;
    double smooth_sigma = 1.5;
    int smooth_radius = 3;
    int ssim_window = 11;
    double ssim_k1 = 0.01;
    double ssim_k2 = 0.03;
};

struct LossValue {
    double total = 0.0;
    double l1 = 0.0;
    double brightness = 0.0;
    double smooth = 0.0;
    double ssim = 0.0;
};

// Generic bilinear resize on a {H,W,C} tensor (plain values, no tape).
template <typename T>
TensorT<T> tensor_resize(const TensorT<T>& x, int oh, int ow) {
    if (x.shape.size() != 3) throw std::invalid_argument("tensor_resize: need {H,W,C}");
    const int h = x.shape[0], w = x.shape[1], c = x.shape[2];
    if (oh < 1 || ow < 1) throw std::invalid_argument("tensor_resize: result dimension < 1");
    TensorT<T> out({oh, ow, c});
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
    for (int y = 0; y < oh; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int ya = std::clamp(y0, 0, h - 1), yb = std::clamp(y0 + 1, 0, h - 1);
        for (int xx = 0; xx < ow; ++xx) {
            const double fx = (xx + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int xa = std::clamp(x0, 0, w - 1), xb = std::clamp(x0 + 1, 0, w - 1);
            for (int ch = 0; ch < c; ++ch) {
                const double top = (1.0 - wx) * x.data[(static_cast<size_t>(ya) * w + xa) * c + ch] +
                                   wx * x.data[(static_cast<size_t>(ya) * w + xb) * c + ch];
                const double bot = (1.0 - wx) * x.data[(static_cast<size_t>(yb) * w + xa) * c + ch] +
                                   wx * x.data[(static_cast<size_t>(yb) * w + xb) * c + ch];
                out.data[(static_cast<size_t>(y) * ow + xx) * c + ch] =
                    static_cast<T>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

template <typename T>
TensorT<T> tensor_median(const TensorT<T>& x, int radius) {
    const int h = x.shape[0], w = x.shape[1], c = x.shape[2];
    TensorT<T> out({h, w, c});
    std::vector<T> window;
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int ch = 0; ch < c; ++ch) {
                window.clear();
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx)
                        window.push_back(
                            x.data[(static_cast<size_t>(tensor_mirror(y + dy, h)) * w +
                                    tensor_mirror(xx + dx, w)) * c + ch]);
                auto mid = window.begin() + window.size() / 2;
                std::nth_element(window.begin(), mid, window.end());
                out.data[(static_cast<size_t>(y) * w + xx) * c + ch] = *mid;
            }
    return out;
}

// The Eq.-style smoothed label target; never differentiated (y_g is data).
template <typename T>
TensorT<T> smooth_target(const TensorT<T>& y_g, const LossWeights& w) {
    switch (w.smoother) {
        case Smoother::Gaussian:
            return filter_separable(y_g, gaussian_kernel_1d(w.smooth_sigma, w.smooth_radius));
        case Smoother::Median:
            return tensor_median(y_g, w.smooth_radius);
        case Smoother::Resample: {
            const int h = y_g.shape[0], wd = y_g.shape[1];
            TensorT<T> down = tensor_resize(y_g, std::max(1, h / 2), std::max(1, wd / 2));
            return tensor_resize(down, h, wd);
        }
    }
    throw std::logic_error("smooth_target: bad smoother");
}

template <typename T>
void check_congruent(const TensorT<T>& a, const TensorT<T>& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

// --- Tape-side builders: y_p is a live node, y_g a constant tensor. ---

template <typename T>
typename TapeT<T>::NodeId l1_loss_node(TapeT<T>& tape, typename TapeT<T>::NodeId y_p,
                                       const TensorT<T>& y_g) {
    check_congruent(tape.value(y_p), y_g, "l1_loss");
    auto g = tape.constant(y_g);
    return tape.mean(tape.abs(tape.sub(g, y_p)));
}

template <typename T>
typename TapeT<T>::NodeId brightness_loss_node(TapeT<T>& tape, typename TapeT<T>::NodeId y_p,
                                               const TensorT<T>& y_g, double gamma1, double gamma2) {
    check_congruent(tape.value(y_p), y_g, "brightness_loss");
    TensorT<T> target = y_g;
    for (auto& v : target.data)
        v = v > T(0) ? static_cast<T>(std::pow(static_cast<double>(v), gamma1)) : T(0);
    auto darkened = tape.pow_scalar(y_p, static_cast<T>(gamma2));
    return tape.mean(tape.abs(tape.sub(tape.constant(target), darkened)));
}

template <typename T>
typename TapeT<T>::NodeId smooth_loss_node(TapeT<T>& tape, typename TapeT<T>::NodeId y_p,
                                           const TensorT<T>& y_g, const LossWeights& w) {
    check_congruent(tape.value(y_p), y_g, "smooth_loss");
    return tape.mean(tape.abs(tape.sub(tape.constant(smooth_target(y_g, w)), y_p)));
}

template <typename T>
typename TapeT<T>::NodeId ssim_loss_node(TapeT<T>& tape, typename TapeT<T>::NodeId y_p,
                                         const TensorT<T>& y_g, const LossWeights& w) {
    check_congruent(tape.value(y_p), y_g, "ssim_loss");
    if (y_g.shape[0] < w.ssim_window || y_g.shape[1] < w.ssim_window)
        throw std::invalid_argument("ssim_loss: image smaller than window");
    const auto kernel = gaussian_kernel_1d(1.5, w.ssim_window / 2);
    const T c1 = static_cast<T>(w.ssim_k1 * w.ssim_k1);  // dynamic range 1
    const T c2 = static_cast<T>(w.ssim_k2 * w.ssim_k2);

    auto g = tape.constant(y_g);
    auto mu_p = tape.window_filter(y_p, kernel);
    auto mu_g = tape.window_filter(g, kernel);
    auto e_pp = tape.window_filter(tape.mul(y_p, y_p), kernel);
    auto e_gg = tape.window_filter(tape.mul(g, g), kernel);
    auto e_gp = tape.window_filter(tape.mul(g, y_p), kernel);
    auto var_p = tape.sub(e_pp, tape.mul(mu_p, mu_p));
    auto var_g = tape.sub(e_gg, tape.mul(mu_g, mu_g));
    auto cov = tape.sub(e_gp, tape.mul(mu_g, mu_p));

    auto num = tape.mul(tape.add_scalar(tape.mul_scalar(tape.mul(mu_g, mu_p), T(2)), c1),
                        tape.add_scalar(tape.mul_scalar(cov, T(2)), c2));
    auto den = tape.mul(tape.add_scalar(tape.add(tape.mul(mu_g, mu_g), tape.mul(mu_p, mu_p)), c1),
                        tape.add_scalar(tape.add(var_g, var_p), c2));
    return tape.rsub_scalar(T(1), tape.mean(tape.div(num, den)));
}

template <typename T>
struct TotalLossNodes {
    typename TapeT<T>::NodeId total;
    typename TapeT<T>::NodeId l1;
    typename TapeT<T>::NodeId brightness;
    typename TapeT<T>::NodeId smooth;
    typename TapeT<T>::NodeId ssim;
};

template <typename T>
TotalLossNodes<T> total_loss_node(TapeT<T>& tape, typename TapeT<T>::NodeId y_p,
                                  const TensorT<T>& y_g, const LossWeights& w) {
    TotalLossNodes<T> r;
    r.l1 = l1_loss_node(tape, y_p, y_g);
    r.brightness = brightness_loss_node(tape, y_p, y_g, w.gamma1, w.gamma2);
    r.smooth = smooth_loss_node(tape, y_p, y_g, w);
    r.ssim = ssim_loss_node(tape, y_p, y_g, w);
    r.total = tape.add(tape.add(tape.mul_scalar(r.l1, static_cast<T>(w.lambda1)),
                                tape.mul_scalar(r.brightness, static_cast<T>(w.lambda2))),
                       tape.add(tape.mul_scalar(r.smooth, static_cast<T>(w.lambda3)), r.ssim));
    return r;
}

template <typename T>
LossValue read_loss_value(const TapeT<T>& tape, const TotalLossNodes<T>& n, const LossWeights& w) {
    LossValue v;
    v.l1 = static_cast<double>(tape.value(n.l1).data[0]);
    v.brightness = static_cast<double>(tape.value(n.brightness).data[0]);
    v.smooth = static_cast<double>(tape.value(n.smooth).data[0]);
    v.ssim = static_cast<double>(tape.value(n.ssim).data[0]);
    v.total = w.lambda1 * v.l1 + w.lambda2 * v.brightness + w.lambda3 * v.smooth + v.ssim;
    return v;
}

// --- Plane-level evaluation (double precision, no gradients kept). ---

double l1_loss(const ImagePlane& y_g, const ImagePlane& y_p);
double brightness_loss(const ImagePlane& y_g, const ImagePlane& y_p, double gamma1, double gamma2);
double smooth_loss(const ImagePlane& y_g, const ImagePlane& y_p, const LossWeights& w);
double ssim_loss(const ImagePlane& y_g, const ImagePlane& y_p, const LossWeights& w);
LossValue total_loss(const ImagePlane& y_g, const ImagePlane& y_p, const LossWeights& w);

void append_loss_csv_row(const std::string& path, int step, const LossValue& v);

}  // namespace lle
