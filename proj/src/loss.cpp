#include "lle/loss.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace lle {

namespace {

using DTape = TapeT<double>;

DTape::NodeId pred_node(DTape& tape, const ImagePlane& y_p) {
    return tape.leaf(to_tensor<double>(y_p), false);
}

}  // namespace

double l1_loss(const ImagePlane& y_g, const ImagePlane& y_p) {
    DTape tape;
    return tape.value(l1_loss_node(tape, pred_node(tape, y_p), to_tensor<double>(y_g))).data[0];
}

double brightness_loss(const ImagePlane& y_g, const ImagePlane& y_p, double gamma1, double gamma2) {
    DTape tape;
    return tape.value(brightness_loss_node(tape, pred_node(tape, y_p), to_tensor<double>(y_g),
                                           gamma1, gamma2)).data[0];
}

double smooth_loss(const ImagePlane& y_g, const ImagePlane& y_p, const LossWeights& w) {
    DTape tape;
    return tape.value(smooth_loss_node(tape, pred_node(tape, y_p), to_tensor<double>(y_g), w)).data[0];
}

double ssim_loss(const ImagePlane& y_g, const ImagePlane& y_p, const LossWeights& w) {
    DTape tape;
    return tape.value(ssim_loss_node(tape, pred_node(tape, y_p), to_tensor<double>(y_g), w)).data[0];
}

LossValue total_loss(const ImagePlane& y_g, const ImagePlane& y_p, const LossWeights& w) {
    DTape tape;
    auto nodes = total_loss_node(tape, pred_node(tape, y_p), to_tensor<double>(y_g), w);
    return read_loss_value(tape, nodes, w);
}

void append_loss_csv_row(const std::string& path, int step, const LossValue& v) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream f(path, std::ios::app);
    if (!f) throw std::runtime_error("append_loss_csv_row: cannot open " + path);
    if (fresh) f << "step,l1,brightness,smooth,ssim,total\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", step, v.l1, v.brightness,
                  v.smooth, v.ssim, v.total);
    f << buf;
}

}  // namespace lle
