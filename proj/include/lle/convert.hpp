#pragma once

#include "lle/image.hpp"
#include "lle/tensor.hpp"

namespace lle {

template <typename T>
TensorT<T> to_tensor(const ImagePlane& img) {
    TensorT<T> t({img.height, img.width, img.channels});
    for (size_t i = 0; i < img.size(); ++i) t.data[i] = static_cast<T>(img.data[i]);
    return t;
}

template <typename T>
ImagePlane to_plane(const TensorT<T>& t) {
    if (t.shape.size() != 3) throw std::invalid_argument("to_plane: need {H,W,C}");
    ImagePlane img(t.shape[0], t.shape[1], t.shape[2]);
    for (size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<float>(t.data[i]);
    return img;
}

}  // namespace lle
