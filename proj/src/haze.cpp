#include "lle/haze.hpp"

#include <cmath>
#include <stdexcept>

namespace lle {

namespace {

void check_spatial(const ImagePlane& a, const ImagePlane& b, const char* what) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument(std::string(what) + ": spatial size mismatch");
}

// t is stored single-channel and broadcast over color channels.
float t_at(const ImagePlane& t, int y, int x) { return t.at(y, x, 0); }

}  // namespace

ImagePlane compose_haze(const HazeScene& scene) {
    const ImagePlane& j = scene.clean;
    check_spatial(j, scene.transmission, "compose_haze");
    check_spatial(j, scene.ambient, "compose_haze");
    if (scene.ambient.channels != j.channels)
        throw std::invalid_argument("compose_haze: ambient channel mismatch");

    ImagePlane out(j.height, j.width, j.channels);
    for (int y = 0; y < j.height; ++y)
        for (int x = 0; x < j.width; ++x) {
            const double t = t_at(scene.transmission, y, x);
            for (int c = 0; c < j.channels; ++c)
                out.at(y, x, c) = static_cast<float>(j.at(y, x, c) * t +
                                                     scene.ambient.at(y, x, c) * (1.0 - t));
        }
    return out;
}

ImagePlane recover_closed_form(const ImagePlane& hazy, const ImagePlane& t, const ImagePlane& ambient) {
    check_spatial(hazy, t, "recover_closed_form");
    check_spatial(hazy, ambient, "recover_closed_form");
    ImagePlane out(hazy.height, hazy.width, hazy.channels);
    for (int y = 0; y < hazy.height; ++y)
        for (int x = 0; x < hazy.width; ++x) {
            const double tv = t_at(t, y, x);
            if (tv < kTransmissionMin)
                throw std::domain_error("recover_closed_form: transmission below t_min");
            for (int c = 0; c < hazy.channels; ++c) {
                const double a = ambient.at(y, x, c);
                out.at(y, x, c) = static_cast<float>(hazy.at(y, x, c) / tv - a / tv + a);
            }
        }
    return out;
}

AtmosphericMap h_from_components(const ImagePlane& hazy, const ImagePlane& t,
                                 const ImagePlane& ambient, float c) {
    check_spatial(hazy, t, "h_from_components");
    check_spatial(hazy, ambient, "h_from_components");
    AtmosphericMap map;
    map.c = c;
    map.h = ImagePlane(hazy.height, hazy.width, hazy.channels);
    for (int y = 0; y < hazy.height; ++y)
        for (int x = 0; x < hazy.width; ++x) {
            const double tv = t_at(t, y, x);
            if (tv < kTransmissionMin)
                throw std::domain_error("h_from_components: transmission below t_min");
            for (int ch = 0; ch < hazy.channels; ++ch) {
                const double ip = hazy.at(y, x, ch);
                const double den = ip - 1.0;
                if (std::fabs(den) < static_cast<double>(kDenominatorEps))
                    throw std::domain_error("h_from_components: |I'-1| below epsilon");
                const double a = ambient.at(y, x, ch);
                map.h.at(y, x, ch) = static_cast<float>(((ip - a) / tv + (a - c)) / den);
            }
        }
    return map;
}

ImagePlane apply_h(const ImagePlane& hazy, const AtmosphericMap& h_map) {
    if (!hazy.same_shape(h_map.h)) throw std::invalid_argument("apply_h: shape mismatch");
    ImagePlane out(hazy.height, hazy.width, hazy.channels);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = static_cast<float>(static_cast<double>(h_map.h.data[i]) *
                                             (static_cast<double>(hazy.data[i]) - 1.0) +
                                         h_map.c);
    return out;
}

ImagePlane enhance(const ImagePlane& low, const AtmosphericMap& h_map) {
    if (!low.same_shape(h_map.h)) throw std::invalid_argument("enhance: shape mismatch");
    // 1 - (h*(I'-1) + c) with I' = 1-L simplifies to h*L + (1-c); the fused
    // form keeps h==1, c=1 an exact identity in float.
    ImagePlane out(low.height, low.width, low.channels);
    const float offset = 1.0f - h_map.c;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = h_map.h.data[i] * low.data[i] + offset;
    return clamp_unit(out);
}

}  // namespace lle
