#pragma once

#include "lle/image.hpp"

namespace lle {

inline constexpr float kTransmissionMin = 0.05f;
inline constexpr float kDenominatorEps = 1e-4f;

// Paired ground-truth fields for synthetic haze composition.
struct HazeScene {
    ImagePlane clean;         // J
    ImagePlane transmission;  // t, 1 channel, values in (0,1]
    ImagePlane ambient;       // A, same channel count as J
};

// Per-pixel atmospheric component h plus the recovery constant c.
struct AtmosphericMap {
    ImagePlane h;
    float c = 1.0f;
};

// I = J*t + A*(1-t)
ImagePlane compose_haze(const HazeScene& scene);

// B = I'/t - A/t + A ; requires t >= kTransmissionMin
ImagePlane recover_closed_form(const ImagePlane& hazy, const ImagePlane& t, const ImagePlane& ambient);

// h = ((I'-A)/t + (A-c)) / (I'-1) ; test-only route, requires |I'-1| >= kDenominatorEps
AtmosphericMap h_from_components(const ImagePlane& hazy, const ImagePlane& t,
                                 const ImagePlane& ambient, float c);

// B = h*(I'-1) + c ; unclamped
ImagePlane apply_h(const ImagePlane& hazy, const AtmosphericMap& h_map);

// clamp_unit(1 - apply_h(invert(low), h))
ImagePlane enhance(const ImagePlane& low, const AtmosphericMap& h_map);

}  // namespace lle
