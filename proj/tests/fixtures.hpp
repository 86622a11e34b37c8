#pragma once

// Shared synthetic fixtures for the test suites. The "pristine" generator
// produces smooth natural-ish images (blurred noise plus gradients) with
// enough local structure for the statistical quality metrics to behave.
#include <cmath>
#include <random>
#include <vector>

#include "lle/image.hpp"
#include "lle/train.hpp"

namespace fixtures {

inline lle::ImagePlane pristine_image(int h, int w, int seed) {
    std::mt19937 rng(static_cast<unsigned>(seed) * 7919u + 13u);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    lle::ImagePlane noise(h, w, 3);
    for (auto& v : noise.data) v = ud(rng);
    lle::ImagePlane smooth = lle::gaussian_blur(noise, 2.0, 5);

    // Add oriented gradients and a few soft blobs so patches differ in
    // sharpness and the covariance of the feature vectors is non-degenerate.
    std::uniform_real_distribution<float> cd(0.2f, 0.8f);
    const float cx = cd(rng) * w, cy = cd(rng) * h;
    const float gx = ud(rng) * 0.4f + 0.1f, gy = ud(rng) * 0.4f + 0.1f;
    lle::ImagePlane img(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float ramp = gx * x / w + gy * y / h;
            const float r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                             (0.1f * static_cast<float>(w) * h + 1.0f);
            const float blob = 0.35f * std::exp(-r2);
            for (int c = 0; c < 3; ++c) {
                const float base = 0.25f + 0.5f * smooth.at(y, x, c);
                img.at(y, x, c) = base + 0.3f * ramp + blob * (c == 0 ? 1.0f : 0.6f);
            }
        }
    return lle::clamp_unit(img);
}

// Midtone images with strong local contrast at two scales. Gamma darkening
// hits the SSIM luminance term hard on these, which gives enhancement room
// to improve structural similarity, not just brightness.
inline lle::ImagePlane textured_image(int h, int w, int seed) {
    std::mt19937 rng(static_cast<unsigned>(seed) * 7919u + 13u);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    lle::ImagePlane n1(h, w, 3), n2(h, w, 3);
    for (auto& v : n1.data) v = ud(rng);
    for (auto& v : n2.data) v = ud(rng);
    lle::ImagePlane s1 = lle::gaussian_blur(n1, 1.2, 3);
    lle::ImagePlane s2 = lle::gaussian_blur(n2, 4.0, 9);
    lle::ImagePlane img(h, w, 3);
    for (size_t i = 0; i < img.size(); ++i) {
        const float v = 0.5f + 1.6f * (s1.data[i] - 0.5f) + 0.8f * (s2.data[i] - 0.5f);
        img.data[i] = std::min(0.95f, std::max(0.25f, v));
    }
    return img;
}

inline std::vector<lle::Sample> paired_samples(int n, int h, int w, int seed,
                                               double gamma_lo = 2.0, double gamma_hi = 3.0,
                                               double noise_sigma = 0.01) {
    std::mt19937 rng(static_cast<unsigned>(seed) + 101u);
    std::uniform_real_distribution<double> gd(gamma_lo, gamma_hi);
    std::vector<lle::Sample> out;
    for (int i = 0; i < n; ++i) {
        lle::Sample s;
        s.id = "pair-" + std::to_string(i) + ".png";
        lle::ImagePlane bright = textured_image(h, w, seed + i);
        s.low = lle::synth_lowlight(bright, gd(rng), noise_sigma, seed * 1000 + i);
        s.target = bright;
        s.provenance = lle::Provenance::TrueLabel;
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<lle::Sample> unlabeled_samples(int n, int h, int w, int seed,
                                                  double gamma_lo = 2.0, double gamma_hi = 3.0,
                                                  double noise_sigma = 0.01) {
    auto pairs = paired_samples(n, h, w, seed, gamma_lo, gamma_hi, noise_sigma);
    for (auto& s : pairs) {
        s.id = "pool-" + s.id;
        s.target.reset();
        s.provenance = lle::Provenance::Unlabeled;
    }
    return pairs;
}

}  // namespace fixtures
