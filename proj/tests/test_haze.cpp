#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lle/haze.hpp"
#include "fixtures.hpp"

using namespace lle;

namespace {
HazeScene scalar_scene(float j, float t, float a) {
    HazeScene s;
    s.clean = ImagePlane(1, 1, 1, j);
    s.transmission = ImagePlane(1, 1, 1, t);
    s.ambient = ImagePlane(1, 1, 1, a);
    return s;
}
}  // namespace

TEST_CASE("composition matches the scalar model") {
    HazeScene s = scalar_scene(0.4f, 0.5f, 0.8f);
    ImagePlane hazy = compose_haze(s);
    CHECK(hazy.at(0, 0, 0) == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("closed-form recovery matches the scalar model") {
    HazeScene s = scalar_scene(0.0f, 0.5f, 0.8f);
    ImagePlane hazy(1, 1, 1, 0.6f);
    ImagePlane back = recover_closed_form(hazy, s.transmission, s.ambient);
    CHECK(back.at(0, 0, 0) == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("recovery rejects transmissions below the floor") {
    ImagePlane hazy(1, 1, 1, 0.6f);
    ImagePlane t(1, 1, 1, 0.04f);
    ImagePlane a(1, 1, 1, 0.8f);
    CHECK_THROWS(recover_closed_form(hazy, t, a));
}

TEST_CASE("h from components matches the scalar derivation") {
    ImagePlane hazy(1, 1, 1, 0.6f);
    ImagePlane t(1, 1, 1, 0.5f);
    ImagePlane a(1, 1, 1, 0.8f);
    AtmosphericMap m = h_from_components(hazy, t, a, 1.0f);
    CHECK(m.h.at(0, 0, 0) == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("h from components rejects inputs at the removable singularity") {
    ImagePlane hazy(1, 1, 1, 1.0f);
    ImagePlane t(1, 1, 1, 0.5f);
    ImagePlane a(1, 1, 1, 0.8f);
    CHECK_THROWS(h_from_components(hazy, t, a, 1.0f));
}

TEST_CASE("apply_h matches the scalar reformulation") {
    ImagePlane hazy(1, 1, 1, 0.5f);
    AtmosphericMap m;
    m.h = ImagePlane(1, 1, 1, 1.6f);
    m.c = 1.0f;
    ImagePlane b = apply_h(hazy, m);
    CHECK(b.at(0, 0, 0) == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("enhance chains inversion, h, and re-inversion") {
    ImagePlane low(1, 1, 1, 0.2f);  // inverted 0.8
    AtmosphericMap m;
    m.h = ImagePlane(1, 1, 1, 2.0f);
    m.c = 1.0f;
    // B = 2*(0.8-1)+1 = 0.6 so the output is 0.4
    ImagePlane y = enhance(low, m);
    CHECK(y.at(0, 0, 0) == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("reformulation agrees with closed-form recovery on random tensors") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<float> td(0.1f, 1.0f);
    std::uniform_real_distribution<float> ad(0.0f, 1.0f);
    std::uniform_real_distribution<float> id(0.0f, 1.0f);
    for (int trial = 0; trial < 200; ++trial) {
        ImagePlane hazy(4, 4, 3), t(4, 4, 3), a(4, 4, 3);
        for (size_t i = 0; i < hazy.size(); ++i) {
            float v = id(rng);
            if (std::fabs(v - 1.0f) < 1e-3f) v = 0.99f;
            hazy.data[i] = v;
            t.data[i] = td(rng);
            a.data[i] = ad(rng);
        }
        AtmosphericMap m = h_from_components(hazy, t, a, 1.0f);
        ImagePlane via_h = apply_h(hazy, m);
        ImagePlane direct = recover_closed_form(hazy, t, a);
        for (size_t i = 0; i < hazy.size(); ++i)
            CHECK(via_h.data[i] == doctest::Approx(direct.data[i]).epsilon(2e-5).scale(1.0));
    }
}

TEST_CASE("compose then recover is the identity for valid scenes") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> jd(0.0f, 1.0f);
    std::uniform_real_distribution<float> td(0.05f, 1.0f);
    for (int trial = 0; trial < 200; ++trial) {
        HazeScene s;
        s.clean = ImagePlane(4, 4, 3);
        s.transmission = ImagePlane(4, 4, 1);
        s.ambient = ImagePlane(4, 4, 3);
        for (auto& v : s.clean.data) v = jd(rng);
        for (auto& v : s.transmission.data) v = td(rng);
        for (auto& v : s.ambient.data) v = jd(rng);
        ImagePlane hazy = compose_haze(s);
        ImagePlane back = recover_closed_form(hazy, s.transmission, s.ambient);
        for (size_t i = 0; i < back.size(); ++i)
            CHECK(back.data[i] == doctest::Approx(s.clean.data[i]).epsilon(1e-5).scale(1.0));
    }
}

TEST_CASE("h identically 1 with c=1 makes enhance the exact identity") {
    ImagePlane low = fixtures::pristine_image(16, 16, 21);
    AtmosphericMap m;
    m.h = ImagePlane(16, 16, 3, 1.0f);
    m.c = 1.0f;
    ImagePlane y = enhance(low, m);
    for (size_t i = 0; i < low.size(); ++i) CHECK(y.data[i] == low.data[i]);
}

TEST_CASE("shape mismatches are rejected") {
    ImagePlane a(2, 2, 3), b(2, 3, 3);
    AtmosphericMap m;
    m.h = b;
    CHECK_THROWS(enhance(a, m));
    CHECK_THROWS(recover_closed_form(a, b, a));
}
