#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "lle/iqa.hpp"
#include "fixtures.hpp"

using namespace lle;

namespace {

ImagePlane gray_fixture(int h, int w, int seed) {
    return to_grayscale(fixtures::pristine_image(h, w, seed));
}

std::vector<double> sample_gaussian(size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& v : out) v = d(rng);
    return out;
}

std::vector<double> sample_laplace(size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::exponential_distribution<double> e(1.0);
    std::bernoulli_distribution flip(0.5);
    std::vector<double> out(n);
    for (auto& v : out) v = flip(rng) ? e(rng) : -e(rng);
    return out;
}

std::vector<ImagePlane> pristine_corpus(int n, int h, int w, int seed0) {
    std::vector<ImagePlane> out;
    for (int i = 0; i < n; ++i) out.push_back(gray_fixture(h, w, seed0 + i));
    return out;
}

}  // namespace

TEST_CASE("mscn output is roughly invariant to affine intensity maps") {
    ImagePlane g = gray_fixture(64, 64, 100);
    ImagePlane shifted = g;
    for (auto& v : shifted.data) v = 0.5f * v + 0.2f;
    MscnField a = mscn(g);
    MscnField b = mscn(shifted);
    double diff = 0.0;
    for (size_t i = 0; i < a.coefficients.size(); ++i)
        diff += std::fabs(a.coefficients.data[i] - b.coefficients.data[i]);
    diff /= static_cast<double>(a.coefficients.size());
    CHECK(diff < 0.05);
}

TEST_CASE("mscn of a checkerboard alternates in sign with near-zero mean") {
    ImagePlane g(32, 32, 1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) g.at(y, x, 0) = static_cast<float>((x + y) % 2);
    MscnField f = mscn(g);
    double mean = 0.0;
    int count = 0;
    for (int y = 8; y < 24; ++y)
        for (int x = 8; x < 24; ++x) {
            const float v = f.coefficients.at(y, x, 0);
            const float n = f.coefficients.at(y, x + 1, 0);
            CHECK(v * n < 0.0f);  // neighbors have opposite sign
            mean += v;
            ++count;
        }
    CHECK(std::fabs(mean / count) < 1e-3);
}

TEST_CASE("mscn fields have matching shapes and positive deviation") {
    ImagePlane g = gray_fixture(48, 40, 4);
    MscnField f = mscn(g);
    CHECK(f.coefficients.same_shape(g));
    CHECK(f.local_mean.same_shape(g));
    CHECK(f.local_deviation.same_shape(g));
    for (float v : f.local_deviation.data) CHECK(v >= 0.0f);
}

TEST_CASE("mscn rejects multi-channel input") {
    ImagePlane rgb(16, 16, 3, 0.5f);
    CHECK_THROWS(mscn(rgb));
}

TEST_CASE("aggd fit recovers a Gaussian") {
    AggdParams p = fit_aggd(sample_gaussian(100000, 77));
    CHECK(p.alpha >= 1.85);
    CHECK(p.alpha <= 2.15);
    CHECK(p.sigma_left / p.sigma_right >= 0.95);
    CHECK(p.sigma_left / p.sigma_right <= 1.05);
}

TEST_CASE("aggd fit recovers a Laplacian") {
    AggdParams p = fit_aggd(sample_laplace(100000, 78));
    CHECK(p.alpha >= 0.9);
    CHECK(p.alpha <= 1.1);
}

TEST_CASE("aggd fit is scale equivariant") {
    auto samples = sample_gaussian(50000, 79);
    AggdParams base = fit_aggd(samples);
    for (auto& v : samples) v *= 3.0;
    AggdParams scaled = fit_aggd(samples);
    CHECK(std::fabs(scaled.alpha - base.alpha) < 0.01);
    CHECK(scaled.sigma_left == doctest::Approx(3.0 * base.sigma_left).epsilon(0.02));
    CHECK(scaled.sigma_right == doctest::Approx(3.0 * base.sigma_right).epsilon(0.02));
}

TEST_CASE("aggd fit rejects degenerate input") {
    CHECK_THROWS(fit_aggd(std::vector<double>(8, 0.5)));        // too few
    CHECK_THROWS(fit_aggd(std::vector<double>(100, 0.0)));      // all zero
}

TEST_CASE("feature vectors have 36 entries") {
    ImagePlane g = gray_fixture(64, 64, 5);
    auto feats = niqe_features(g, 32);
    REQUIRE(!feats.empty());
    for (const auto& f : feats) CHECK(f.size() == static_cast<size_t>(kNiqeFeatureDim));
}

TEST_CASE("white-noise patches all pass the sharpness rule") {
    std::mt19937 rng(55);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    ImagePlane g(64, 64, 1);
    for (auto& v : g.data) v = ud(rng);
    auto feats = niqe_features(g, 32);
    CHECK(feats.size() == 4);  // every 32x32 block of the 64x64 image
}

TEST_CASE("niqe_features validates sizes") {
    ImagePlane g = gray_fixture(40, 40, 6);
    CHECK_THROWS(niqe_features(g, 32));  // needs at least 2x patch per side
    CHECK_THROWS(niqe_features(g, 7));   // odd patch
    CHECK_THROWS(niqe_features(g, 4));   // too small
}

TEST_CASE("fitted model covariance is positive semi-definite and symmetric") {
    NiqeModel m = fit_niqe_model(pristine_corpus(12, 64, 64, 200), 32);
    CHECK(m.feature_mean.size() == 36);
    CHECK(m.feature_covariance.size() == 36 * 36);
    for (int i = 0; i < 36; ++i)
        for (int j = 0; j < i; ++j)
            CHECK(m.feature_covariance[i * 36 + j] ==
                  doctest::Approx(m.feature_covariance[j * 36 + i]).epsilon(1e-12));
    // PSD via the score of an arbitrary image being real/non-negative
    IqaScore s = niqe_score(gray_fixture(64, 64, 999), m);
    CHECK(std::isfinite(s.value));
    CHECK(s.value >= 0.0);
    CHECK(s.lower_is_better);
}

TEST_CASE("fit_niqe_model requires a minimum corpus") {
    CHECK_THROWS(fit_niqe_model(pristine_corpus(5, 64, 64, 300), 32));
}

TEST_CASE("duplicating the corpus leaves the model unchanged") {
    auto corpus = pristine_corpus(10, 64, 64, 400);
    NiqeModel a = fit_niqe_model(corpus, 32);
    auto doubled = corpus;
    doubled.insert(doubled.end(), corpus.begin(), corpus.end());
    NiqeModel b = fit_niqe_model(doubled, 32);
    for (int i = 0; i < 36; ++i)
        CHECK(a.feature_mean[i] == doctest::Approx(b.feature_mean[i]).epsilon(1e-9));
    for (size_t i = 0; i < a.feature_covariance.size(); ++i)
        CHECK(a.feature_covariance[i] ==
              doctest::Approx(b.feature_covariance[i]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("pristine images score below their darkened versions") {
    NiqeModel model = fit_niqe_model(pristine_corpus(12, 64, 64, 500), 32);
    double pristine = 0.0, dark = 0.0;
    const int n = 8;
    for (int i = 0; i < n; ++i) {
        ImagePlane p = fixtures::pristine_image(64, 64, 600 + i);
        pristine += niqe_score(to_grayscale(p), model).value;
        dark += niqe_score(to_grayscale(gamma_correct(p, 2.5)), model).value;
    }
    CHECK(dark / n > pristine / n);
}

TEST_CASE("corpus members score below the corpus 90th percentile") {
    auto corpus = pristine_corpus(12, 64, 64, 700);
    NiqeModel model = fit_niqe_model(corpus, 32);
    std::vector<double> scores;
    for (const auto& img : corpus) scores.push_back(niqe_score(img, model).value);
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const double p90 = sorted[static_cast<size_t>(0.9 * (sorted.size() - 1))];
    ImagePlane fresh = gray_fixture(64, 64, 705);  // same family as the corpus
    CHECK(niqe_score(fresh, model).value <= p90 * 1.5);
}

TEST_CASE("psnr matches scalar oracles") {
    ImagePlane a(4, 4, 1, 0.0f);
    ImagePlane b(4, 4, 1, 0.1f);   // MSE 0.01 -> 20 dB
    ImagePlane c(4, 4, 1, 1.0f);   // MSE 1 -> 0 dB
    CHECK(psnr(a, b).value == doctest::Approx(20.0).epsilon(1e-6));
    CHECK(psnr(a, c).value == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(std::isinf(psnr(a, a).value));
    CHECK_FALSE(psnr(a, b).lower_is_better);
}

TEST_CASE("ssim metric matches the loss complement") {
    ImagePlane x = fixtures::pristine_image(24, 24, 800);
    CHECK(ssim_metric(x, x).value == doctest::Approx(1.0).epsilon(1e-7));

    ImagePlane g(16, 16, 1, 0.2f);
    ImagePlane p(16, 16, 1, 0.8f);
    CHECK(ssim_metric(g, p).value == doctest::Approx(0.4705).epsilon(1e-3));
    CHECK(ssim_metric(g, p).value == doctest::Approx(ssim_metric(p, g).value).epsilon(1e-9));
}

TEST_CASE("niqe model survives a save/load round trip") {
    NiqeModel m = fit_niqe_model(pristine_corpus(10, 64, 64, 900), 32);
    const std::string path =
        (std::filesystem::temp_directory_path() / "lle-niqe-test.json").string();
    save_niqe_model(m, path);
    NiqeModel back = load_niqe_model(path);
    CHECK(back.patch_size == m.patch_size);
    CHECK(back.corpus_images == m.corpus_images);
    for (int i = 0; i < 36; ++i)
        CHECK(back.feature_mean[i] == doctest::Approx(m.feature_mean[i]).epsilon(1e-12));
    ImagePlane probe = gray_fixture(64, 64, 901);
    CHECK(niqe_score(probe, back).value == doctest::Approx(niqe_score(probe, m).value).epsilon(1e-9));
    std::remove(path.c_str());
    CHECK_THROWS(load_niqe_model(path));
}
