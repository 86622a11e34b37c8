#include "lle/iqa.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lle {

namespace {

constexpr int kMscnRadius = 3;  // 7x7 window
constexpr double kMscnSigma = 7.0 / 6.0;

double ggd_ratio(double alpha) {
    const double g1 = std::lgamma(1.0 / alpha);
    const double g2 = std::lgamma(2.0 / alpha);
    const double g3 = std::lgamma(3.0 / alpha);
    return std::exp(2.0 * g2 - g1 - g3);
}

// alpha grid shared by every fit; built once.
const std::vector<std::pair<double, double>>& alpha_grid() {
    static const std::vector<std::pair<double, double>> grid = [] {
        std::vector<std::pair<double, double>> g;
        for (double a = 0.2; a <= 10.0 + 1e-12; a += 1e-3) g.emplace_back(a, ggd_ratio(a));
        return g;
    }();
    return grid;
}

}  // namespace

MscnField mscn(const ImagePlane& gray) {
    if (gray.channels != 1) throw std::invalid_argument("mscn: expected 1 channel");
    MscnField f;
    f.local_mean = gaussian_blur(gray, kMscnSigma, kMscnRadius);

    ImagePlane sq(gray.height, gray.width, 1);
    for (size_t i = 0; i < gray.size(); ++i) sq.data[i] = gray.data[i] * gray.data[i];
    ImagePlane mean_sq = gaussian_blur(sq, kMscnSigma, kMscnRadius);

    f.local_deviation = ImagePlane(gray.height, gray.width, 1);
    f.coefficients = ImagePlane(gray.height, gray.width, 1);
    for (size_t i = 0; i < gray.size(); ++i) {
        const double mu = f.local_mean.data[i];
        const double var = std::max(0.0, static_cast<double>(mean_sq.data[i]) - mu * mu);
        const double sigma = std::sqrt(var);
        f.local_deviation.data[i] = static_cast<float>(sigma);
        f.coefficients.data[i] = static_cast<float>((gray.data[i] - mu) / (sigma + kMscnC));
    }
    return f;
}

AggdParams fit_aggd(const std::vector<double>& samples) {
    if (samples.size() < 16) throw std::invalid_argument("fit_aggd: need at least 16 samples");
    double sum_sq_l = 0.0, sum_sq_r = 0.0, sum_abs = 0.0, sum_sq = 0.0;
    size_t n_l = 0, n_r = 0;
    for (const double v : samples) {
        sum_abs += std::fabs(v);
        sum_sq += v * v;
        if (v < 0.0) {
            sum_sq_l += v * v;
            ++n_l;
        } else if (v > 0.0) {
            sum_sq_r += v * v;
            ++n_r;
        }
    }
    if (sum_sq == 0.0) throw std::invalid_argument("fit_aggd: degenerate all-zero sample");

    const size_t n = samples.size();
    AggdParams p;
    p.sigma_left = n_l ? std::sqrt(sum_sq_l / n_l) : 0.0;
    p.sigma_right = n_r ? std::sqrt(sum_sq_r / n_r) : 0.0;

    const double gamma_hat = p.sigma_right > 0.0 ? p.sigma_left / p.sigma_right
                                                 : std::numeric_limits<double>::max();
    const double r_hat = (sum_abs / n) * (sum_abs / n) / (sum_sq / n);
    const double g3 = gamma_hat * gamma_hat * gamma_hat;
    const double r_norm = r_hat * (g3 + 1.0) * (gamma_hat + 1.0) /
                          ((gamma_hat * gamma_hat + 1.0) * (gamma_hat * gamma_hat + 1.0));

    double best = std::numeric_limits<double>::max();
    for (const auto& [a, ratio] : alpha_grid()) {
        const double d = std::fabs(ratio - r_norm);
        if (d < best) {
            best = d;
            p.alpha = a;
        }
    }
    const double conv = std::exp(std::lgamma(2.0 / p.alpha) - std::lgamma(1.0 / p.alpha)) *
                        std::sqrt(std::exp(std::lgamma(1.0 / p.alpha) - std::lgamma(3.0 / p.alpha)));
    p.mean_offset = (p.sigma_right - p.sigma_left) * conv;
    return p;
}

namespace {

// AGGD over a rectangular patch of a 1-channel field.
std::vector<double> patch_samples(const ImagePlane& field, int y0, int x0, int h, int w) {
    std::vector<double> s;
    s.reserve(static_cast<size_t>(h) * w);
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) s.push_back(field.at(y, x, 0));
    return s;
}

// Directional pairwise products of MSCN coefficients: H, V, D1, D2.
ImagePlane directional_product(const ImagePlane& m, int dy, int dx) {
    ImagePlane out(m.height, m.width, 1);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            const int yy = y + dy, xx = x + dx;
            if (yy >= 0 && yy < m.height && xx >= 0 && xx < m.width)
                out.at(y, x, 0) = m.at(y, x, 0) * m.at(yy, xx, 0);
            else
                out.at(y, x, 0) = 0.0f;
        }
    return out;
}

void append_scale_features(const ImagePlane& coeffs, int y0, int x0, int p,
                           std::vector<double>& out) {
    AggdParams base = fit_aggd(patch_samples(coeffs, y0, x0, p, p));
    out.push_back(base.alpha);
    out.push_back(0.5 * (base.sigma_left + base.sigma_right));
    const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    for (const auto& d : dirs) {
        ImagePlane prod = directional_product(coeffs, d[0], d[1]);
        AggdParams a = fit_aggd(patch_samples(prod, y0, x0, p, p));
        out.push_back(a.alpha);
        out.push_back(a.mean_offset);
        out.push_back(a.sigma_left);
        out.push_back(a.sigma_right);
    }
}

}  // namespace

std::vector<std::vector<double>> niqe_features(const ImagePlane& gray, int patch) {
    if (gray.channels != 1) throw std::invalid_argument("niqe_features: expected 1 channel");
    if (patch < 8 || patch % 2 != 0) throw std::invalid_argument("niqe_features: bad patch size");
    if (gray.height < 2 * patch || gray.width < 2 * patch)
        throw std::invalid_argument("niqe_features: image smaller than 2x patch size");

    MscnField full = mscn(gray);
    ImagePlane half_img = resample(gray, 0.5);
    MscnField half = mscn(half_img);

    const int ny = gray.height / patch, nx = gray.width / patch;

    // Sharpness = mean local deviation per patch; keep >= 0.75 of peak.
    std::vector<double> sharpness(static_cast<size_t>(ny) * nx, 0.0);
    double peak = 0.0;
    for (int by = 0; by < ny; ++by)
        for (int bx = 0; bx < nx; ++bx) {
            double acc = 0.0;
            for (int y = by * patch; y < (by + 1) * patch; ++y)
                for (int x = bx * patch; x < (bx + 1) * patch; ++x)
                    acc += full.local_deviation.at(y, x, 0);
            const double s = acc / (static_cast<double>(patch) * patch);
            sharpness[static_cast<size_t>(by) * nx + bx] = s;
            peak = std::max(peak, s);
        }
    if (peak <= 0.0) throw std::runtime_error("niqe_features: no patch passes sharpness selection");

    std::vector<std::vector<double>> features;
    const int hp = patch / 2;
    for (int by = 0; by < ny; ++by)
        for (int bx = 0; bx < nx; ++bx) {
            if (sharpness[static_cast<size_t>(by) * nx + bx] < 0.75 * peak) continue;
            std::vector<double> f;
            f.reserve(kNiqeFeatureDim);
            append_scale_features(full.coefficients, by * patch, bx * patch, patch, f);
            append_scale_features(half.coefficients, by * hp, bx * hp, hp, f);
            features.push_back(std::move(f));
        }
    if (features.empty()) throw std::runtime_error("niqe_features: no patch passes sharpness selection");
    return features;
}

namespace {

void mean_and_covariance(const std::vector<std::vector<double>>& rows, Eigen::VectorXd& mean,
                         Eigen::MatrixXd& cov) {
    const int d = kNiqeFeatureDim;
    const size_t n = rows.size();
    mean = Eigen::VectorXd::Zero(d);
    for (const auto& r : rows)
        for (int i = 0; i < d; ++i) mean[i] += r[i];
    mean /= static_cast<double>(n);

    // Population normalization keeps the model invariant under corpus duplication.
    cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& r : rows) {
        Eigen::VectorXd x(d);
        for (int i = 0; i < d; ++i) x[i] = r[i] - mean[i];
        cov.noalias() += x * x.transpose();
    }
    cov /= static_cast<double>(n);
    cov = ((cov + cov.transpose()) / 2.0).eval();
}

}  // namespace

NiqeModel fit_niqe_model(const std::vector<ImagePlane>& pristine, int patch) {
    if (pristine.size() < 10) throw std::invalid_argument("fit_niqe_model: need at least 10 images");
    std::vector<std::vector<double>> rows;
    for (const auto& img : pristine) {
        const ImagePlane gray = img.channels == 3 ? to_grayscale(img) : img;
        auto f = niqe_features(gray, patch);
        rows.insert(rows.end(), f.begin(), f.end());
    }
    if (rows.empty()) throw std::runtime_error("fit_niqe_model: no usable patches");

    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    mean_and_covariance(rows, mean, cov);

    NiqeModel m;
    m.patch_size = patch;
    m.corpus_images = static_cast<int>(pristine.size());
    m.corpus_patches = static_cast<int>(rows.size());
    m.feature_mean.assign(mean.data(), mean.data() + kNiqeFeatureDim);
    m.feature_covariance.resize(static_cast<size_t>(kNiqeFeatureDim) * kNiqeFeatureDim);
    for (int i = 0; i < kNiqeFeatureDim; ++i)
        for (int j = 0; j < kNiqeFeatureDim; ++j)
            m.feature_covariance[static_cast<size_t>(i) * kNiqeFeatureDim + j] = cov(i, j);
    return m;
}

IqaScore niqe_score(const ImagePlane& img, const NiqeModel& model) {
    if (model.feature_mean.size() != kNiqeFeatureDim)
        throw std::invalid_argument("niqe_score: model not fitted");
    const ImagePlane gray = img.channels == 3 ? to_grayscale(img) : img;
    auto rows = niqe_features(gray, model.patch_size);

    Eigen::VectorXd mu2;
    Eigen::MatrixXd cov2;
    mean_and_covariance(rows, mu2, cov2);

    Eigen::VectorXd mu1(kNiqeFeatureDim);
    Eigen::MatrixXd cov1(kNiqeFeatureDim, kNiqeFeatureDim);
    for (int i = 0; i < kNiqeFeatureDim; ++i) {
        mu1[i] = model.feature_mean[i];
        for (int j = 0; j < kNiqeFeatureDim; ++j)
            cov1(i, j) = model.feature_covariance[static_cast<size_t>(i) * kNiqeFeatureDim + j];
    }

    const Eigen::MatrixXd pooled = (cov1 + cov2) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pooled);
    // Truncated pseudo-inverse: directions carrying less than 0.1% of the
    // dominant variance are estimation noise for small corpora, and keeping
    // them makes the distance explode for any out-of-corpus image.
    const double floor_eig = std::max(1e-3 * es.eigenvalues().maxCoeff(), 1e-12);
    Eigen::VectorXd inv_eigs = es.eigenvalues();
    for (int i = 0; i < inv_eigs.size(); ++i)
        inv_eigs[i] = inv_eigs[i] > floor_eig ? 1.0 / inv_eigs[i] : 0.0;
    const Eigen::VectorXd diff = mu1 - mu2;
    const Eigen::VectorXd proj = es.eigenvectors().transpose() * diff;
    const double q = (proj.array().square() * inv_eigs.array()).sum();

    IqaScore s;
    s.metric = "niqe";
    s.value = std::sqrt(std::max(0.0, q));
    s.lower_is_better = true;
    return s;
}

IqaScore psnr(const ImagePlane& a, const ImagePlane& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    IqaScore s;
    s.metric = "psnr";
    s.lower_is_better = false;
    s.value = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
    return s;
}

IqaScore ssim_metric(const ImagePlane& a, const ImagePlane& b) {
    LossWeights w;
    IqaScore s;
    s.metric = "ssim";
    s.lower_is_better = false;
    s.value = 1.0 - ssim_loss(a, b, w);
    return s;
}

void save_niqe_model(const NiqeModel& model, const std::string& path) {
    nlohmann::json j;
    j["format"] = "lle-niqe-model";
    j["version"] = 1;
    j["patch_size"] = model.patch_size;
    j["corpus_images"] = model.corpus_images;
    j["corpus_patches"] = model.corpus_patches;
    j["feature_mean"] = model.feature_mean;
    j["feature_covariance"] = model.feature_covariance;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_niqe_model: cannot open " + path);
    f << j.dump(2) << "\n";
}

NiqeModel load_niqe_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_niqe_model: cannot open " + path);
    nlohmann::json j;
    f >> j;
    if (j.value("format", "") != "lle-niqe-model" || j.value("version", 0) != 1)
        throw std::runtime_error("load_niqe_model: unrecognized model file " + path);
    NiqeModel m;
    m.patch_size = j.at("patch_size").get<int>();
    m.corpus_images = j.value("corpus_images", 0);
    m.corpus_patches = j.value("corpus_patches", 0);
    m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_covariance = j.at("feature_covariance").get<std::vector<double>>();
    if (m.feature_mean.size() != kNiqeFeatureDim ||
        m.feature_covariance.size() != static_cast<size_t>(kNiqeFeatureDim) * kNiqeFeatureDim)
        throw std::runtime_error("load_niqe_model: bad dimensions in " + path);
    return m;
}

}  // namespace lle
