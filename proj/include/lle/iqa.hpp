#pragma once

#include <string>
#include <vector>

#include "lle/image.hpp"
#include "lle/loss.hpp"

namespace lle {

// Mean-subtracted contrast-normalized coefficients plus the local fields.
struct MscnField {
    ImagePlane coefficients;  // signed, 1 channel
    ImagePlane local_mean;
    ImagePlane local_deviation;
};

struct AggdParams {
    double alpha = 2.0;
    double sigma_left = 1.0;
    double sigma_right = 1.0;
    double mean_offset = 0.0;
};

struct NiqeModel {
    std::vector<double> feature_mean;        // 36
    std::vector<double> feature_covariance;  // 36x36 row-major, symmetric
    int patch_size = 48;
    int corpus_images = 0;
    int corpus_patches = 0;
};

struct IqaScore {
    std::string metric;
    double value = 0.0;
    bool lower_is_better = true;
};

inline constexpr int kNiqeFeatureDim = 36;
inline constexpr double kMscnC = 1.0 / 255.0;

MscnField mscn(const ImagePlane& gray);

// Moment-matching AGGD fit; alpha solved on a [0.2, 10] grid, step 1e-3.
AggdParams fit_aggd(const std::vector<double>& samples);

// 18 features per scale (MSCN AGGD + 4 directional product AGGDs), two
// scales, for each patch passing the 0.75-of-peak sharpness rule.
std::vector<std::vector<double>> niqe_features(const ImagePlane& gray, int patch);

NiqeModel fit_niqe_model(const std::vector<ImagePlane>& pristine, int patch);

IqaScore niqe_score(const ImagePlane& img, const NiqeModel& model);

IqaScore psnr(const ImagePlane& a, const ImagePlane& b);
IqaScore ssim_metric(const ImagePlane& a, const ImagePlane& b);

void save_niqe_model(const NiqeModel& model, const std::string& path);
NiqeModel load_niqe_model(const std::string& path);

}  // namespace lle
