#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace lle {

// H x W x C raster of unit-interval intensities, channel-interleaved row-major.
struct ImagePlane {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    ImagePlane() = default;
    ImagePlane(int h, int w, int c, float fill = 0.0f);

    float& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    float at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    size_t size() const { return data.size(); }
    bool same_shape(const ImagePlane& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

struct Histogram {
    int bins = 256;
    int channels = 0;
    bool normalized = false;
    std::vector<double> counts;  // bins * channels, bin-major per channel

    double& at(int bin, int c) { return counts[static_cast<size_t>(c) * bins + bin]; }
    double at(int bin, int c) const { return counts[static_cast<size_t>(c) * bins + bin]; }
};

// 8-bit gray/RGB PNG I/O; values scaled to [0,1].
ImagePlane load_image(const std::string& path);
void save_image(const ImagePlane& img, const std::string& path);

ImagePlane invert(const ImagePlane& img);
ImagePlane gamma_correct(const ImagePlane& img, double gamma);
ImagePlane to_grayscale(const ImagePlane& img);
ImagePlane gaussian_blur(const ImagePlane& img, double sigma, int radius);
ImagePlane median_filter(const ImagePlane& img, int radius);
ImagePlane resample(const ImagePlane& img, double factor);
Histogram histogram(const ImagePlane& img, int bins);
ImagePlane clamp_unit(const ImagePlane& img);

// Geometric transforms shared by data augmentation.
ImagePlane flip_horizontal(const ImagePlane& img);
ImagePlane flip_vertical(const ImagePlane& img);
ImagePlane rotate90(const ImagePlane& img, int quarter_turns);

// Mirror (symmetric) boundary index: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int mirror_index(int i, int n);

// 1D normalized Gaussian taps for radius r.
std::vector<double> gaussian_kernel_1d(double sigma, int radius);

void write_histogram_csv(const Histogram& h, const std::string& path);

}  // namespace lle
