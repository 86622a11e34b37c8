#include "lle/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace lle {

ImagePlane::ImagePlane(int h, int w, int c, float fill)
    : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, fill) {
    if (h < 1 || w < 1 || (c != 1 && c != 3))
        throw std::invalid_argument("ImagePlane: bad shape " + std::to_string(h) + "x" +
                                    std::to_string(w) + "x" + std::to_string(c));
}

int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImagePlane load_image(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("load_image: cannot open " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw std::runtime_error("load_image: not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: libpng init failed");
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> pixels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: decode error in " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: unsupported bit depth in " + path);
    }
    if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: unsupported color type in " + path);
    }

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int c = color_type == PNG_COLOR_TYPE_GRAY ? 1 : 3;

    pixels.resize(static_cast<size_t>(h) * w * c);
    rows.resize(h);
    for (int y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<size_t>(y) * w * c;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImagePlane img(h, w, c);
    for (size_t i = 0; i < img.size(); ++i) img.data[i] = pixels[i] / 255.0f;
    return img;
}

void save_image(const ImagePlane& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("save_image: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_image: libpng init failed");
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> pixels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_image: encode error for " + path);
    }
    png_init_io(png, fp.get());
    const int color_type = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    pixels.resize(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        const float v = std::clamp(img.data[i], 0.0f, 1.0f);
        pixels[i] = static_cast<png_byte>(std::lround(v * 255.0));
    }
    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = pixels.data() + static_cast<size_t>(y) * img.width * img.channels;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImagePlane invert(const ImagePlane& img) {
    ImagePlane out = img;
    // Double-precision complement: exact whenever 1-v is representable.
    for (auto& v : out.data) v = static_cast<float>(1.0 - static_cast<double>(v));
    return out;
}

ImagePlane gamma_correct(const ImagePlane& img, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("gamma_correct: gamma must be positive");
    ImagePlane out = img;
    if (gamma == 1.0) return out;
    for (auto& v : out.data) v = static_cast<float>(std::pow(static_cast<double>(v), gamma));
    return out;
}

ImagePlane to_grayscale(const ImagePlane& img) {
    if (img.channels != 3) throw std::invalid_argument("to_grayscale: expected 3 channels");
    ImagePlane out(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(y, x, 0) = static_cast<float>(0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                                                 0.114 * img.at(y, x, 2));
    return out;
}

std::vector<double> gaussian_kernel_1d(double sigma, int radius) {
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

ImagePlane gaussian_blur(const ImagePlane& img, double sigma, int radius) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_blur: sigma must be positive");
    const auto k = gaussian_kernel_1d(sigma, radius);

    // Horizontal pass, double accumulators.
    ImagePlane tmp = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * img.at(y, mirror_index(x + i, img.width), c);
                tmp.at(y, x, c) = static_cast<float>(acc);
            }
    ImagePlane out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * tmp.at(mirror_index(y + i, img.height), x, c);
                out.at(y, x, c) = static_cast<float>(acc);
            }
    return out;
}

ImagePlane median_filter(const ImagePlane& img, int radius) {
    if (radius < 1) throw std::invalid_argument("median_filter: radius must be >= 1");
    ImagePlane out = img;
    std::vector<float> window;
    const int side = 2 * radius + 1;
    window.reserve(static_cast<size_t>(side) * side);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                window.clear();
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx)
                        window.push_back(img.at(mirror_index(y + dy, img.height),
                                                mirror_index(x + dx, img.width), c));
                auto mid = window.begin() + window.size() / 2;
                std::nth_element(window.begin(), mid, window.end());
                out.at(y, x, c) = *mid;
            }
    return out;
}

ImagePlane resample(const ImagePlane& img, double factor) {
    if (factor != 0.5 && factor != 2.0) throw std::invalid_argument("resample: factor must be 0.5 or 2.0");
    const int oh = factor == 0.5 ? img.height / 2 : img.height * 2;
    const int ow = factor == 0.5 ? img.width / 2 : img.width * 2;
    if (oh < 1 || ow < 1) throw std::invalid_argument("resample: result dimension < 1");

    ImagePlane out(oh, ow, img.channels);
    const double sy = static_cast<double>(img.height) / oh;
    const double sx = static_cast<double>(img.width) / ow;
    for (int y = 0; y < oh; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int ya = std::clamp(y0, 0, img.height - 1);
        const int yb = std::clamp(y0 + 1, 0, img.height - 1);
        for (int x = 0; x < ow; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int xa = std::clamp(x0, 0, img.width - 1);
            const int xb = std::clamp(x0 + 1, 0, img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                const double top = (1.0 - wx) * img.at(ya, xa, c) + wx * img.at(ya, xb, c);
                const double bot = (1.0 - wx) * img.at(yb, xa, c) + wx * img.at(yb, xb, c);
                out.at(y, x, c) = static_cast<float>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

Histogram histogram(const ImagePlane& img, int bins) {
    if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
    Histogram h;
    h.bins = bins;
    h.channels = img.channels;
    h.counts.assign(static_cast<size_t>(bins) * img.channels, 0.0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                const int b = std::min(static_cast<int>(std::floor(img.at(y, x, c) * bins)), bins - 1);
                h.at(std::max(b, 0), c) += 1.0;
            }
    return h;
}

ImagePlane clamp_unit(const ImagePlane& img) {
    ImagePlane out = img;
    for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

ImagePlane flip_horizontal(const ImagePlane& img) {
    ImagePlane out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    return out;
}

ImagePlane flip_vertical(const ImagePlane& img) {
    ImagePlane out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
    return out;
}

ImagePlane rotate90(const ImagePlane& img, int quarter_turns) {
    int q = ((quarter_turns % 4) + 4) % 4;
    if (q == 0) return img;
    const bool swap = q % 2 == 1;
    ImagePlane out(swap ? img.width : img.height, swap ? img.height : img.width, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int ny = 0, nx = 0;
            switch (q) {
                case 1: ny = x; nx = img.height - 1 - y; break;
                case 2: ny = img.height - 1 - y; nx = img.width - 1 - x; break;
                default: ny = img.width - 1 - x; nx = y; break;
            }
            for (int c = 0; c < img.channels; ++c) out.at(ny, nx, c) = img.at(y, x, c);
        }
    return out;
}

void write_histogram_csv(const Histogram& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_histogram_csv: cannot open " + path);
    f << "bin,channel,count\n";
    char buf[64];
    for (int b = 0; b < h.bins; ++b)
        for (int c = 0; c < h.channels; ++c) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.9g\n", b, c, h.at(b, c));
            f << buf;
        }
}

}  // namespace lle
