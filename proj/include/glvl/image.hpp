#pragma once

#include <string>
#include <vector>

namespace glvl {

// Grayscale raster, values in [0,1], row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, float fill = 0.f)
        : width(w), height(h), data(size_t(w) * size_t(h), fill) {}

    float& at(int x, int y) { return data[size_t(y) * width + x]; }
    float at(int x, int y) const { return data[size_t(y) * width + x]; }

    bool empty() const { return width <= 0 || height <= 0; }

    // Bilinear sample at continuous (x, y); coordinates clamped to the
    // pixel-center hull. Pixel (i, j) has its center at (i + 0.5, j + 0.5)
    // in the continuous convention used by the geo model, but sampling
    // here addresses the pixel lattice directly: sample(i, j) returns
    // the interpolated value treating pixel centers as integer sites.
    float sample_bilinear(float x, float y) const;

    // Bilinear sample returning 0 outside the raster.
    float sample_bilinear_or_zero(float x, float y) const;
};

// 8-bit binary PGM (P5). PPM (P6) is accepted on load and converted to
// grayscale by luminance 0.299R + 0.587G + 0.114B.
Image load_image(const std::string& path);
void save_pgm(const Image& img, const std::string& path);

// Separable Gaussian blur, kernel radius ceil(3*sigma).
Image gaussian_blur(const Image& img, float sigma);

// Central-difference gradients (borders use one-sided differences).
void gradients(const Image& img, Image& gx, Image& gy);

}  // namespace glvl
