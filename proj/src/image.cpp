#include "glvl/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "glvl/errors.hpp"

namespace glvl {

float Image::sample_bilinear(float x, float y) const {
    float fx = std::clamp(x, 0.0f, float(width - 1));
    float fy = std::clamp(y, 0.0f, float(height - 1));
    int x0 = std::min(int(fx), width - 2 >= 0 ? width - 2 : 0);
    int y0 = std::min(int(fy), height - 2 >= 0 ? height - 2 : 0);
    int x1 = std::min(x0 + 1, width - 1);
    int y1 = std::min(y0 + 1, height - 1);
    float ax = fx - x0;
    float ay = fy - y0;
    float v00 = at(x0, y0), v10 = at(x1, y0), v01 = at(x0, y1), v11 = at(x1, y1);
    return (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11);
}

float Image::sample_bilinear_or_zero(float x, float y) const {
    if (x < 0.f || y < 0.f || x > float(width - 1) || y > float(height - 1)) return 0.f;
    return sample_bilinear(x, y);
}

namespace {

int read_pnm_int(std::istream& in) {
    // Skips whitespace and '#' comments per the PNM grammar.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw FormatError("malformed PNM header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = in.get();
    }
    return v;
}

}  // namespace

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open image: " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw FormatError("unsupported image magic in " + path + " (want P5 or P6)");
    bool color = (m1 == '6');
    int w = read_pnm_int(in);
    int h = read_pnm_int(in);
    int maxval = read_pnm_int(in);
    if (w <= 0 || h <= 0) throw FormatError("bad PNM dimensions in " + path);
    if (maxval != 255) throw FormatError("only 8-bit PNM supported: " + path);

    Image img(w, h);
    size_t n = size_t(w) * size_t(h);
    if (color) {
        std::vector<uint8_t> buf(n * 3);
        in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
        if (size_t(in.gcount()) != buf.size()) throw FormatError("truncated PPM payload: " + path);
        for (size_t i = 0; i < n; ++i) {
            float lum = 0.299f * buf[3 * i] + 0.587f * buf[3 * i + 1] + 0.114f * buf[3 * i + 2];
            img.data[i] = lum / 255.0f;
        }
    } else {
        std::vector<uint8_t> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
        if (size_t(in.gcount()) != buf.size()) throw FormatError("truncated PGM payload: " + path);
        for (size_t i = 0; i < n; ++i) img.data[i] = buf[i] / 255.0f;
    }
    return img;
}

void save_pgm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write image: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> buf(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        float v = std::clamp(img.data[i], 0.0f, 1.0f);
        buf[i] = uint8_t(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!out) throw FormatError("short write: " + path);
}

Image gaussian_blur(const Image& img, float sigma) {
    if (sigma <= 0.f) return img;
    int radius = int(std::ceil(3.0f * sigma));
    std::vector<float> kernel(2 * radius + 1);
    float sum = 0.f;
    for (int i = -radius; i <= radius; ++i) {
        float v = std::exp(-0.5f * (i * i) / (sigma * sigma));
        kernel[i + radius] = v;
        sum += v;
    }
    for (auto& k : kernel) k /= sum;

    Image tmp(img.width, img.height);
    Image out(img.width, img.height);
    // Horizontal pass, edge clamp.
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float acc = 0.f;
            for (int i = -radius; i <= radius; ++i) {
                int xi = std::clamp(x + i, 0, img.width - 1);
                acc += kernel[i + radius] * img.at(xi, y);
            }
            tmp.at(x, y) = acc;
        }
    }
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float acc = 0.f;
            for (int i = -radius; i <= radius; ++i) {
                int yi = std::clamp(y + i, 0, img.height - 1);
                acc += kernel[i + radius] * tmp.at(x, yi);
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

void gradients(const Image& img, Image& gx, Image& gy) {
    gx = Image(img.width, img.height);
    gy = Image(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int xl = std::max(x - 1, 0), xr = std::min(x + 1, img.width - 1);
            int yu = std::max(y - 1, 0), yd = std::min(y + 1, img.height - 1);
            float sx = (xr - xl) > 0 ? float(xr - xl) : 1.f;
            float sy = (yd - yu) > 0 ? float(yd - yu) : 1.f;
            gx.at(x, y) = (img.at(xr, y) - img.at(xl, y)) / sx;
            gy.at(x, y) = (img.at(x, yd) - img.at(x, yu)) / sy;
        }
    }
}

}  // namespace glvl
