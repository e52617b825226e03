#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace glvl {

// Tensor-blob format: magic "TBF1", u32le header length, UTF-8 JSON
// header {"dtype":"f32le","shape":[...]}, then row-major f32le payload.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    int64_t rank() const { return int64_t(shape.size()); }
    int64_t count() const;
};

Tensor load_tbf(const std::string& path);
void save_tbf(const Tensor& t, const std::string& path);

}  // namespace glvl
