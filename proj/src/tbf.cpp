#include "glvl/tbf.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "glvl/errors.hpp"

namespace glvl {

int64_t Tensor::count() const {
    int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor load_tbf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open tensor file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "TBF1", 4) != 0)
        throw FormatError("bad magic in " + path + " (want TBF1)");
    uint8_t lenb[4];
    in.read(reinterpret_cast<char*>(lenb), 4);
    if (in.gcount() != 4) throw FormatError("truncated header length in " + path);
    uint32_t hlen = uint32_t(lenb[0]) | (uint32_t(lenb[1]) << 8) | (uint32_t(lenb[2]) << 16) |
                    (uint32_t(lenb[3]) << 24);
    std::string header(hlen, '\0');
    in.read(header.data(), hlen);
    if (uint32_t(in.gcount()) != hlen) throw FormatError("truncated header in " + path);

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad header json in " + path + ": " + e.what());
    }
    if (!j.contains("dtype")) throw FormatError("header missing dtype in " + path);
    if (j["dtype"] != "f32le") throw FormatError("unsupported dtype in " + path + ": " + j["dtype"].dump());
    if (!j.contains("shape") || !j["shape"].is_array())
        throw FormatError("header missing shape in " + path);

    Tensor t;
    for (const auto& d : j["shape"]) {
        if (!d.is_number_integer() || d.get<int64_t>() < 0)
            throw FormatError("bad shape entry in " + path);
        t.shape.push_back(d.get<int64_t>());
    }
    int64_t n = t.count();
    t.data.resize(size_t(n));
    in.read(reinterpret_cast<char*>(t.data.data()), std::streamsize(n * 4));
    if (in.gcount() != std::streamsize(n * 4)) throw FormatError("truncated payload in " + path);
    // f32le payload; this code targets little-endian hosts only.
    return t;
}

void save_tbf(const Tensor& t, const std::string& path) {
    if (int64_t(t.data.size()) != t.count()) throw ShapeError("tensor data size disagrees with shape");
    nlohmann::json j;
    j["dtype"] = "f32le";
    j["shape"] = t.shape;
    std::string header = j.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write tensor file: " + path);
    out.write("TBF1", 4);
    uint32_t hlen = uint32_t(header.size());
    uint8_t lenb[4] = {uint8_t(hlen), uint8_t(hlen >> 8), uint8_t(hlen >> 16), uint8_t(hlen >> 24)};
    out.write(reinterpret_cast<const char*>(lenb), 4);
    out.write(header.data(), std::streamsize(header.size()));
    out.write(reinterpret_cast<const char*>(t.data.data()), std::streamsize(t.data.size() * 4));
    if (!out) throw FormatError("short write: " + path);
}

}  // namespace glvl
