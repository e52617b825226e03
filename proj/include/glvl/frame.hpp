#pragma once

#include <optional>

#include "glvl/geo.hpp"
#include "glvl/image.hpp"

namespace glvl {

struct QueryFrame {
    int id = 0;
    Image image;
    std::optional<GeoPoint> truth;
};

}  // namespace glvl
