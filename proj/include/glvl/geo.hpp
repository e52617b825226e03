#pragma once

#include <string>

#include "glvl/image.hpp"

namespace glvl {

struct GeoPoint {
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, [-180, 180]
};

// Continuous pixel coordinates: origin at the top-left map corner,
// x rightward, y downward; integer values lie at pixel corners.
struct PixelPoint {
    double x = 0.0;
    double y = 0.0;
};

// North-up ortho raster with geodetic corner annotations.
struct GeoRefMap {
    int width_px = 0;
    int height_px = 0;
    GeoPoint ll;  // lower-left corner
    GeoPoint ur;  // upper-right corner
    Image raster;

    void validate() const;
};

// Linear interpolation between the corners. Pixel (0,0) is the top-left
// corner (ur.lat, ll.lon). Throws RangeError outside [0,w]x[0,h].
GeoPoint pixel_to_geo(const GeoRefMap& map, const PixelPoint& p);

// Exact algebraic inverse of pixel_to_geo. Throws RangeError outside the
// map's geodetic bounds.
PixelPoint geo_to_pixel(const GeoRefMap& map, const GeoPoint& g);

// Equirectangular small-distance approximation, R = 6,371,000 m.
double geo_distance_m(const GeoPoint& a, const GeoPoint& b);

inline constexpr double kEarthRadiusM = 6'371'000.0;

// Sidecar schema:
//   {"ll":{"lat":F,"lon":F},"ur":{"lat":F,"lon":F},"width_px":I,"height_px":I}
struct GeoSidecar {
    int width_px = 0;
    int height_px = 0;
    GeoPoint ll;
    GeoPoint ur;
};

GeoSidecar load_geo_sidecar(const std::string& path);
void save_geo_sidecar(const GeoSidecar& sc, const std::string& path);
std::string geo_sidecar_json(const GeoSidecar& sc);

// Loads raster + sidecar and cross-checks dimensions.
GeoRefMap load_geo_map(const std::string& raster_path, const std::string& sidecar_path);

inline GeoSidecar sidecar_of(const GeoRefMap& map) {
    return GeoSidecar{map.width_px, map.height_px, map.ll, map.ur};
}

}  // namespace glvl
