#include "glvl/geo.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "glvl/errors.hpp"

namespace glvl {

void GeoRefMap::validate() const {
    if (width_px <= 0 || height_px <= 0) throw ConfigError("map dimensions must be positive");
    if (!(ur.lat > ll.lat) || !(ur.lon > ll.lon))
        throw ConfigError("map corners must satisfy ur > ll componentwise");
    if (!raster.empty() && (raster.width != width_px || raster.height != height_px))
        throw ConfigError("raster dimensions disagree with sidecar");
    if (ll.lat < -90 || ur.lat > 90 || ll.lon < -180 || ur.lon > 180)
        throw RangeError("map corners outside geodetic range");
}

GeoPoint pixel_to_geo(const GeoRefMap& map, const PixelPoint& p) {
    if (p.x < 0 || p.x > map.width_px || p.y < 0 || p.y > map.height_px)
        throw RangeError("pixel outside map: (" + std::to_string(p.x) + "," + std::to_string(p.y) + ")");
    GeoPoint g;
    g.lon = map.ll.lon + (p.x / map.width_px) * (map.ur.lon - map.ll.lon);
    g.lat = map.ur.lat - (p.y / map.height_px) * (map.ur.lat - map.ll.lat);
    return g;
}

PixelPoint geo_to_pixel(const GeoRefMap& map, const GeoPoint& g) {
    if (g.lat < map.ll.lat || g.lat > map.ur.lat || g.lon < map.ll.lon || g.lon > map.ur.lon)
        throw RangeError("geo point outside map bounds");
    PixelPoint p;
    p.x = (g.lon - map.ll.lon) / (map.ur.lon - map.ll.lon) * map.width_px;
    p.y = (map.ur.lat - g.lat) / (map.ur.lat - map.ll.lat) * map.height_px;
    return p;
}

double geo_distance_m(const GeoPoint& a, const GeoPoint& b) {
    constexpr double deg = M_PI / 180.0;
    double dphi = (b.lat - a.lat) * deg;
    double dlam = (b.lon - a.lon) * deg;
    double phim = 0.5 * (a.lat + b.lat) * deg;
    double x = std::cos(phim) * dlam;
    return kEarthRadiusM * std::sqrt(dphi * dphi + x * x);
}

GeoSidecar load_geo_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open geo sidecar: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad geo sidecar json (" + path + "): " + e.what());
    }
    GeoSidecar sc;
    try {
        sc.ll.lat = j.at("ll").at("lat").get<double>();
        sc.ll.lon = j.at("ll").at("lon").get<double>();
        sc.ur.lat = j.at("ur").at("lat").get<double>();
        sc.ur.lon = j.at("ur").at("lon").get<double>();
        sc.width_px = j.at("width_px").get<int>();
        sc.height_px = j.at("height_px").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("geo sidecar missing field (" + path + "): " + e.what());
    }
    return sc;
}

std::string geo_sidecar_json(const GeoSidecar& sc) {
    nlohmann::json j;
    j["ll"] = {{"lat", sc.ll.lat}, {"lon", sc.ll.lon}};
    j["ur"] = {{"lat", sc.ur.lat}, {"lon", sc.ur.lon}};
    j["width_px"] = sc.width_px;
    j["height_px"] = sc.height_px;
    return j.dump(2) + "\n";
}

void save_geo_sidecar(const GeoSidecar& sc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write geo sidecar: " + path);
    out << geo_sidecar_json(sc);
}

GeoRefMap load_geo_map(const std::string& raster_path, const std::string& sidecar_path) {
    GeoSidecar sc = load_geo_sidecar(sidecar_path);
    GeoRefMap map;
    map.width_px = sc.width_px;
    map.height_px = sc.height_px;
    map.ll = sc.ll;
    map.ur = sc.ur;
    map.raster = load_image(raster_path);
    map.validate();
    return map;
}

}  // namespace glvl
