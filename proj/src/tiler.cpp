#include "glvl/tiler.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "glvl/errors.hpp"
#include "glvl/hash.hpp"

namespace fs = std::filesystem;

namespace glvl {

namespace {

std::vector<int> axis_origins(int dim, int tile, int stride) {
    std::vector<int> origins;
    for (int o = 0; o + tile <= dim; o += stride) origins.push_back(o);
    int last = dim - tile;
    if (origins.empty() || origins.back() != last) origins.push_back(last);
    return origins;
}

uint64_t tileset_fingerprint(const TileSet& ts) {
    std::string canon = "tiles;size=" + std::to_string(ts.tile_size) +
                        ";stride=" + std::to_string(ts.stride) +
                        ";w=" + std::to_string(ts.map_sidecar.width_px) +
                        ";h=" + std::to_string(ts.map_sidecar.height_px) +
                        ";m=" + std::to_string(ts.tiles.size()) +
                        ";map=" + ts.map_ref;
    return fnv1a(canon);
}

}  // namespace

const Tile& TileSet::tile(int id) const {
    if (id < 0 || size_t(id) >= tiles.size()) throw RangeError("tile id out of range");
    return tiles[size_t(id)];
}

TileSet make_tiles(const GeoRefMap& map, int tile_size, int stride, const std::string& map_ref) {
    if (tile_size <= 0 || stride <= 0 || stride > tile_size)
        throw ConfigError("require 0 < stride <= tile_size");
    if (tile_size > map.width_px || tile_size > map.height_px)
        throw ConfigError("tile_size exceeds map dimension");

    TileSet ts;
    ts.tile_size = tile_size;
    ts.stride = stride;
    ts.map_sidecar = sidecar_of(map);
    ts.map_ref = map_ref;

    auto xs = axis_origins(map.width_px, tile_size, stride);
    auto ys = axis_origins(map.height_px, tile_size, stride);
    int id = 0;
    for (int oy : ys) {
        for (int ox : xs) {
            Tile t;
            t.id = id++;
            t.origin_x = ox;
            t.origin_y = oy;
            t.width = tile_size;
            t.height = tile_size;
            t.geo_center = pixel_to_geo(map, {ox + tile_size / 2.0, oy + tile_size / 2.0});
            ts.tiles.push_back(t);
        }
    }
    ts.fingerprint = tileset_fingerprint(ts);
    return ts;
}

Image crop(const GeoRefMap& map, const Tile& tile) {
    if (tile.origin_x < 0 || tile.origin_y < 0 || tile.width <= 0 || tile.height <= 0 ||
        tile.origin_x + tile.width > map.width_px || tile.origin_y + tile.height > map.height_px)
        throw RangeError("tile out of map bounds");
    Image out(tile.width, tile.height);
    for (int y = 0; y < tile.height; ++y)
        for (int x = 0; x < tile.width; ++x)
            out.at(x, y) = map.raster.at(tile.origin_x + x, tile.origin_y + y);
    return out;
}

PixelPoint tile_pixel_to_map_pixel(const Tile& tile, const PixelPoint& p) {
    return {tile.origin_x + p.x, tile.origin_y + p.y};
}

void save_tileset(const TileSet& ts, const std::string& dir, const GeoRefMap* map_for_crops) {
    fs::create_directories(dir);
    nlohmann::json j;
    j["tile_size"] = ts.tile_size;
    j["stride"] = ts.stride;
    j["map_ref"] = ts.map_ref;
    j["fingerprint"] = ts.fingerprint;
    j["map"] = nlohmann::json::parse(geo_sidecar_json(ts.map_sidecar));
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ts.tiles) {
        arr.push_back({{"id", t.id},
                       {"origin", {t.origin_x, t.origin_y}},
                       {"width", t.width},
                       {"height", t.height},
                       {"geo_center", {{"lat", t.geo_center.lat}, {"lon", t.geo_center.lon}}}});
    }
    j["tiles"] = std::move(arr);
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw FormatError("cannot write tile manifest in " + dir);
    out << j.dump(2) << "\n";

    if (map_for_crops) {
        char name[16];
        for (const auto& t : ts.tiles) {
            std::snprintf(name, sizeof(name), "%05d.pgm", t.id);
            save_pgm(crop(*map_for_crops, t), (fs::path(dir) / name).string());
        }
    }
}

TileSet load_tileset(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw FormatError("cannot open tile manifest in " + dir);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad tile manifest json: ") + e.what());
    }
    TileSet ts;
    try {
        ts.tile_size = j.at("tile_size").get<int>();
        ts.stride = j.at("stride").get<int>();
        ts.map_ref = j.at("map_ref").get<std::string>();
        ts.fingerprint = j.at("fingerprint").get<uint64_t>();
        const auto& m = j.at("map");
        ts.map_sidecar.width_px = m.at("width_px").get<int>();
        ts.map_sidecar.height_px = m.at("height_px").get<int>();
        ts.map_sidecar.ll = {m.at("ll").at("lat").get<double>(), m.at("ll").at("lon").get<double>()};
        ts.map_sidecar.ur = {m.at("ur").at("lat").get<double>(), m.at("ur").at("lon").get<double>()};
        for (const auto& e : j.at("tiles")) {
            Tile t;
            t.id = e.at("id").get<int>();
            t.origin_x = e.at("origin").at(0).get<int>();
            t.origin_y = e.at("origin").at(1).get<int>();
            t.width = e.at("width").get<int>();
            t.height = e.at("height").get<int>();
            t.geo_center = {e.at("geo_center").at("lat").get<double>(),
                            e.at("geo_center").at("lon").get<double>()};
            ts.tiles.push_back(t);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("tile manifest missing field: ") + e.what());
    }
    for (size_t i = 0; i < ts.tiles.size(); ++i)
        if (ts.tiles[i].id != int(i)) throw FormatError("tile ids must be 0..m-1 in order");
    return ts;
}

}  // namespace glvl
