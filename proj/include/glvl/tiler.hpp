#pragma once

#include <string>
#include <vector>

#include "glvl/geo.hpp"

namespace glvl {

struct Tile {
    int id = 0;
    int origin_x = 0;  // top-left, map pixel frame
    int origin_y = 0;
    int width = 0;
    int height = 0;
    GeoPoint geo_center;
};

struct TileSet {
    std::vector<Tile> tiles;
    int tile_size = 0;
    int stride = 0;
    GeoSidecar map_sidecar;
    std::string map_ref;  // path or identifier of the source raster
    uint64_t fingerprint = 0;

    const Tile& tile(int id) const;
};

// Overlapping sliding-window tiling with the last origin clamped to
// dim - tile_size so every map pixel is covered. Tiles are enumerated
// row-major over the (x, y) origin product.
TileSet make_tiles(const GeoRefMap& map, int tile_size, int stride,
                   const std::string& map_ref = "");

// Pure sub-raster copy, no resampling.
Image crop(const GeoRefMap& map, const Tile& tile);

// Translation into the map pixel frame. Out-of-extent inputs are allowed
// (homography projections may land slightly outside the tile).
PixelPoint tile_pixel_to_map_pixel(const Tile& tile, const PixelPoint& p);

// tiles/manifest.json + optional tiles/NNNNN.pgm crops.
void save_tileset(const TileSet& ts, const std::string& dir, const GeoRefMap* map_for_crops = nullptr);
TileSet load_tileset(const std::string& dir);

}  // namespace glvl
