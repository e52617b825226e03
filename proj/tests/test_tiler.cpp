#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "glvl/errors.hpp"
#include "glvl/rng.hpp"
#include "glvl/tiler.hpp"

using namespace glvl;

namespace {

GeoRefMap make_map(int w, int h, uint64_t seed = 3) {
    GeoRefMap m;
    m.width_px = w;
    m.height_px = h;
    m.ll = {0, 0};
    m.ur = {1, 1};
    m.raster = Image(w, h);
    Rng rng(seed);
    for (auto& v : m.raster.data) v = float(rng.uniform());
    return m;
}

}  // namespace

TEST_CASE("exact partition: 100x100, tile 50, stride 50") {
    GeoRefMap m = make_map(100, 100);
    TileSet ts = make_tiles(m, 50, 50);
    REQUIRE(ts.tiles.size() == 4);
    CHECK(ts.tiles[0].origin_x == 0);
    CHECK(ts.tiles[0].origin_y == 0);
    CHECK(ts.tiles[1].origin_x == 50);
    CHECK(ts.tiles[1].origin_y == 0);
    CHECK(ts.tiles[2].origin_x == 0);
    CHECK(ts.tiles[2].origin_y == 50);
    CHECK(ts.tiles[3].origin_x == 50);
    CHECK(ts.tiles[3].origin_y == 50);
}

TEST_CASE("overlapping tiling: 100x100, tile 50, stride 25 -> 9 tiles") {
    GeoRefMap m = make_map(100, 100);
    TileSet ts = make_tiles(m, 50, 25);
    CHECK(ts.tiles.size() == 9);
    std::set<int> xs, ys;
    for (const auto& t : ts.tiles) {
        xs.insert(t.origin_x);
        ys.insert(t.origin_y);
    }
    CHECK(xs == std::set<int>{0, 25, 50});
    CHECK(ys == std::set<int>{0, 25, 50});
}

TEST_CASE("clamped final origin: 1000x800, tile 500, stride 250") {
    GeoRefMap m = make_map(1000, 800);
    TileSet ts = make_tiles(m, 500, 250);
    CHECK(ts.tiles.size() == 9);
    std::set<int> xs, ys;
    for (const auto& t : ts.tiles) {
        xs.insert(t.origin_x);
        ys.insert(t.origin_y);
    }
    CHECK(xs == std::set<int>{0, 250, 500});
    CHECK(ys == std::set<int>{0, 250, 300});
}

TEST_CASE("make_tiles rejects bad parameters") {
    GeoRefMap m = make_map(100, 100);
    CHECK_THROWS_AS(make_tiles(m, 200, 50), ConfigError);
    CHECK_THROWS_AS(make_tiles(m, 50, 60), ConfigError);
    CHECK_THROWS_AS(make_tiles(m, 50, 0), ConfigError);
}

TEST_CASE("coverage: every map pixel belongs to some tile") {
    GeoRefMap m = make_map(73, 41);
    TileSet ts = make_tiles(m, 16, 13);
    for (int y = 0; y < m.height_px; ++y) {
        for (int x = 0; x < m.width_px; ++x) {
            bool covered = false;
            for (const auto& t : ts.tiles) {
                if (x >= t.origin_x && x < t.origin_x + t.width && y >= t.origin_y &&
                    y < t.origin_y + t.height) {
                    covered = true;
                    break;
                }
            }
            CHECK(covered);
        }
    }
}

TEST_CASE("determinism: same inputs give identical ordering and ids") {
    GeoRefMap m = make_map(200, 150);
    TileSet a = make_tiles(m, 64, 40);
    TileSet b = make_tiles(m, 64, 40);
    REQUIRE(a.tiles.size() == b.tiles.size());
    for (size_t i = 0; i < a.tiles.size(); ++i) {
        CHECK(a.tiles[i].id == int(i));
        CHECK(a.tiles[i].origin_x == b.tiles[i].origin_x);
        CHECK(a.tiles[i].origin_y == b.tiles[i].origin_y);
    }
    CHECK(a.fingerprint == b.fingerprint);
}

TEST_CASE("crop identity and point crop") {
    GeoRefMap m = make_map(32, 32);
    Tile whole{0, 0, 0, 32, 32, {}};
    Image c = crop(m, whole);
    CHECK(c.data == m.raster.data);

    Tile px{1, 3, 7, 1, 1, {}};
    Image one = crop(m, px);
    CHECK(one.at(0, 0) == m.raster.at(3, 7));

    Tile bad{2, 30, 30, 4, 4, {}};
    CHECK_THROWS_AS(crop(m, bad), RangeError);
}

TEST_CASE("overlapping crops agree on the shared region") {
    GeoRefMap m = make_map(64, 64, 99);
    Tile a{0, 0, 0, 40, 40, {}};
    Tile b{1, 20, 20, 40, 40, {}};
    Image ia = crop(m, a), ib = crop(m, b);
    for (int y = 20; y < 40; ++y)
        for (int x = 20; x < 40; ++x)
            CHECK(ia.at(x, y) == ib.at(x - 20, y - 20));
}

TEST_CASE("tile_pixel_to_map_pixel translation") {
    Tile t0{0, 0, 0, 10, 10, {}};
    PixelPoint p = tile_pixel_to_map_pixel(t0, {5, 5});
    CHECK(p.x == 5);
    CHECK(p.y == 5);

    Tile t1{1, 250, 300, 10, 10, {}};
    p = tile_pixel_to_map_pixel(t1, {10, 20});
    CHECK(p.x == 260);
    CHECK(p.y == 320);
}

TEST_CASE("tile translation composes with pixel_to_geo like the direct path") {
    GeoRefMap m = make_map(100, 100);
    TileSet ts = make_tiles(m, 50, 25);
    for (const auto& t : ts.tiles) {
        PixelPoint local{12.5, 31.25};
        GeoPoint via_tile = pixel_to_geo(m, tile_pixel_to_map_pixel(t, local));
        GeoPoint direct = pixel_to_geo(m, {t.origin_x + local.x, t.origin_y + local.y});
        CHECK(via_tile.lat == doctest::Approx(direct.lat));
        CHECK(via_tile.lon == doctest::Approx(direct.lon));
    }
}

TEST_CASE("tileset manifest round trip") {
    GeoRefMap m = make_map(100, 100);
    TileSet ts = make_tiles(m, 50, 25, "map.pgm");
    std::string dir = "tiler_test_out";
    save_tileset(ts, dir);
    TileSet back = load_tileset(dir);
    CHECK(back.tiles.size() == ts.tiles.size());
    CHECK(back.tile_size == ts.tile_size);
    CHECK(back.stride == ts.stride);
    CHECK(back.fingerprint == ts.fingerprint);
    CHECK(back.tiles[5].origin_x == ts.tiles[5].origin_x);
    std::filesystem::remove_all(dir);
}
