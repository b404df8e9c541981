#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "warpgrid/errors.hpp"
#include "warpgrid/io.hpp"
#include "warpgrid/rng.hpp"
#include "warpgrid/types.hpp"
#include "warpgrid/warp.hpp"

using namespace warpgrid;
namespace fs = std::filesystem;

namespace {

// 2x2 8-bit grayscale PNG with pixel bytes [0,255,128,64], written by an
// external encoder (PIL) so decoding is checked against a foreign artifact.
static const unsigned char kGray2x2Png[] = {
    137, 80, 78, 71, 13, 10, 26, 10, 0, 0, 0, 13, 73, 72, 68, 82, 0, 0, 0, 2, 0, 0, 0, 2,
    8, 0, 0, 0, 0, 87, 221, 82, 248, 0, 0, 0, 14, 73, 68, 65, 84, 120, 156, 99, 96, 248,
    207, 208, 224, 0, 0, 5, 66, 1, 192, 112, 54, 54, 214, 0, 0, 0, 0, 73, 69, 78, 68, 174,
    66, 96, 130};

// 1-bit grayscale PNG: legal file, outside the supported 8/16-bit contract.
static const unsigned char kOneBitPng[] = {
    137, 80, 78, 71, 13, 10, 26, 10, 0, 0, 0, 13, 73, 72, 68, 82, 0, 0, 0, 8, 0, 0, 0, 1,
    1, 0, 0, 0, 0, 203, 123, 210, 238, 0, 0, 0, 10, 73, 68, 65, 84, 120, 156, 99, 88, 5,
    0, 0, 172, 0, 171, 102, 11, 228, 107, 0, 0, 0, 0, 73, 69, 78, 68, 174, 66, 96, 130};

std::string temp_dir() {
    static int counter = 0;
    const fs::path p = fs::temp_directory_path() / ("warpgrid_imagery_" + std::to_string(counter++));
    fs::create_directories(p);
    return p.string();
}

void write_bytes(const std::string& path, const unsigned char* data, size_t n) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
}

}  // namespace

TEST_CASE("load_image decodes an externally encoded grayscale PNG") {
    const std::string dir = temp_dir();
    const std::string path = dir + "/gray.png";
    write_bytes(path, kGray2x2Png, sizeof kGray2x2Png);

    const ImageBuffer img = load_image(path);
    CHECK(img.channels == 1);
    CHECK(img.height == 2);
    CHECK(img.width == 2);
    CHECK(img.at(0, 0, 0) == doctest::Approx(0.0f));
    CHECK(img.at(0, 0, 1) == doctest::Approx(1.0f));
    CHECK(img.at(0, 1, 0) == doctest::Approx(128.0f / 255.0f));
    CHECK(img.at(0, 1, 1) == doctest::Approx(64.0f / 255.0f));
}

TEST_CASE("load_image error taxonomy") {
    const std::string dir = temp_dir();

    CHECK_THROWS_AS(load_image(dir + "/missing.png"), IoError);

    // Truncated stream: keep the signature, drop the rest.
    const std::string trunc = dir + "/trunc.png";
    write_bytes(trunc, kGray2x2Png, 20);
    try {
        load_image(trunc);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.code == FormatError::Code::malformed);
    }

    const std::string onebit = dir + "/onebit.png";
    write_bytes(onebit, kOneBitPng, sizeof kOneBitPng);
    try {
        load_image(onebit);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.code == FormatError::Code::unsupported);
    }

    const std::string junk = dir + "/junk.png";
    write_bytes(junk, reinterpret_cast<const unsigned char*>("not a png at all"), 16);
    try {
        load_image(junk);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.code == FormatError::Code::malformed);
    }
}

TEST_CASE("all-zero image round-trips as zeros") {
    const std::string dir = temp_dir();
    const ImageBuffer zeros(3, 4, 5, 0.0f);
    save_image(zeros, dir + "/zeros.png");
    const ImageBuffer back = load_image(dir + "/zeros.png");
    CHECK(back.channels == 3);
    for (float v : back.data) CHECK(v == 0.0f);
}

TEST_CASE("image save/load is idempotent at the stored bit depth") {
    const std::string dir = temp_dir();
    Rng rng(42);
    for (int depth : {8, 16}) {
        ImageBuffer img(3, 9, 7);
        for (float& v : img.data) v = rng.uniform();
        const std::string p1 = dir + "/a" + std::to_string(depth) + ".png";
        const std::string p2 = dir + "/b" + std::to_string(depth) + ".png";
        save_image(img, p1, depth);
        const ImageBuffer once = load_image(p1);
        save_image(once, p2, depth);
        const ImageBuffer twice = load_image(p2);
        CHECK(once.data == twice.data);
    }
}

TEST_CASE("16-bit PNGs load with full precision") {
    const std::string dir = temp_dir();
    ImageBuffer img(1, 2, 2);
    img.data = {0.0f, 1.0f, 12345.0f / 65535.0f, 40000.0f / 65535.0f};
    save_image(img, dir + "/d16.png", 16);
    const ImageBuffer back = load_image(dir + "/d16.png");
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
}

TEST_CASE("identity_grid corner and center conventions") {
    const SamplingGrid g2 = identity_grid(2, 2);
    CHECK(g2.x(0, 0) == -1.0f);
    CHECK(g2.x(0, 1) == 1.0f);
    CHECK(g2.x(1, 0) == -1.0f);
    CHECK(g2.x(1, 1) == 1.0f);
    CHECK(g2.y(0, 0) == -1.0f);
    CHECK(g2.y(0, 1) == -1.0f);
    CHECK(g2.y(1, 0) == 1.0f);
    CHECK(g2.y(1, 1) == 1.0f);

    const SamplingGrid g3 = identity_grid(3, 3);
    CHECK(g3.x(1, 1) == 0.0f);
    CHECK(g3.y(1, 1) == 0.0f);

    CHECK_THROWS_AS(identity_grid(1, 5), std::invalid_argument);
}

TEST_CASE("identity_grid coords increase along axes and are antisymmetric") {
    const SamplingGrid g = identity_grid(11, 17);
    for (int c = 1; c < g.width; ++c) CHECK(g.x(0, c) > g.x(0, c - 1));
    for (int r = 1; r < g.height; ++r) CHECK(g.y(r, 0) > g.y(r - 1, 0));
    for (int c = 0; c < g.width; ++c)
        CHECK(g.x(0, c) == doctest::Approx(-g.x(0, g.width - 1 - c)).epsilon(1e-6));
    for (int r = 0; r < g.height; ++r)
        CHECK(g.y(r, 0) == doctest::Approx(-g.y(g.height - 1 - r, 0)).epsilon(1e-6));
}

TEST_CASE("grid save/load round-trip is bitwise") {
    const std::string dir = temp_dir();
    Rng rng(7);
    SamplingGrid g(13, 9);
    for (float& v : g.coords) v = rng.uniform(-2.0f, 2.0f);  // including out-of-range values
    const std::string path = dir + "/g.wgrd";
    save_grid(g, path);
    const SamplingGrid back = load_grid(path);
    CHECK(back.height == g.height);
    CHECK(back.width == g.width);
    REQUIRE(back.coords.size() == g.coords.size());
    CHECK(std::memcmp(back.coords.data(), g.coords.data(), g.coords.size() * sizeof(float)) == 0);
}

TEST_CASE("grid loader rejects bad magic and size mismatch") {
    const std::string dir = temp_dir();
    const std::string path = dir + "/g.wgrd";
    SamplingGrid g = identity_grid(4, 4);
    save_grid(g, path);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
    }
    try {
        load_grid(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.code == FormatError::Code::bad_magic);
    }

    save_grid(g, path);
    fs::resize_file(path, fs::file_size(path) - 8);
    try {
        load_grid(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.code == FormatError::Code::size_mismatch);
    }
}

TEST_CASE("keypoints round-trip through JSON") {
    const std::string dir = temp_dir();
    KeypointSet kps = {{1.5f, 2.0f, 3.25f, 4.0f, true}, {0.0f, 0.0f, 5.0f, 6.0f, false}};
    save_keypoints(kps, dir + "/k.json");
    const KeypointSet back = load_keypoints(dir + "/k.json");
    REQUIRE(back.size() == 2);
    CHECK(back[0].x_src == 1.5f);
    CHECK(back[0].x_tgt == 3.25f);
    CHECK(back[0].visible);
    CHECK(!back[1].visible);
}

TEST_CASE("masks store exactly binary values") {
    const std::string dir = temp_dir();
    Mask m(6, 6, 0);
    m.at(2, 3) = 1;
    m.at(5, 5) = 1;
    save_mask(m, dir + "/m.png");
    const Mask back = load_mask(dir + "/m.png");
    CHECK(back.data == m.data);
    CHECK(back.count() == 2);
}
