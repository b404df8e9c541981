#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "test_support.hpp"
#include "warpgrid/warp.hpp"

using namespace warpgrid;
using namespace warpgrid::testing;

namespace {

// Independent brute-force bilinear interpolation at one normalized point,
// align-corners with zero padding. Kept deliberately separate from the
// implementation under test.
double oracle_sample(const ImageBuffer& img, int ch, double gx, double gy) {
    const double px = (gx + 1.0) * 0.5 * (img.width - 1);
    const double py = (gy + 1.0) * 0.5 * (img.height - 1);
    const int x0 = static_cast<int>(std::floor(px));
    const int y0 = static_cast<int>(std::floor(py));
    const double fx = px - x0, fy = py - y0;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            const int xx = x0 + dx, yy = y0 + dy;
            if (xx < 0 || xx >= img.width || yy < 0 || yy >= img.height) continue;
            const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
            acc += w * img.at(ch, yy, xx);
        }
    return acc;
}

SamplingGrid constant_grid(int h, int w, float gx, float gy) {
    SamplingGrid g(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            g.x(r, c) = gx;
            g.y(r, c) = gy;
        }
    return g;
}

double upstream_dot(const ImageBuffer& out, const ImageBuffer& up) {
    double acc = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += static_cast<double>(out.data[i]) * up.data[i];
    return acc;
}

}  // namespace

TEST_CASE("warping by the identity grid reproduces the image exactly") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        const ImageBuffer img = random_image(3, 17, 23, seed);
        const ImageBuffer out = bilinear_sample(img, identity_grid(17, 23));
        CHECK(out.data == img.data);
    }
}

TEST_CASE("constant grid at (-1,-1) reads the top-left pixel everywhere") {
    const ImageBuffer img = random_image(2, 5, 7, 9);
    const ImageBuffer out = bilinear_sample(img, constant_grid(4, 4, -1.0f, -1.0f));
    for (int ch = 0; ch < 2; ++ch)
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) CHECK(out.at(ch, r, c) == img.at(ch, 0, 0));
}

TEST_CASE("2x2 image sampled at the center interpolates all four pixels") {
    ImageBuffer img(1, 2, 2);
    img.data = {0.0f, 1.0f, 2.0f, 3.0f};
    const ImageBuffer out = bilinear_sample(img, constant_grid(1, 1, 0.0f, 0.0f));
    CHECK(out.at(0, 0, 0) == doctest::Approx(1.5f));
    CHECK(out.at(0, 0, 0) == doctest::Approx(oracle_sample(img, 0, 0.0, 0.0)));
}

TEST_CASE("forward agrees with the brute-force oracle at random points") {
    const ImageBuffer img = random_image(3, 8, 8, 21);
    Rng rng(22);
    for (int i = 0; i < 200; ++i) {
        const float gx = rng.uniform(-1.3f, 1.3f);
        const float gy = rng.uniform(-1.3f, 1.3f);
        const ImageBuffer out = bilinear_sample(img, constant_grid(1, 1, gx, gy));
        for (int ch = 0; ch < 3; ++ch)
            CHECK(out.at(ch, 0, 0) == doctest::Approx(oracle_sample(img, ch, gx, gy)).epsilon(1e-5));
    }
}

TEST_CASE("fully out-of-range samples produce zero") {
    const ImageBuffer img = random_image(1, 6, 6, 5);
    const ImageBuffer out = bilinear_sample(img, constant_grid(3, 3, 1.9f, 0.0f));
    for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("warp is linear in the image") {
    const ImageBuffer a = random_image(2, 9, 9, 31);
    const ImageBuffer b = random_image(2, 9, 9, 32);
    const SamplingGrid g = random_safe_grid(9, 9, 9, 9, 33);
    ImageBuffer combo(2, 9, 9);
    const float ca = 0.7f, cb = -0.4f;
    for (size_t i = 0; i < combo.data.size(); ++i) combo.data[i] = ca * a.data[i] + cb * b.data[i];
    const ImageBuffer wa = bilinear_sample(a, g);
    const ImageBuffer wb = bilinear_sample(b, g);
    const ImageBuffer wc = bilinear_sample(combo, g);
    for (size_t i = 0; i < wc.data.size(); ++i)
        CHECK(wc.data[i] == doctest::Approx(ca * wa.data[i] + cb * wb.data[i]).epsilon(1e-5));
}

TEST_CASE("in-range bilinear weights sum to one") {
    // Sampling an all-ones image gives the per-pixel weight sum.
    ImageBuffer ones(1, 7, 7, 1.0f);
    const SamplingGrid g = random_safe_grid(12, 12, 7, 7, 44);
    const ImageBuffer out = bilinear_sample(ones, g);
    for (float v : out.data) CHECK(v == doctest::Approx(1.0f).epsilon(1e-6));
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    const ImageBuffer img = random_image(2, 6, 6, 51);
    const SamplingGrid g = random_safe_grid(6, 6, 6, 6, 52);
    const ImageBuffer up(2, 6, 6, 0.0f);
    const WarpGradients wg = bilinear_sample_backward(img, g, up);
    for (float v : wg.d_grid.coords) CHECK(v == 0.0f);
    for (float v : wg.d_image.data) CHECK(v == 0.0f);
}

TEST_CASE("backward: constant image has zero coordinate gradient") {
    ImageBuffer img(1, 6, 6, 0.42f);
    const SamplingGrid g = random_safe_grid(6, 6, 6, 6, 53);
    const ImageBuffer up = random_image(1, 6, 6, 54);
    const WarpGradients wg = bilinear_sample_backward(img, g, up);
    for (float v : wg.d_grid.coords) CHECK(std::abs(v) < 1e-5f);
}

TEST_CASE("analytic grid gradient matches central finite differences") {
    const ImageBuffer img = random_image(3, 8, 8, 61);
    SamplingGrid g = random_safe_grid(8, 8, 8, 8, 62);
    const ImageBuffer up = random_image(3, 8, 8, 63);
    const WarpGradients wg = bilinear_sample_backward(img, g, up);

    Rng rng(64);
    const double h = 1e-3;
    int checked = 0;
    while (checked < 100) {
        const int r = rng.uniform_int(8), c = rng.uniform_int(8);
        const bool x_plane = rng.uniform() < 0.5f;
        float& coord = x_plane ? g.x(r, c) : g.y(r, c);
        const float saved = coord;

        coord = static_cast<float>(saved + h);
        const double f_plus = upstream_dot(bilinear_sample(img, g), up);
        const double actual_plus = coord;
        coord = static_cast<float>(saved - h);
        const double f_minus = upstream_dot(bilinear_sample(img, g), up);
        const double actual_minus = coord;
        coord = saved;

        const double fd = (f_plus - f_minus) / (actual_plus - actual_minus);
        const double analytic = x_plane ? wg.d_grid.x(r, c) : wg.d_grid.y(r, c);
        CHECK(rel_err(analytic, fd) <= 1e-3);
        ++checked;
    }
}

TEST_CASE("analytic image gradient matches central finite differences") {
    ImageBuffer img = random_image(2, 8, 8, 71);
    const SamplingGrid g = random_safe_grid(8, 8, 8, 8, 72);
    const ImageBuffer up = random_image(2, 8, 8, 73);
    const WarpGradients wg = bilinear_sample_backward(img, g, up);

    Rng rng(74);
    const double h = 1e-3;
    for (int i = 0; i < 100; ++i) {
        const size_t idx = static_cast<size_t>(rng.uniform() * img.data.size());
        const float saved = img.data[idx];
        img.data[idx] = static_cast<float>(saved + h);
        const double f_plus = upstream_dot(bilinear_sample(img, g), up);
        const double hp = img.data[idx];
        img.data[idx] = static_cast<float>(saved - h);
        const double f_minus = upstream_dot(bilinear_sample(img, g), up);
        const double hm = img.data[idx];
        img.data[idx] = saved;
        const double fd = (f_plus - f_minus) / (hp - hm);
        CHECK(rel_err(wg.d_image.data[idx], fd) <= 1e-3);
    }
}

TEST_CASE("backward rejects mismatched upstream shape") {
    const ImageBuffer img = random_image(1, 4, 4, 81);
    const SamplingGrid g = random_safe_grid(4, 4, 4, 4, 82);
    const ImageBuffer bad(2, 4, 4, 0.0f);
    CHECK_THROWS_AS(bilinear_sample_backward(img, g, bad), std::invalid_argument);
}

TEST_CASE("compose with identity is exact") {
    const SamplingGrid g = smooth_random_grid(10, 10, 91);
    const SamplingGrid composed = compose_grids(g, identity_grid(10, 10));
    CHECK(composed.coords == g.coords);
}

TEST_CASE("composition of two translations adds in the interior") {
    const int n = 16;
    SamplingGrid t1 = identity_grid(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) t1.x(r, c) += 0.1f;
    const SamplingGrid t2 = t1;
    const SamplingGrid composed = compose_grids(t1, t2);
    // Interior pixels: sample points of t2 stay in range and read t1 exactly.
    for (int r = 2; r < n - 2; ++r)
        for (int c = 2; c < n - 4; ++c) {
            CHECK(composed.x(r, c) == doctest::Approx(identity_grid(n, n).x(r, c) + 0.2f).epsilon(1e-5));
            CHECK(composed.y(r, c) == doctest::Approx(identity_grid(n, n).y(r, c)).epsilon(1e-5));
        }
}

TEST_CASE("out-of-range composition is marked with the sentinel") {
    const int n = 8;
    SamplingGrid far = identity_grid(n, n);
    for (float& v : far.coords) v += 3.0f;
    const SamplingGrid composed = compose_grids(identity_grid(n, n), far);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            CHECK(composed.x(r, c) == 2.0f);
            CHECK(composed.y(r, c) == 2.0f);
        }
}

TEST_CASE("warping by a composed grid approximates double warping") {
    // Locally correlated image (texture-like); white noise would measure
    // interpolation-kernel differences rather than composition fidelity.
    const int n = 64;
    ImageBuffer img(3, n, n);
    {
        Rng rng(101);
        ImageBuffer coarse = random_image(3, 8, 8, 101);
        img = resize_image(coarse, n, n);
        for (float& v : img.data) v = std::clamp(v + 0.05f * rng.uniform(-1.0f, 1.0f), 0.0f, 1.0f);
    }
    const SamplingGrid g1 = smooth_random_grid(n, n, 102, 0.05f);
    const SamplingGrid g2 = smooth_random_grid(n, n, 103, 0.05f);

    const SamplingGrid composed = compose_grids(g1, g2);
    const ImageBuffer direct = bilinear_sample(img, composed);
    const ImageBuffer twice = bilinear_sample(bilinear_sample(img, g1), g2);

    // Compare where the composition is defined, away from the padding ring.
    double mad = 0.0;
    size_t count = 0;
    for (int r = 4; r < n - 4; ++r)
        for (int c = 4; c < n - 4; ++c) {
            if (!composed.in_range(r, c)) continue;
            for (int ch = 0; ch < 3; ++ch) {
                mad += std::abs(static_cast<double>(direct.at(ch, r, c)) - twice.at(ch, r, c));
                ++count;
            }
        }
    REQUIRE(count > 0);
    mad /= count;
    CHECK(mad <= 0.02);
}

TEST_CASE("compose rejects dimension mismatch") {
    CHECK_THROWS_AS(compose_grids(identity_grid(4, 4), identity_grid(4, 5)), std::invalid_argument);
}

TEST_CASE("field resize round-trips smooth displacements") {
    // Displacement fields in normalized units survive up/downsampling.
    const int n = 32;
    const SamplingGrid warped = smooth_random_grid(n, n, 111, 0.05f);
    const SamplingGrid id = identity_grid(n, n);
    SamplingGrid disp(n, n);
    for (size_t i = 0; i < disp.coords.size(); ++i) disp.coords[i] = warped.coords[i] - id.coords[i];

    const SamplingGrid up = resize_field(disp, 2 * n, 2 * n);
    const SamplingGrid down = resize_field(up, n, n);
    for (size_t i = 0; i < disp.coords.size(); ++i)
        CHECK(std::abs(down.coords[i] - disp.coords[i]) <= 1e-3f);
}
