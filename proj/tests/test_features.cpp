#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"
#include "warpgrid/errors.hpp"
#include "warpgrid/features.hpp"

using namespace warpgrid;
using namespace warpgrid::testing;

namespace {

double dot(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

}  // namespace

TEST_CASE("extractors are deterministic given a seed and preserve dims") {
    const ImageBuffer img = random_image(3, 12, 10, 5);
    for (auto kind : {FeatureExtractor::Kind::identity, FeatureExtractor::Kind::random_conv,
                      FeatureExtractor::Kind::pyramid}) {
        const FeatureExtractor e1(kind, 99);
        const FeatureExtractor e2(kind, 99);
        const ImageBuffer f1 = e1.forward(img);
        const ImageBuffer f2 = e2.forward(img);
        CHECK(f1.data == f2.data);
        CHECK(f1.height == img.height);
        CHECK(f1.width == img.width);
        CHECK(f1.channels == e1.out_channels(img.channels));
    }
}

TEST_CASE("different seeds give different conv banks") {
    const ImageBuffer img = random_image(3, 8, 8, 5);
    const FeatureExtractor a(FeatureExtractor::Kind::random_conv, 1);
    const FeatureExtractor b(FeatureExtractor::Kind::random_conv, 2);
    CHECK(a.forward(img).data != b.forward(img).data);
}

TEST_CASE("identity extractor passes data through") {
    const ImageBuffer img = random_image(2, 6, 6, 7);
    const FeatureExtractor e(FeatureExtractor::Kind::identity, 0);
    CHECK(e.forward(img).data == img.data);
}

TEST_CASE("extractor backward matches finite differences") {
    // Directional central differences (h = 1e-3): the analytic gradient is
    // contracted with the realized float perturbation.
    for (auto kind : {FeatureExtractor::Kind::identity, FeatureExtractor::Kind::random_conv,
                      FeatureExtractor::Kind::pyramid}) {
        const FeatureExtractor e(kind, 11);
        const ImageBuffer img = random_image(3, 8, 8, 13);
        const ImageBuffer up = random_image(e.out_channels(3), 8, 8, 14);
        const ImageBuffer din = e.backward(img, up);

        Rng rng(15);
        const double h = 1e-3;
        for (int d = 0; d < 15; ++d) {
            ImageBuffer plus = img, minus = img;
            std::vector<float> dir(img.data.size());
            for (size_t i = 0; i < dir.size(); ++i) {
                dir[i] = rng.uniform() < 0.5f ? -1.0f : 1.0f;
                plus.data[i] = static_cast<float>(img.data[i] + h * dir[i]);
                minus.data[i] = static_cast<float>(img.data[i] - h * dir[i]);
            }
            const double fd = dot(e.forward(plus).data, up.data) - dot(e.forward(minus).data, up.data);
            double predicted = 0.0;
            for (size_t i = 0; i < dir.size(); ++i)
                predicted += static_cast<double>(din.data[i]) *
                             (static_cast<double>(plus.data[i]) - minus.data[i]);
            CHECK(rel_err(fd, predicted) <= 1e-3);
        }
    }
}

TEST_CASE("kind names round-trip and unknown names are rejected") {
    CHECK(FeatureExtractor::kind_from_name("identity") == FeatureExtractor::Kind::identity);
    CHECK(FeatureExtractor::kind_from_name("random_conv") == FeatureExtractor::Kind::random_conv);
    CHECK(FeatureExtractor::kind_from_name("pyramid") == FeatureExtractor::Kind::pyramid);
    CHECK(FeatureExtractor::name_of(FeatureExtractor::Kind::pyramid) == "pyramid");
    CHECK_THROWS_AS(FeatureExtractor::kind_from_name("dino"), ConfigError);
}
