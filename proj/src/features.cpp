#include "warpgrid/features.hpp"

#include <cmath>
#include <stdexcept>

#include "warpgrid/errors.hpp"
#include "warpgrid/rng.hpp"

namespace warpgrid {

namespace {

// One pass of the separable binomial kernel [1,4,6,4,1]/16 with zero padding.
// Symmetric kernel + zero padding makes the operator self-adjoint.
ImageBuffer binomial_blur(const ImageBuffer& in) {
    static const double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
    ImageBuffer mid(in.channels, in.height, in.width);
    for (int c = 0; c < in.channels; ++c)
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x) {
                double acc = 0.0;
                for (int d = -2; d <= 2; ++d) {
                    const int xx = x + d;
                    if (xx >= 0 && xx < in.width) acc += k[d + 2] * in.at(c, y, xx);
                }
                mid.at(c, y, x) = static_cast<float>(acc);
            }
    ImageBuffer out(in.channels, in.height, in.width);
    for (int c = 0; c < in.channels; ++c)
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x) {
                double acc = 0.0;
                for (int d = -2; d <= 2; ++d) {
                    const int yy = y + d;
                    if (yy >= 0 && yy < in.height) acc += k[d + 2] * mid.at(c, yy, x);
                }
                out.at(c, y, x) = static_cast<float>(acc);
            }
    return out;
}

}  // namespace

FeatureExtractor::FeatureExtractor(Kind kind, uint32_t seed) : kind_(kind), seed_(seed) {
    if (kind_ != Kind::random_conv) return;
    bank_.resize(4);
    for (int cin = 1; cin <= 4; ++cin) {
        Rng rng(Rng::derive(seed_, 0xfea70000u + cin));
        std::vector<float>& w = bank_[cin - 1];
        w.resize(static_cast<size_t>(kBankFilters) * cin * 9);
        const float sigma = 1.0f / std::sqrt(9.0f * cin);
        for (float& v : w) v = sigma * rng.normal();
    }
}

int FeatureExtractor::out_channels(int in_channels) const {
    switch (kind_) {
        case Kind::identity: return in_channels;
        case Kind::random_conv: return kBankFilters;
        case Kind::pyramid: return 3 * in_channels;
    }
    return in_channels;
}

ImageBuffer FeatureExtractor::bank_preactivation(const ImageBuffer& input) const {
    if (input.channels < 1 || input.channels > 4)
        throw std::invalid_argument("FeatureExtractor: channel count must be 1..4");
    const std::vector<float>& w = bank_[input.channels - 1];
    const int cin = input.channels;
    ImageBuffer pre(kBankFilters, input.height, input.width);
    for (int f = 0; f < kBankFilters; ++f) {
        for (int y = 0; y < input.height; ++y) {
            for (int x = 0; x < input.width; ++x) {
                double acc = 0.0;
                for (int ci = 0; ci < cin; ++ci) {
                    const float* kw = &w[(static_cast<size_t>(f) * cin + ci) * 9];
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int yy = y + dy;
                        if (yy < 0 || yy >= input.height) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int xx = x + dx;
                            if (xx < 0 || xx >= input.width) continue;
                            acc += kw[(dy + 1) * 3 + (dx + 1)] * input.at(ci, yy, xx);
                        }
                    }
                }
                pre.at(f, y, x) = static_cast<float>(acc);
            }
        }
    }
    return pre;
}

ImageBuffer FeatureExtractor::forward(const ImageBuffer& input) const {
    switch (kind_) {
        case Kind::identity:
            return input;
        case Kind::random_conv: {
            ImageBuffer out = bank_preactivation(input);
            for (float& v : out.data) v = std::tanh(v);
            return out;
        }
        case Kind::pyramid: {
            const ImageBuffer b1 = binomial_blur(input);
            const ImageBuffer b3 = binomial_blur(binomial_blur(b1));
            ImageBuffer out(3 * input.channels, input.height, input.width);
            const size_t plane = input.pixel_count() * input.channels;
            std::copy(input.data.begin(), input.data.end(), out.data.begin());
            std::copy(b1.data.begin(), b1.data.end(), out.data.begin() + plane);
            std::copy(b3.data.begin(), b3.data.end(), out.data.begin() + 2 * plane);
            return out;
        }
    }
    return input;
}

ImageBuffer FeatureExtractor::backward(const ImageBuffer& input, const ImageBuffer& upstream) const {
    if (upstream.channels != out_channels(input.channels) || upstream.height != input.height ||
        upstream.width != input.width)
        throw std::invalid_argument("FeatureExtractor::backward: upstream shape mismatch");

    switch (kind_) {
        case Kind::identity:
            return upstream;
        case Kind::random_conv: {
            const ImageBuffer pre = bank_preactivation(input);
            const std::vector<float>& w = bank_[input.channels - 1];
            const int cin = input.channels;
            ImageBuffer din(cin, input.height, input.width);
            for (int f = 0; f < kBankFilters; ++f) {
                for (int y = 0; y < input.height; ++y) {
                    for (int x = 0; x < input.width; ++x) {
                        const double t = std::tanh(pre.at(f, y, x));
                        const double g = upstream.at(f, y, x) * (1.0 - t * t);
                        if (g == 0.0) continue;
                        for (int ci = 0; ci < cin; ++ci) {
                            const float* kw = &w[(static_cast<size_t>(f) * cin + ci) * 9];
                            for (int dy = -1; dy <= 1; ++dy) {
                                const int yy = y + dy;
                                if (yy < 0 || yy >= input.height) continue;
                                for (int dx = -1; dx <= 1; ++dx) {
                                    const int xx = x + dx;
                                    if (xx < 0 || xx >= input.width) continue;
                                    din.at(ci, yy, xx) +=
                                        static_cast<float>(g * kw[(dy + 1) * 3 + (dx + 1)]);
                                }
                            }
                        }
                    }
                }
            }
            return din;
        }
        case Kind::pyramid: {
            const size_t plane = input.pixel_count() * input.channels;
            ImageBuffer u0(input.channels, input.height, input.width);
            ImageBuffer u1(input.channels, input.height, input.width);
            ImageBuffer u2(input.channels, input.height, input.width);
            std::copy_n(upstream.data.begin(), plane, u0.data.begin());
            std::copy_n(upstream.data.begin() + plane, plane, u1.data.begin());
            std::copy_n(upstream.data.begin() + 2 * plane, plane, u2.data.begin());
            const ImageBuffer g1 = binomial_blur(u1);
            const ImageBuffer g2 = binomial_blur(binomial_blur(binomial_blur(u2)));
            ImageBuffer din = u0;
            for (size_t i = 0; i < din.data.size(); ++i) din.data[i] += g1.data[i] + g2.data[i];
            return din;
        }
    }
    return upstream;
}

FeatureExtractor::Kind FeatureExtractor::kind_from_name(const std::string& name) {
    if (name == "identity") return Kind::identity;
    if (name == "random_conv") return Kind::random_conv;
    if (name == "pyramid") return Kind::pyramid;
    throw ConfigError("unknown feature extractor: " + name);
}

std::string FeatureExtractor::name_of(Kind kind) {
    switch (kind) {
        case Kind::identity: return "identity";
        case Kind::random_conv: return "random_conv";
        case Kind::pyramid: return "pyramid";
    }
    return "identity";
}

}  // namespace warpgrid
