#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "warpgrid/types.hpp"

namespace warpgrid {

// Pluggable feature map for the matching loss. Deterministic for a given
// seed; output spatial dims always equal input dims.
//
//   identity    - raw intensities
//   random_conv - fixed 16-filter 3x3 convolution bank with tanh (default)
//   pyramid     - input stacked with two blurred copies (linear)
class FeatureExtractor {
public:
    enum class Kind { identity, random_conv, pyramid };

    explicit FeatureExtractor(Kind kind = Kind::random_conv, uint32_t seed = 17);

    Kind kind() const { return kind_; }
    int out_channels(int in_channels) const;

    ImageBuffer forward(const ImageBuffer& input) const;
    // dL/d(input) given dL/d(output); recomputes activations internally.
    ImageBuffer backward(const ImageBuffer& input, const ImageBuffer& upstream) const;

    static Kind kind_from_name(const std::string& name);  // throws ConfigError
    static std::string name_of(Kind kind);

private:
    static constexpr int kBankFilters = 16;

    Kind kind_;
    uint32_t seed_;
    // Conv bank weights per input channel count (1..4), filters x cin x 3 x 3.
    std::vector<std::vector<float>> bank_;

    ImageBuffer bank_preactivation(const ImageBuffer& input) const;
};

}  // namespace warpgrid
