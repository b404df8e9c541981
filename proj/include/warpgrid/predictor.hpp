#pragma once

#include <string>
#include <vector>

#include "warpgrid/losses.hpp"
#include "warpgrid/tape.hpp"

namespace warpgrid {

// Convolutional encoder-decoder: 4 stride-2 encoder blocks, 4 nearest-upsample
// decoder blocks, leaky-relu activations, zero-initialized 3-channel head
// (2 displacement planes + 1 confidence logit). Input is the reference image
// concatenated with the other image, so spatial dims must divide by 16.
struct PredictorSpec {
    int base_channels = 32;
    int input_channels = 6;  // two stacked images
    uint32_t seed = 1;
};

class TinyPredictor {
public:
    explicit TinyPredictor(const PredictorSpec& spec);

    const PredictorSpec& spec() const { return spec_; }
    std::vector<std::vector<float>>& buffers() { return buffers_; }
    const std::vector<std::vector<float>>& buffers() const { return buffers_; }

    // One weight-shared pass per direction: net(t,s) yields the grid that
    // rebuilds the target from the source plus the target-side confidence,
    // net(s,t) the opposite pair, so swapping inputs swaps the output roles.
    GridPrediction predict(const ImageBuffer& image_s, const ImageBuffer& image_t) const;

    // Graph for one direction on an existing tape (training path). Outputs:
    // displacement (2ch) and confidence (1ch, post-sigmoid), both full-res.
    struct Outputs {
        Tape::NodeId displacement = -1;
        Tape::NodeId confidence = -1;
    };
    Outputs build(Tape& tape, const std::vector<Tape::NodeId>& param_nodes, const ImageBuffer& ref,
                  const ImageBuffer& other) const;
    // Parameter nodes in buffer order; create once per tape, shared by both passes.
    std::vector<Tape::NodeId> make_param_nodes(Tape& tape) const;

    // "WCKP" checkpoint: magic, u32 version, u32 spec-JSON length, JSON blob,
    // raw little-endian f32 buffers in declaration order. Bit-exact round trip.
    void save_checkpoint(const std::string& path) const;
    static TinyPredictor load_checkpoint(const std::string& path);

private:
    struct Layer {
        int in_ch, out_ch, stride;
        bool upsample_before;
    };
    std::vector<Layer> layers() const;

    PredictorSpec spec_;
    std::vector<std::vector<float>> buffers_;  // weight, bias per layer in order
};

}  // namespace warpgrid
