#include "warpgrid/predictor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "warpgrid/errors.hpp"
#include "warpgrid/rng.hpp"

namespace warpgrid {

std::vector<TinyPredictor::Layer> TinyPredictor::layers() const {
    const int b = spec_.base_channels;
    return {
        {spec_.input_channels, b, 2, false},  // H/2
        {b, 2 * b, 2, false},                 // H/4
        {2 * b, 4 * b, 2, false},             // H/8
        {4 * b, 4 * b, 2, false},             // H/16
        {4 * b, 4 * b, 1, true},              // H/8
        {4 * b, 2 * b, 1, true},              // H/4
        {2 * b, b, 1, true},                  // H/2
        {b, b, 1, true},                      // H
        {b, 3, 1, false},                     // head: dx, dy, confidence logit
    };
}

TinyPredictor::TinyPredictor(const PredictorSpec& spec) : spec_(spec) {
    if (spec_.base_channels < 1) throw std::invalid_argument("TinyPredictor: base_channels must be >= 1");
    const auto ls = layers();
    Rng rng(Rng::derive(spec_.seed, 0x93ed0000u));
    for (size_t i = 0; i < ls.size(); ++i) {
        const Layer& l = ls[i];
        std::vector<float> w(static_cast<size_t>(l.out_ch) * l.in_ch * 9);
        const bool head = i + 1 == ls.size();
        if (!head) {
            const float sigma = std::sqrt(2.0f / (9.0f * l.in_ch));
            for (float& v : w) v = sigma * rng.normal();
        }
        buffers_.push_back(std::move(w));
        buffers_.emplace_back(l.out_ch, 0.0f);  // bias, zero
    }
}

std::vector<Tape::NodeId> TinyPredictor::make_param_nodes(Tape& tape) const {
    const auto ls = layers();
    std::vector<Tape::NodeId> nodes;
    for (size_t i = 0; i < ls.size(); ++i) {
        const Layer& l = ls[i];
        Tensor w(l.out_ch, l.in_ch, 9);
        w.data = buffers_[2 * i];
        Tensor b(l.out_ch, 1, 1);
        b.data = buffers_[2 * i + 1];
        nodes.push_back(tape.parameter(std::move(w)));
        nodes.push_back(tape.parameter(std::move(b)));
    }
    return nodes;
}

TinyPredictor::Outputs TinyPredictor::build(Tape& tape, const std::vector<Tape::NodeId>& param_nodes,
                                            const ImageBuffer& ref, const ImageBuffer& other) const {
    if (!ref.same_shape(other)) throw std::invalid_argument("TinyPredictor: image dims differ");
    if (ref.height % 16 != 0 || ref.width % 16 != 0)
        throw std::invalid_argument("TinyPredictor: dims must be divisible by 16");
    if (2 * ref.channels != spec_.input_channels)
        throw std::invalid_argument("TinyPredictor: channel count does not match spec");

    Tensor tr(ref.channels, ref.height, ref.width);
    tr.data = ref.data;
    Tensor to(other.channels, other.height, other.width);
    to.data = other.data;
    Tape::NodeId x = tape.concat_channels(tape.input(std::move(tr)), tape.input(std::move(to)));

    const auto ls = layers();
    for (size_t i = 0; i < ls.size(); ++i) {
        const Layer& l = ls[i];
        if (l.upsample_before) x = tape.upsample_nearest2(x);
        x = tape.conv2d(x, param_nodes[2 * i], param_nodes[2 * i + 1], l.stride);
        if (i + 1 < ls.size()) x = tape.leaky_relu(x, 0.1f);
    }

    Outputs out;
    out.displacement = tape.slice_channels(x, 0, 2);
    out.confidence = tape.sigmoid_op(tape.slice_channels(x, 2, 1));
    return out;
}

GridPrediction TinyPredictor::predict(const ImageBuffer& image_s, const ImageBuffer& image_t) const {
    for (const auto& buf : buffers_)
        for (float v : buf)
            if (!std::isfinite(v)) throw NumericError("TinyPredictor: non-finite parameters");

    Tape tape;
    const auto params = make_param_nodes(tape);
    const Outputs dir_st = build(tape, params, image_t, image_s);  // target-frame outputs
    const Outputs dir_ts = build(tape, params, image_s, image_t);  // source-frame outputs

    const SamplingGrid id = identity_grid(image_s.height, image_s.width);
    GridPrediction pred;
    pred.g_st = id;
    pred.g_ts = id;
    const Tensor& d_st = tape.value(dir_st.displacement);
    const Tensor& d_ts = tape.value(dir_ts.displacement);
    for (size_t i = 0; i < id.coords.size(); ++i) {
        pred.g_st.coords[i] += d_st.data[i];
        pred.g_ts.coords[i] += d_ts.data[i];
    }
    pred.conf_t = ConfidenceMap(image_s.height, image_s.width);
    pred.conf_s = ConfidenceMap(image_s.height, image_s.width);
    pred.conf_t.data = tape.value(dir_st.confidence).data;
    pred.conf_s.data = tape.value(dir_ts.confidence).data;

    if (!all_finite(pred.g_st.coords) || !all_finite(pred.g_ts.coords))
        throw NumericError("TinyPredictor: non-finite activations");
    return pred;
}

namespace {
constexpr char kCkptMagic[4] = {'W', 'C', 'K', 'P'};
constexpr uint32_t kCkptVersion = 1;

void put_u32(std::ofstream& out, uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}
}  // namespace

void TinyPredictor::save_checkpoint(const std::string& path) const {
    nlohmann::json spec;
    spec["base_channels"] = spec_.base_channels;
    spec["input_channels"] = spec_.input_channels;
    spec["seed"] = spec_.seed;
    nlohmann::json sizes = nlohmann::json::array();
    for (const auto& b : buffers_) sizes.push_back(b.size());
    spec["buffer_sizes"] = sizes;
    const std::string blob = spec.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kCkptMagic, 4);
    put_u32(out, kCkptVersion);
    put_u32(out, static_cast<uint32_t>(blob.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    for (const auto& b : buffers_)
        out.write(reinterpret_cast<const char*>(b.data()),
                  static_cast<std::streamsize>(b.size() * sizeof(float)));
    if (!out) throw IoError("short checkpoint write: " + path);
}

TinyPredictor TinyPredictor::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw FormatError(FormatError::Code::bad_magic, "bad checkpoint magic: " + path);
    const uint32_t version = get_u32(in);
    if (version != kCkptVersion)
        throw FormatError(FormatError::Code::unsupported, "unsupported checkpoint version: " + path);
    const uint32_t blob_len = get_u32(in);
    std::string blob(blob_len, '\0');
    in.read(blob.data(), blob_len);
    if (!in) throw FormatError(FormatError::Code::malformed, "truncated checkpoint header: " + path);

    nlohmann::json spec_json;
    try {
        spec_json = nlohmann::json::parse(blob);
    } catch (const nlohmann::json::exception&) {
        throw FormatError(FormatError::Code::malformed, "malformed checkpoint spec blob: " + path);
    }

    PredictorSpec spec;
    spec.base_channels = spec_json.at("base_channels").get<int>();
    spec.input_channels = spec_json.at("input_channels").get<int>();
    spec.seed = spec_json.at("seed").get<uint32_t>();
    TinyPredictor model(spec);

    const auto sizes = spec_json.at("buffer_sizes");
    if (sizes.size() != model.buffers_.size())
        throw FormatError(FormatError::Code::size_mismatch, "checkpoint buffer count mismatch: " + path);
    for (size_t i = 0; i < model.buffers_.size(); ++i) {
        if (sizes[i].get<size_t>() != model.buffers_[i].size())
            throw FormatError(FormatError::Code::size_mismatch, "checkpoint buffer size mismatch: " + path);
        in.read(reinterpret_cast<char*>(model.buffers_[i].data()),
                static_cast<std::streamsize>(model.buffers_[i].size() * sizeof(float)));
    }
    if (!in) throw FormatError(FormatError::Code::size_mismatch, "truncated checkpoint payload: " + path);
    return model;
}

}  // namespace warpgrid
