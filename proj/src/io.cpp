#include "warpgrid/io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "warpgrid/errors.hpp"

namespace warpgrid {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_error_fn(png_structp png, png_const_charp) {
    std::longjmp(png_jmpbuf(png), 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

ImageBuffer load_image(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open image file: " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw FormatError(FormatError::Code::malformed, "not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    std::vector<png_bytep> row_ptrs;
    std::vector<png_byte> raw;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(FormatError::Code::malformed, "malformed PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE || (bit_depth != 8 && bit_depth != 16)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(FormatError::Code::unsupported,
                          "unsupported PNG bit depth or color type: " + path);
    }
    if (bit_depth == 16) png_set_swap(png);  // wire format is big-endian
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    const size_t rowbytes = png_get_rowbytes(png, info);
    raw.resize(rowbytes * h);
    row_ptrs.resize(h);
    for (png_uint_32 r = 0; r < h; ++r) row_ptrs[r] = raw.data() + r * rowbytes;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImageBuffer img(channels, static_cast<int>(h), static_cast<int>(w));
    if (bit_depth == 8) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < channels; ++c)
                    img.at(c, y, x) = raw[y * rowbytes + static_cast<size_t>(x) * channels + c] / 255.0f;
    } else {
        const uint16_t* px = reinterpret_cast<const uint16_t*>(raw.data());
        const size_t row_stride = rowbytes / 2;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < channels; ++c)
                    img.at(c, y, x) = px[y * row_stride + static_cast<size_t>(x) * channels + c] / 65535.0f;
    }
    return img;
}

void save_image(const ImageBuffer& image, const std::string& path, int bit_depth) {
    if (image.channels < 1 || image.channels > 4 || image.height < 1 || image.width < 1)
        throw std::invalid_argument("save_image: invalid image shape");
    if (bit_depth != 8 && bit_depth != 16)
        throw std::invalid_argument("save_image: bit depth must be 8 or 16");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    std::vector<png_byte> raw;
    std::vector<png_bytep> row_ptrs;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path);
    }

    static const int kColorTypes[5] = {0, PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA,
                                       PNG_COLOR_TYPE_RGB, PNG_COLOR_TYPE_RGB_ALPHA};
    png_init_io(png, fp.get());
    // Fixed compression settings keep rewrites byte-identical.
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, image.width, image.height, bit_depth, kColorTypes[image.channels],
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);

    const size_t rowbytes = static_cast<size_t>(image.width) * image.channels * (bit_depth / 8);
    raw.resize(rowbytes * image.height);
    const float scale = bit_depth == 8 ? 255.0f : 65535.0f;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                float v = image.at(c, y, x);
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                const uint32_t q = static_cast<uint32_t>(std::lround(v * scale));
                if (bit_depth == 8) {
                    raw[y * rowbytes + (static_cast<size_t>(x) * image.channels + c)] =
                        static_cast<png_byte>(q);
                } else {
                    uint16_t* row = reinterpret_cast<uint16_t*>(raw.data() + y * rowbytes);
                    row[static_cast<size_t>(x) * image.channels + c] = static_cast<uint16_t>(q);
                }
            }
        }
    }
    row_ptrs.resize(image.height);
    for (int y = 0; y < image.height; ++y) row_ptrs[y] = raw.data() + y * rowbytes;
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Mask load_mask(const std::string& path) {
    const ImageBuffer img = load_image(path);
    Mask m(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            m.at(r, c) = img.at(0, r, c) >= 0.5f ? 1 : 0;
    return m;
}

void save_mask(const Mask& mask, const std::string& path) {
    ImageBuffer img(1, mask.height, mask.width);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            img.at(0, r, c) = mask.at(r, c) ? 1.0f : 0.0f;
    save_image(img, path, 8);
}

ConfidenceMap load_confidence(const std::string& path) {
    const ImageBuffer img = load_image(path);
    ConfidenceMap m(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            m.at(r, c) = img.at(0, r, c);
    return m;
}

void save_confidence(const ConfidenceMap& map, const std::string& path) {
    ImageBuffer img(1, map.height, map.width);
    for (int r = 0; r < map.height; ++r)
        for (int c = 0; c < map.width; ++c)
            img.at(0, r, c) = map.at(r, c);
    save_image(img, path, 8);
}

namespace {
constexpr char kGridMagic[4] = {'W', 'G', 'R', 'D'};
constexpr uint32_t kGridVersion = 1;

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

void save_grid(const SamplingGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kGridMagic, 4);
    put_u32(out, kGridVersion);
    put_u32(out, static_cast<uint32_t>(grid.height));
    put_u32(out, static_cast<uint32_t>(grid.width));
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(grid.coords.data()),
              static_cast<std::streamsize>(grid.coords.size() * sizeof(float)));
    if (!out) throw IoError("short write: " + path);
}

SamplingGrid load_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open grid file: " + path);
    const std::streamoff file_size = in.tellg();
    in.seekg(0);

    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kGridMagic, 4) != 0)
        throw FormatError(FormatError::Code::bad_magic, "bad grid magic: " + path);
    const uint32_t version = get_u32(in);
    if (version != kGridVersion)
        throw FormatError(FormatError::Code::unsupported, "unsupported grid version: " + path);
    const uint32_t h = get_u32(in);
    const uint32_t w = get_u32(in);
    const uint64_t payload = 2ull * h * w * sizeof(float);
    if (!in || static_cast<uint64_t>(file_size) != 16 + payload)
        throw FormatError(FormatError::Code::size_mismatch,
                          "grid header dims inconsistent with file size: " + path);

    SamplingGrid g(static_cast<int>(h), static_cast<int>(w));
    in.read(reinterpret_cast<char*>(g.coords.data()), static_cast<std::streamsize>(payload));
    if (!in) throw FormatError(FormatError::Code::size_mismatch, "short grid payload: " + path);
    return g;
}

void save_keypoints(const KeypointSet& kps, const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Keypoint& k : kps)
        arr.push_back({k.x_src, k.y_src, k.x_tgt, k.y_tgt, k.visible ? 1 : 0});
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << arr.dump(2) << "\n";
}

KeypointSet load_keypoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open keypoint file: " + path);
    nlohmann::json arr;
    try {
        in >> arr;
    } catch (const nlohmann::json::exception&) {
        throw FormatError(FormatError::Code::malformed, "malformed keypoint JSON: " + path);
    }
    if (!arr.is_array())
        throw FormatError(FormatError::Code::malformed, "keypoint JSON must be an array: " + path);
    KeypointSet kps;
    kps.reserve(arr.size());
    for (const auto& rec : arr) {
        if (!rec.is_array() || rec.size() != 5)
            throw FormatError(FormatError::Code::malformed, "keypoint record must have 5 entries: " + path);
        Keypoint k;
        k.x_src = rec[0].get<float>();
        k.y_src = rec[1].get<float>();
        k.x_tgt = rec[2].get<float>();
        k.y_tgt = rec[3].get<float>();
        k.visible = rec[4].is_boolean() ? rec[4].get<bool>() : rec[4].get<double>() != 0.0;
        kps.push_back(k);
    }
    return kps;
}

}  // namespace warpgrid
