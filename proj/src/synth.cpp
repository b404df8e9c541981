#include "warpgrid/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "warpgrid/errors.hpp"
#include "warpgrid/io.hpp"
#include "warpgrid/rng.hpp"
#include "warpgrid/warp.hpp"

namespace fs = std::filesystem;

namespace warpgrid {

void WarpSpec::validate() const {
    if (scale_x < 0.5f || scale_x > 2.0f || scale_y < 0.5f || scale_y > 2.0f)
        throw std::invalid_argument("WarpSpec: scale out of [0.5, 2]");
    if (std::abs(translate_x) > 0.5f || std::abs(translate_y) > 0.5f)
        throw std::invalid_argument("WarpSpec: |translation| > 0.5");
    if (nonrigid) {
        for (const auto& p : nonrigid->points)
            if (std::hypot(p.dx, p.dy) > 0.3f)
                throw std::invalid_argument("WarpSpec: nonrigid displacement > 0.3");
        if (nonrigid->stiffness <= 0.0f)
            throw std::invalid_argument("WarpSpec: nonrigid stiffness must be positive");
    }
}

namespace {

constexpr double kRbfBaseWidth = 0.35;  // normalized units

struct Affine {
    double a11, a12, a21, a22, tx, ty;
};

Affine affine_of(const WarpSpec& s) {
    const double c = std::cos(s.rotation), sn = std::sin(s.rotation);
    return {c * s.scale_x, -sn * s.scale_y, sn * s.scale_x, c * s.scale_y, s.translate_x, s.translate_y};
}

void rbf_displacement(const NonrigidSpec& nr, double x, double y, double& dx, double& dy) {
    const double sigma = kRbfBaseWidth * nr.stiffness;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    dx = dy = 0.0;
    for (const auto& p : nr.points) {
        const double rx = x - p.cx, ry = y - p.cy;
        const double k = std::exp(-(rx * rx + ry * ry) * inv2s2);
        dx += k * p.dx;
        dy += k * p.dy;
    }
}

}  // namespace

void apply_warp(const WarpSpec& spec, float x, float y, float& out_x, float& out_y) {
    const Affine a = affine_of(spec);
    double ox = a.a11 * x + a.a12 * y + a.tx;
    double oy = a.a21 * x + a.a22 * y + a.ty;
    if (spec.nonrigid) {
        double dx, dy;
        rbf_displacement(*spec.nonrigid, x, y, dx, dy);
        ox += dx;
        oy += dy;
    }
    out_x = static_cast<float>(ox);
    out_y = static_cast<float>(oy);
}

TextureKind texture_from_name(const std::string& name) {
    if (name == "blobs") return TextureKind::blobs;
    if (name == "value_noise") return TextureKind::value_noise;
    if (name == "checker") return TextureKind::checker;
    throw ConfigError("unknown texture kind: " + name);
}

std::string texture_name(TextureKind kind) {
    switch (kind) {
        case TextureKind::blobs: return "blobs";
        case TextureKind::value_noise: return "value_noise";
        case TextureKind::checker: return "checker";
    }
    return "blobs";
}

namespace {

ImageBuffer texture_blobs(int h, int w, Rng& rng) {
    ImageBuffer img(3, h, w);
    for (int c = 0; c < 3; ++c) {
        const float bg = rng.uniform(0.35f, 0.65f);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) img.at(c, y, x) = bg;
    }
    const int blobs = 30 + rng.uniform_int(31);
    const float dim = static_cast<float>(std::min(h, w));
    for (int b = 0; b < blobs; ++b) {
        const float cx = rng.uniform(0.0f, static_cast<float>(w));
        const float cy = rng.uniform(0.0f, static_cast<float>(h));
        const float sigma = rng.uniform(0.04f, 0.12f) * dim;
        const float color[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
        const float inv2s2 = 1.0f / (2.0f * sigma * sigma);
        const int reach = static_cast<int>(3.0f * sigma) + 1;
        const int y0 = std::max(0, static_cast<int>(cy) - reach);
        const int y1 = std::min(h - 1, static_cast<int>(cy) + reach);
        const int x0 = std::max(0, static_cast<int>(cx) - reach);
        const int x1 = std::min(w - 1, static_cast<int>(cx) + reach);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const float rx = x - cx, ry = y - cy;
                const float alpha = 0.85f * std::exp(-(rx * rx + ry * ry) * inv2s2);
                for (int c = 0; c < 3; ++c)
                    img.at(c, y, x) += alpha * (color[c] - img.at(c, y, x));
            }
    }
    return img;
}

ImageBuffer texture_value_noise(int h, int w, Rng& rng) {
    ImageBuffer img(3, h, w, 0.5f);
    const int base_cell = std::max(4, std::min(h, w) / 4);
    float amplitude = 0.3f;
    for (int cell = base_cell; cell >= 2; cell /= 2) {
        const int gh = h / cell + 2, gw = w / cell + 2;
        std::vector<float> lattice(static_cast<size_t>(3) * gh * gw);
        for (float& v : lattice) v = rng.uniform(-1.0f, 1.0f);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const float fy = static_cast<float>(y) / cell;
                    const float fx = static_cast<float>(x) / cell;
                    const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
                    const float ty = fy - iy, tx = fx - ix;
                    auto L = [&](int yy, int xx) {
                        return lattice[(static_cast<size_t>(c) * gh + yy) * gw + xx];
                    };
                    const float v = (1 - ty) * ((1 - tx) * L(iy, ix) + tx * L(iy, ix + 1)) +
                                    ty * ((1 - tx) * L(iy + 1, ix) + tx * L(iy + 1, ix + 1));
                    img.at(c, y, x) += amplitude * v;
                }
        amplitude *= 0.6f;
    }
    for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

ImageBuffer texture_checker(int h, int w, Rng& rng) {
    const int tile = std::max(4, std::min(h, w) / 8);
    const float ca[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    const float cb[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    ImageBuffer img(3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const bool a = ((y / tile) + (x / tile)) % 2 == 0;
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = a ? ca[c] : cb[c];
        }
    // Noise on top keeps tiles locally discriminative.
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = std::clamp(img.at(c, y, x) + rng.uniform(-0.1f, 0.1f), 0.0f, 1.0f);
    return img;
}

}  // namespace

ImageBuffer generate_texture(int height, int width, TextureKind kind, uint64_t seed) {
    if (height < 8 || width < 8)
        throw std::invalid_argument("generate_texture: minimum size is 8x8");
    Rng rng(Rng::derive(seed, 0x7e870000u + static_cast<uint32_t>(kind)));
    switch (kind) {
        case TextureKind::blobs: return texture_blobs(height, width, rng);
        case TextureKind::value_noise: return texture_value_noise(height, width, rng);
        case TextureKind::checker: return texture_checker(height, width, rng);
    }
    return texture_blobs(height, width, rng);
}

WarpGrids grids_from_warp(const WarpSpec& spec, int height, int width) {
    spec.validate();
    const Affine a = affine_of(spec);
    const double det = a.a11 * a.a22 - a.a12 * a.a21;
    if (std::abs(det) < 1e-6)
        throw std::invalid_argument("grids_from_warp: affine component is not invertible");
    const double i11 = a.a22 / det, i12 = -a.a12 / det;
    const double i21 = -a.a21 / det, i22 = a.a11 / det;

    const SamplingGrid id = identity_grid(height, width);
    WarpGrids out;
    out.g_ts = SamplingGrid(height, width);
    out.g_st = SamplingGrid(height, width);
    out.invertible = Mask(height, width, 1);

    // Forward map at source pixels.
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            float tx, ty;
            apply_warp(spec, id.x(r, c), id.y(r, c), tx, ty);
            out.g_ts.x(r, c) = tx;
            out.g_ts.y(r, c) = ty;
        }

    // Inverse map at target pixels.
    size_t diverged = 0;
    constexpr float kSentinel = 2.0f;
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const double px = id.x(r, c), py = id.y(r, c);
            double sx = i11 * (px - a.tx) + i12 * (py - a.ty);
            double sy = i21 * (px - a.tx) + i22 * (py - a.ty);
            bool ok = true;
            if (spec.nonrigid) {
                ok = false;
                for (int it = 0; it < 50; ++it) {
                    double dx, dy;
                    rbf_displacement(*spec.nonrigid, sx, sy, dx, dy);
                    const double nx = i11 * (px - a.tx - dx) + i12 * (py - a.ty - dy);
                    const double ny = i21 * (px - a.tx - dx) + i22 * (py - a.ty - dy);
                    const double step = std::max(std::abs(nx - sx), std::abs(ny - sy));
                    sx = nx;
                    sy = ny;
                    if (step <= 1e-5) {
                        ok = true;
                        break;
                    }
                    if (std::abs(sx) > 4.0 || std::abs(sy) > 4.0) break;
                }
            }
            if (ok) {
                out.g_st.x(r, c) = static_cast<float>(sx);
                out.g_st.y(r, c) = static_cast<float>(sy);
            } else {
                out.g_st.x(r, c) = kSentinel;
                out.g_st.y(r, c) = kSentinel;
                out.invertible.at(r, c) = 0;
                ++diverged;
            }
        }

    if (static_cast<double>(diverged) > 0.2 * height * width)
        throw NumericError("grids_from_warp: nonrigid inversion diverged on > 20% of pixels");
    return out;
}

namespace {

// Paste solid occluders onto the target until target_fraction of mask pixels
// are covered. Shape areas are capped at 3% of the mask so the achieved
// fraction lands close to the target.
Mask paste_occluders(ImageBuffer& image, const Mask& mask, float target_fraction, Rng& rng) {
    Mask occluded(mask.height, mask.width, 0);
    const size_t mask_px = mask.count();
    const size_t target = static_cast<size_t>(std::lround(target_fraction * mask_px));
    if (target == 0) return occluded;

    size_t covered = 0;
    for (int shape = 0; shape < 500 && covered < target; ++shape) {
        const double remaining = static_cast<double>(target - covered);
        const double area = std::clamp(remaining, 16.0, 0.03 * mask_px);
        const double aspect = rng.uniform(0.5f, 2.0f);
        const int sw = std::max(2, static_cast<int>(std::lround(std::sqrt(area * aspect))));
        const int sh = std::max(2, static_cast<int>(std::lround(area / sw)));
        const int cx = rng.uniform_int(mask.width);
        const int cy = rng.uniform_int(mask.height);
        const bool ellipse = rng.uniform() < 0.5f;
        const float color[3] = {rng.uniform(), rng.uniform(), rng.uniform()};

        for (int y = cy - sh / 2; y <= cy + sh / 2; ++y) {
            if (y < 0 || y >= mask.height) continue;
            for (int x = cx - sw / 2; x <= cx + sw / 2; ++x) {
                if (x < 0 || x >= mask.width) continue;
                if (ellipse) {
                    const double ny = (y - cy) / (0.5 * sh + 0.5);
                    const double nx = (x - cx) / (0.5 * sw + 0.5);
                    if (nx * nx + ny * ny > 1.0) continue;
                }
                for (int c = 0; c < image.channels; ++c) image.at(c, y, x) = color[c % 3];
                if (mask.at(y, x) && !occluded.at(y, x)) {
                    occluded.at(y, x) = 1;
                    ++covered;
                }
            }
        }
    }
    return occluded;
}

}  // namespace

SyntheticPair make_pair(const ImageBuffer& texture, const WarpSpec& spec, float occlusion_fraction,
                        uint64_t seed, int keypoint_count) {
    if (occlusion_fraction < 0.0f || occlusion_fraction > 0.5f)
        throw std::invalid_argument("make_pair: occlusion_fraction must be in [0, 0.5]");
    const int h = texture.height, w = texture.width;

    WarpGrids grids = grids_from_warp(spec, h, w);

    SyntheticPair pair;
    pair.seed = seed;
    pair.image_s = texture;
    pair.g_st = grids.g_st;
    pair.g_ts = grids.g_ts;
    pair.image_t = bilinear_sample(texture, grids.g_st);

    pair.mask_s = Mask(h, w, 1);
    pair.mask_t = Mask(h, w, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            pair.mask_t.at(r, c) = (grids.invertible.at(r, c) && grids.g_st.in_range(r, c)) ? 1 : 0;

    Rng occ_rng(Rng::derive(seed, 0x0cc1u));
    const Mask occluded = paste_occluders(pair.image_t, pair.mask_t, occlusion_fraction, occ_rng);

    pair.vis_t = Mask(h, w, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            pair.vis_t.at(r, c) = (pair.mask_t.at(r, c) && !occluded.at(r, c)) ? 1 : 0;

    // A source pixel is visible when its forward map stays in frame and its
    // target location is not under an occluder.
    pair.vis_s = Mask(h, w, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!pair.mask_s.at(r, c) || !pair.g_ts.in_range(r, c)) continue;
            const int tx = static_cast<int>(std::lround((pair.g_ts.x(r, c) + 1.0f) * 0.5f * (w - 1)));
            const int ty = static_cast<int>(std::lround((pair.g_ts.y(r, c) + 1.0f) * 0.5f * (h - 1)));
            if (tx < 0 || tx >= w || ty < 0 || ty >= h) continue;
            pair.vis_s.at(r, c) = occluded.at(ty, tx) ? 0 : 1;
        }

    // Keypoints with exact correspondences read off the forward grid.
    std::vector<std::pair<int, int>> visible_px;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (pair.vis_s.at(r, c)) visible_px.emplace_back(r, c);
    Rng kp_rng(Rng::derive(seed, 0x4b90u));
    const int n_kp = std::min<int>(keypoint_count, static_cast<int>(visible_px.size()));
    for (int k = 0; k < n_kp; ++k) {
        const int pick = kp_rng.uniform_int(static_cast<int>(visible_px.size()));
        const auto [r, c] = visible_px[pick];
        Keypoint kp;
        kp.x_src = static_cast<float>(c);
        kp.y_src = static_cast<float>(r);
        kp.x_tgt = (pair.g_ts.x(r, c) + 1.0f) * 0.5f * (w - 1);
        kp.y_tgt = (pair.g_ts.y(r, c) + 1.0f) * 0.5f * (h - 1);
        kp.visible = true;
        pair.keypoints.push_back(kp);
    }
    return pair;
}

WarpSpec sample_warp_spec(const SynthConfig& config, uint64_t pair_seed) {
    Rng rng(Rng::derive(pair_seed, 0x5bec0u));
    WarpSpec spec;
    spec.seed = pair_seed;
    const float rot_max = config.rotation_max_deg * 3.14159265358979323846f / 180.0f;
    spec.rotation = rng.uniform(-rot_max, rot_max);
    spec.scale_x = rng.uniform(config.scale_min, config.scale_max);
    spec.scale_y = rng.uniform(config.scale_min, config.scale_max);
    spec.translate_x = rng.uniform(-config.translation_max, config.translation_max);
    spec.translate_y = rng.uniform(-config.translation_max, config.translation_max);
    if (config.nonrigid_points > 0 && config.nonrigid_magnitude > 0.0f) {
        NonrigidSpec nr;
        nr.stiffness = rng.uniform(0.8f, 1.4f);
        for (int k = 0; k < config.nonrigid_points; ++k) {
            NonrigidSpec::ControlPoint p;
            p.cx = rng.uniform(-0.8f, 0.8f);
            p.cy = rng.uniform(-0.8f, 0.8f);
            const float mag = rng.uniform(0.0f, config.nonrigid_magnitude);
            const float ang = rng.uniform(0.0f, 6.2831853f);
            p.dx = mag * std::cos(ang);
            p.dy = mag * std::sin(ang);
            nr.points.push_back(p);
        }
        spec.nonrigid = nr;
    }
    return spec;
}

namespace {

nlohmann::json spec_to_json(const WarpSpec& s) {
    nlohmann::json j;
    j["rotation"] = s.rotation;
    j["scale"] = {s.scale_x, s.scale_y};
    j["translation"] = {s.translate_x, s.translate_y};
    j["seed"] = s.seed;
    if (s.nonrigid) {
        nlohmann::json nr;
        nr["stiffness"] = s.nonrigid->stiffness;
        nr["points"] = nlohmann::json::array();
        for (const auto& p : s.nonrigid->points) nr["points"].push_back({p.cx, p.cy, p.dx, p.dy});
        j["nonrigid"] = nr;
    } else {
        j["nonrigid"] = nullptr;
    }
    return j;
}

WarpSpec spec_from_json(const nlohmann::json& j) {
    WarpSpec s;
    s.rotation = j.at("rotation").get<float>();
    s.scale_x = j.at("scale")[0].get<float>();
    s.scale_y = j.at("scale")[1].get<float>();
    s.translate_x = j.at("translation")[0].get<float>();
    s.translate_y = j.at("translation")[1].get<float>();
    s.seed = j.at("seed").get<uint64_t>();
    if (!j.at("nonrigid").is_null()) {
        NonrigidSpec nr;
        nr.stiffness = j["nonrigid"].at("stiffness").get<float>();
        for (const auto& p : j["nonrigid"].at("points")) {
            NonrigidSpec::ControlPoint cp;
            cp.cx = p[0].get<float>();
            cp.cy = p[1].get<float>();
            cp.dx = p[2].get<float>();
            cp.dy = p[3].get<float>();
            nr.points.push_back(cp);
        }
        s.nonrigid = nr;
    }
    return s;
}

nlohmann::json config_to_json(const SynthConfig& c) {
    nlohmann::json j;
    j["image_size"] = c.image_size;
    j["texture"] = texture_name(c.texture);
    j["occlusion_fraction"] = c.occlusion_fraction;
    j["rotation_max_deg"] = c.rotation_max_deg;
    j["scale_min"] = c.scale_min;
    j["scale_max"] = c.scale_max;
    j["translation_max"] = c.translation_max;
    j["nonrigid_points"] = c.nonrigid_points;
    j["nonrigid_magnitude"] = c.nonrigid_magnitude;
    j["keypoints"] = c.keypoints;
    j["seed"] = c.seed;
    return j;
}

SynthConfig config_from_json(const nlohmann::json& j) {
    SynthConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.texture = texture_from_name(j.at("texture").get<std::string>());
    c.occlusion_fraction = j.at("occlusion_fraction").get<float>();
    c.rotation_max_deg = j.at("rotation_max_deg").get<float>();
    c.scale_min = j.at("scale_min").get<float>();
    c.scale_max = j.at("scale_max").get<float>();
    c.translation_max = j.at("translation_max").get<float>();
    c.nonrigid_points = j.at("nonrigid_points").get<int>();
    c.nonrigid_magnitude = j.at("nonrigid_magnitude").get<float>();
    c.keypoints = j.at("keypoints").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

std::string pair_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%04d", index);
    return buf;
}

void write_pair_files(const SyntheticPair& pair, const fs::path& dir, const std::string& id) {
    save_image(pair.image_s, (dir / (id + "_src.png")).string());
    save_image(pair.image_t, (dir / (id + "_tgt.png")).string());
    save_mask(pair.mask_s, (dir / (id + "_mask_s.png")).string());
    save_mask(pair.mask_t, (dir / (id + "_mask_t.png")).string());
    save_mask(pair.vis_s, (dir / (id + "_vis_s.png")).string());
    save_mask(pair.vis_t, (dir / (id + "_vis_t.png")).string());
    save_grid(pair.g_st, (dir / (id + "_gst.wgrd")).string());
    save_grid(pair.g_ts, (dir / (id + "_gts.wgrd")).string());
    save_keypoints(pair.keypoints, (dir / (id + "_kps.json")).string());
}

std::string write_dataset(const SynthConfig& config, const std::vector<PairFiles>& pairs,
                          const std::string& out_dir) {
    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory: " + out_dir);

    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["config"] = config_to_json(config);
    manifest["pairs"] = nlohmann::json::array();

    for (const PairFiles& pf : pairs) {
        const ImageBuffer texture = generate_texture(config.image_size, config.image_size,
                                                     config.texture, Rng::derive(pf.seed, 0x7e57u));
        const SyntheticPair pair =
            make_pair(texture, pf.spec, config.occlusion_fraction, pf.seed, config.keypoints);
        write_pair_files(pair, dir, pf.id);
        nlohmann::json rec;
        rec["id"] = pf.id;
        rec["seed"] = pf.seed;
        rec["spec"] = spec_to_json(pf.spec);
        manifest["pairs"].push_back(rec);
    }

    const fs::path manifest_path = dir / "manifest.json";
    std::ofstream out(manifest_path);
    if (!out) throw IoError("cannot write manifest: " + manifest_path.string());
    out << manifest.dump(2) << "\n";
    return manifest_path.string();
}

}  // namespace

std::string generate_dataset(int count, const SynthConfig& config, const std::string& out_dir) {
    if (count < 0) throw std::invalid_argument("generate_dataset: count must be >= 0");
    std::vector<PairFiles> pairs;
    pairs.reserve(count);
    for (int i = 0; i < count; ++i) {
        PairFiles pf;
        pf.id = pair_id(i);
        pf.seed = Rng::derive(config.seed, 0xda7a0000u + static_cast<uint64_t>(i));
        pf.spec = sample_warp_spec(config, pf.seed);
        pairs.push_back(std::move(pf));
    }
    return write_dataset(config, pairs, out_dir);
}

std::string regenerate_from_manifest(const std::string& manifest_path, const std::string& out_dir) {
    const DatasetManifest m = load_manifest(manifest_path);
    return write_dataset(m.config, m.pairs, out_dir);
}

DatasetManifest load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatError::Code::malformed, "malformed manifest JSON: " + manifest_path);
    }
    DatasetManifest m;
    try {
        m.config = config_from_json(j.at("config"));
        for (const auto& rec : j.at("pairs")) {
            PairFiles pf;
            pf.id = rec.at("id").get<std::string>();
            pf.seed = rec.at("seed").get<uint64_t>();
            pf.spec = spec_from_json(rec.at("spec"));
            m.pairs.push_back(std::move(pf));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatError::Code::malformed,
                          std::string("manifest missing fields: ") + e.what());
    }
    return m;
}

LoadedPair load_pair(const std::string& dir, const std::string& id) {
    const fs::path d(dir);
    LoadedPair p;
    p.id = id;
    p.image_s = load_image((d / (id + "_src.png")).string());
    p.image_t = load_image((d / (id + "_tgt.png")).string());
    p.mask_s = load_mask((d / (id + "_mask_s.png")).string());
    p.mask_t = load_mask((d / (id + "_mask_t.png")).string());
    p.vis_s = load_mask((d / (id + "_vis_s.png")).string());
    p.vis_t = load_mask((d / (id + "_vis_t.png")).string());
    p.gt_g_st = load_grid((d / (id + "_gst.wgrd")).string());
    p.gt_g_ts = load_grid((d / (id + "_gts.wgrd")).string());
    p.keypoints = load_keypoints((d / (id + "_kps.json")).string());
    return p;
}

}  // namespace warpgrid
