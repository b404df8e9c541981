#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// End-to-end checks of the warpgrid binary: exit codes, file contracts,
// determinism of rerun outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "warpgrid/io.hpp"
#include "warpgrid/types.hpp"
#include "warpgrid/warp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kCli = WARPGRID_CLI_PATH;

std::string temp_dir(const char* tag) {
    static int counter = 0;
    const fs::path p =
        fs::temp_directory_path() / ("warpgrid_cli_" + std::string(tag) + std::to_string(counter++));
    fs::create_directories(p);
    return p.string();
}

int run(const std::string& args) {
    const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

bool same_dir_bytes(const std::string& a, const std::string& b) {
    for (const auto& entry : fs::directory_iterator(a)) {
        const std::string name = entry.path().filename().string();
        if (!fs::exists(fs::path(b) / name)) return false;
        if (slurp(entry.path().string()) != slurp((fs::path(b) / name).string())) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("synth writes the promised file set and is rerun-identical") {
    const std::string d1 = temp_dir("synth1");
    const std::string d2 = temp_dir("synth2");
    const std::string flags = "synth --count 3 --size 32 --seed 7 --out ";
    CHECK(run(flags + d1) == 0);
    CHECK(run(flags + d2) == 0);

    for (int i = 0; i < 3; ++i) {
        const std::string id = "p000" + std::to_string(i);
        for (const char* suffix : {"_src.png", "_tgt.png", "_mask_s.png", "_mask_t.png",
                                   "_vis_s.png", "_vis_t.png", "_kps.json"})
            CHECK(fs::exists(fs::path(d1) / (id + suffix)));
        CHECK(fs::exists(fs::path(d1) / (id + "_gst.wgrd")));
        CHECK(fs::exists(fs::path(d1) / (id + "_gts.wgrd")));
    }
    CHECK(fs::exists(fs::path(d1) / "manifest.json"));
    CHECK(same_dir_bytes(d1, d2));
}

TEST_CASE("usage and config errors exit with code 2") {
    CHECK(run("synth --count -1 --out " + temp_dir("bad")) == 2);
    CHECK(run("definitely-not-a-command") == 2);

    const std::string dir = temp_dir("cfg");
    const std::string cfg = dir + "/bad.json";
    std::ofstream(cfg) << R"({"unknown_key": 1})";
    CHECK(run("synth --config " + cfg + " --count 1 --out " + dir + "/out") == 2);

    const std::string broken = dir + "/broken.json";
    std::ofstream(broken) << "{not json";
    CHECK(run("synth --config " + broken + " --count 1 --out " + dir + "/out2") == 2);
}

TEST_CASE("missing inputs exit with code 3") {
    CHECK(run("solve --manifest /nonexistent/manifest.json --out " + temp_dir("io")) == 3);
    CHECK(run("eval --manifest /nonexistent/manifest.json --pred-dir /tmp --out " + temp_dir("io2")) ==
          3);
}

TEST_CASE("solve with zero iterations emits identity grids") {
    const std::string data = temp_dir("sdata");
    REQUIRE(run("synth --count 1 --size 32 --seed 3 --out " + data) == 0);
    const std::string out = temp_dir("sout");
    CHECK(run("solve --manifest " + data + "/manifest.json --iterations 0 --out " + out) == 0);

    const warpgrid::SamplingGrid g = warpgrid::load_grid(out + "/p0000_gst.wgrd");
    const warpgrid::SamplingGrid id = warpgrid::identity_grid(32, 32);
    for (size_t i = 0; i < g.coords.size(); ++i)
        CHECK(g.coords[i] == doctest::Approx(id.coords[i]));
    CHECK(fs::exists(out + "/p0000_conf_s.png"));
    CHECK(fs::exists(out + "/p0000_conf_t.png"));
    CHECK(fs::exists(out + "/p0000_trace.json"));
}

TEST_CASE("eval of ground-truth grids against themselves is perfect") {
    const std::string data = temp_dir("edata");
    REQUIRE(run("synth --count 2 --size 32 --seed 5 --out " + data) == 0);
    const std::string out = temp_dir("eout");
    // Ground-truth grids live in the dataset directory under the same stems.
    CHECK(run("eval --manifest " + data + "/manifest.json --pred-dir " + data + " --out " + out) == 0);

    json report;
    std::ifstream(out + "/eval.json") >> report;
    // All configured alphas appear in the output.
    REQUIRE(report.contains("mean"));
    for (const char* a : {"0.1", "0.05", "0.01"}) {
        REQUIRE(report["mean"]["pck"].contains(a));
        CHECK(report["mean"]["pck"][a].get<double>() == doctest::Approx(1.0));
    }
    CHECK(report["mean"]["synthetic_dense"].get<double>() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(report["mean"]["epe"].get<double>() == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(fs::exists(out + "/eval.csv"));
}

TEST_CASE("a small real solve runs, then viz emits all four artifacts") {
    const std::string data = temp_dir("vdata");
    REQUIRE(run("synth --count 1 --size 32 --seed 9 --out " + data) == 0);
    const std::string sol = temp_dir("vsol");
    REQUIRE(run("solve --manifest " + data + "/manifest.json --iterations 12 --set solve.levels=2 "
                "--out " + sol) == 0);

    const std::string out = temp_dir("vout");
    CHECK(run("viz --manifest " + data + "/manifest.json --id p0000 --pred-dir " + sol + " --out " +
              out) == 0);
    for (const char* name : {"p0000_warped.png", "p0000_checker.png", "p0000_cycle_error.png",
                             "p0000_confidence.png"})
        CHECK(fs::exists(fs::path(out) / name));
}

TEST_CASE("the out-dir lock blocks concurrent writers") {
    const std::string out = temp_dir("lock");
    std::ofstream(out + "/.warpgrid.lock") << "";
    CHECK(run("synth --count 1 --size 32 --out " + out) == 3);
    fs::remove(out + "/.warpgrid.lock");
    CHECK(run("synth --count 1 --size 32 --out " + out) == 0);
}
