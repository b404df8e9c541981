// warpgrid - batch CLI over the dense-matching toolkit.
// Subcommands: synth, solve, train, eval, viz.
// Exit codes: 0 success, 2 usage/config, 3 I/O, 4 numerical failure.

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "warpgrid/config.hpp"
#include "warpgrid/errors.hpp"
#include "warpgrid/io.hpp"
#include "warpgrid/metrics.hpp"
#include "warpgrid/predictor.hpp"
#include "warpgrid/solver.hpp"
#include "warpgrid/synth.hpp"
#include "warpgrid/trainer.hpp"
#include "warpgrid/viz.hpp"
#include "warpgrid/warp.hpp"

namespace fs = std::filesystem;
using namespace warpgrid;
using nlohmann::json;

namespace {

// ---- infrastructure -------------------------------------------------------

// Exclusive lock file so two runs cannot write one out_dir concurrently.
class DirLock {
public:
    explicit DirLock(const std::string& dir) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory: " + dir);
        path_ = (fs::path(dir) / ".warpgrid.lock").string();
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) throw IoError("output directory is locked (stale .warpgrid.lock?): " + path_);
        ::close(fd);
    }
    ~DirLock() { ::unlink(path_.c_str()); }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::string path_;
};

size_t worker_count(size_t jobs) {
    size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("WARPGRID_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<size_t>(v);
    }
    return std::min(n, std::max<size_t>(1, jobs));
}

// Index-based worker pool; exceptions are rethrown after join.
template <typename Fn>
void parallel_for(size_t count, Fn&& fn) {
    const size_t workers = worker_count(count);
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> hold(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---- config plumbing ------------------------------------------------------

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;  // key.path=value overrides
    int64_t seed = -1;
    int image_size = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--set", opts.sets,
                    "Override a config key, e.g. --set weights.smooth=0 --set solve.levels=4");
    cmd->add_option("--seed", opts.seed, "Override config seed");
    cmd->add_option("--size", opts.image_size, "Override config image_size");
}

RunConfig resolve_config(const CommonOpts& opts) {
    json doc = json::object();
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw IoError("cannot open config: " + opts.config_path);
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw ConfigError("config: invalid JSON: " + std::string(e.what()));
        }
    }
    for (const std::string& kv : opts.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + kv);
        std::string pointer = "/" + kv.substr(0, eq);
        for (char& c : pointer)
            if (c == '.') c = '/';
        json value;
        try {
            value = json::parse(kv.substr(eq + 1));
        } catch (const json::exception&) {
            value = kv.substr(eq + 1);  // bare string
        }
        doc[json::json_pointer(pointer)] = value;
    }
    if (opts.seed >= 0) doc["seed"] = static_cast<uint64_t>(opts.seed);
    if (opts.image_size > 0) doc["image_size"] = opts.image_size;
    return config_from_json(doc);
}

std::string format_alpha(double a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", a);
    return buf;
}

// ---- solve helpers --------------------------------------------------------

json trace_to_json(const std::vector<SolveIteration>& trace) {
    json arr = json::array();
    for (const SolveIteration& it : trace) {
        json rec;
        rec["level"] = it.level;
        rec["stage"] = stage_name(it.stage);
        rec["iteration"] = it.iteration;
        rec["total"] = it.total;
        for (const auto& [k, v] : it.terms) rec["terms"][k] = v;
        arr.push_back(std::move(rec));
    }
    return arr;
}

void write_prediction(const GridPrediction& pred, const std::string& out_dir, const std::string& id) {
    save_grid(pred.g_st, (fs::path(out_dir) / (id + "_gst.wgrd")).string());
    save_grid(pred.g_ts, (fs::path(out_dir) / (id + "_gts.wgrd")).string());
    save_confidence(pred.conf_s, (fs::path(out_dir) / (id + "_conf_s.png")).string());
    save_confidence(pred.conf_t, (fs::path(out_dir) / (id + "_conf_t.png")).string());
}

GridPrediction load_prediction(const std::string& dir, const std::string& id) {
    GridPrediction pred;
    pred.g_st = load_grid((fs::path(dir) / (id + "_gst.wgrd")).string());
    pred.g_ts = load_grid((fs::path(dir) / (id + "_gts.wgrd")).string());
    const std::string cs = (fs::path(dir) / (id + "_conf_s.png")).string();
    const std::string ct = (fs::path(dir) / (id + "_conf_t.png")).string();
    if (fs::exists(cs) && fs::exists(ct)) {
        pred.conf_s = load_confidence(cs);
        pred.conf_t = load_confidence(ct);
    }
    return pred;
}

// ---- subcommands ----------------------------------------------------------

int run_synth(const CommonOpts& common, int count_flag, const std::string& from_manifest,
              const std::string& out_dir) {
    RunConfig rc = resolve_config(common);
    if (count_flag >= 0) rc.synth_count = count_flag;
    if (rc.synth_count < 0) throw ConfigError("synth: count must be >= 0");

    DirLock lock(out_dir);
    std::string manifest;
    if (!from_manifest.empty())
        manifest = regenerate_from_manifest(from_manifest, out_dir);
    else
        manifest = generate_dataset(rc.synth_count, rc.synth, out_dir);
    std::cout << "synth: wrote " << rc.synth_count << " pairs (size " << rc.synth.image_size
              << ", texture " << texture_name(rc.synth.texture) << ") to " << out_dir << "\n";
    std::cout << manifest << "\n";
    return 0;
}

int run_solve(const CommonOpts& common, const std::string& manifest_path, std::string only_id,
              int iterations_flag, const std::string& checkpoint, const std::string& out_dir) {
    RunConfig rc = resolve_config(common);
    if (iterations_flag >= 0)
        for (StageBudget& b : rc.solve.schedule) b.iterations = iterations_flag;

    const DatasetManifest manifest = load_manifest(manifest_path);
    const std::string data_dir = fs::path(manifest_path).parent_path().string();
    std::vector<std::string> ids;
    for (const PairFiles& pf : manifest.pairs)
        if (only_id.empty() || pf.id == only_id) ids.push_back(pf.id);
    if (ids.empty()) throw ConfigError("solve: no matching pairs in manifest");

    DirLock lock(out_dir);

    const bool use_predictor = rc.solver_mode == "predictor";
    if (use_predictor && checkpoint.empty())
        throw ConfigError("solve: solver_mode predictor requires --checkpoint");
    std::unique_ptr<TinyPredictor> model;
    if (use_predictor) model = std::make_unique<TinyPredictor>(TinyPredictor::load_checkpoint(checkpoint));

    std::vector<std::string> lines(ids.size());
    parallel_for(ids.size(), [&](size_t i) {
        const LoadedPair pair = load_pair(data_dir, ids[i]);
        GridPrediction pred;
        std::vector<SolveIteration> trace;
        if (use_predictor) {
            pred = model->predict(pair.image_s, pair.image_t);
        } else {
            SolveResult res = direct_solve(pair.image_s, pair.image_t, pair.mask_s, pair.mask_t, rc.solve);
            pred = std::move(res.prediction);
            trace = std::move(res.trace);
        }
        write_prediction(pred, out_dir, ids[i]);
        std::ofstream tr((fs::path(out_dir) / (ids[i] + "_trace.json")).string());
        if (!tr) throw IoError("cannot write trace for " + ids[i]);
        tr << trace_to_json(trace).dump(2) << "\n";
        lines[i] = "solved " + ids[i] +
                   (trace.empty() ? std::string() : " (final loss " + std::to_string(trace.back().total) + ")");
    });
    for (const std::string& l : lines) std::cout << l << "\n";
    return 0;
}

int run_train(const CommonOpts& common, const std::string& dense_manifest,
              const std::string& real_manifest, const std::string& heldout_manifest,
              const std::string& out_dir) {
    RunConfig rc = resolve_config(common);
    DirLock lock(out_dir);

    PredictorSpec spec;
    spec.base_channels = rc.predictor_base_channels;
    spec.seed = static_cast<uint32_t>(rc.seed);
    // The "real" stream is a keypoint-only synthetic split; say so in logs.
    std::cout << "train: real-data role is played by keypoint-only synthetic pairs from "
              << real_manifest << "\n";
    const TrainResult result = train_predictor(dense_manifest, real_manifest, heldout_manifest, spec,
                                               rc.train, rc.weights, out_dir);
    for (const std::string& c : result.checkpoints) std::cout << "checkpoint " << c << "\n";
    std::cout << "final held-out synthetic_dense " << result.final_heldout_dense << "\n";
    std::cout << "metrics log " << result.metrics_log << "\n";
    return 0;
}

int run_eval(const CommonOpts& common, const std::string& manifest_path, const std::string& pred_dir,
             const std::string& checkpoint, const std::string& out_dir) {
    RunConfig rc = resolve_config(common);
    if (pred_dir.empty() && checkpoint.empty())
        throw ConfigError("eval: need --pred-dir or --checkpoint");

    const DatasetManifest manifest = load_manifest(manifest_path);
    const std::string data_dir = fs::path(manifest_path).parent_path().string();
    if (manifest.pairs.empty()) throw ConfigError("eval: manifest has no pairs");

    DirLock lock(out_dir);
    std::unique_ptr<TinyPredictor> model;
    if (!checkpoint.empty())
        model = std::make_unique<TinyPredictor>(TinyPredictor::load_checkpoint(checkpoint));

    std::vector<EvalReport> reports(manifest.pairs.size());
    parallel_for(manifest.pairs.size(), [&](size_t i) {
        const LoadedPair pair = load_pair(data_dir, manifest.pairs[i].id);
        const GridPrediction pred =
            model ? model->predict(pair.image_s, pair.image_t) : load_prediction(pred_dir, pair.id);
        reports[i] = evaluate_pair(pair, pred, rc.alphas);
    });

    json out;
    out["alphas"] = rc.alphas;
    out["pairs"] = json::array();
    std::map<double, double> pck_sum;
    std::map<double, size_t> pck_n;
    double dense_sum = 0, epe_sum = 0, cal_sum = 0;
    size_t epe_n = 0, cal_n = 0;
    for (const EvalReport& r : reports) {
        json rec;
        rec["id"] = r.id;
        for (const auto& [a, v] : r.pck_at) rec["pck"][format_alpha(a)] = v;
        rec["synthetic_dense"] = r.synthetic_dense;
        rec["epe"] = r.epe ? json(*r.epe) : json(nullptr);
        rec["calibration"] = r.calibration ? json(*r.calibration) : json(nullptr);
        rec["pixels"] = r.pixels_evaluated;
        rec["keypoints"] = r.keypoints_evaluated;
        out["pairs"].push_back(std::move(rec));
        for (const auto& [a, v] : r.pck_at) {
            pck_sum[a] += v;
            pck_n[a] += 1;
        }
        dense_sum += r.synthetic_dense;
        if (r.epe) {
            epe_sum += *r.epe;
            ++epe_n;
        }
        if (r.calibration) {
            cal_sum += *r.calibration;
            ++cal_n;
        }
    }
    json mean;
    for (const auto& [a, s] : pck_sum) mean["pck"][format_alpha(a)] = s / pck_n[a];
    mean["synthetic_dense"] = dense_sum / reports.size();
    mean["epe"] = epe_n ? json(epe_sum / epe_n) : json(nullptr);
    mean["calibration"] = cal_n ? json(cal_sum / cal_n) : json(nullptr);
    out["mean"] = mean;

    std::ofstream jf((fs::path(out_dir) / "eval.json").string());
    if (!jf) throw IoError("cannot write eval.json");
    jf << out.dump(2) << "\n";

    std::ofstream cf((fs::path(out_dir) / "eval.csv").string());
    if (!cf) throw IoError("cannot write eval.csv");
    cf << "id";
    for (double a : rc.alphas) cf << ",pck@" << format_alpha(a);
    cf << ",synthetic_dense,epe,calibration,pixels,keypoints\n";
    for (const EvalReport& r : reports) {
        cf << r.id;
        for (double a : rc.alphas) {
            cf << ",";
            const auto it = r.pck_at.find(a);
            if (it != r.pck_at.end()) cf << it->second;
        }
        cf << "," << r.synthetic_dense << ",";
        if (r.epe) cf << *r.epe;
        cf << ",";
        if (r.calibration) cf << *r.calibration;
        cf << "," << r.pixels_evaluated << "," << r.keypoints_evaluated << "\n";
    }

    std::cout << "eval: " << reports.size() << " pairs, mean synthetic_dense "
              << dense_sum / reports.size();
    if (epe_n) std::cout << ", mean epe " << epe_sum / epe_n;
    std::cout << "\n" << (fs::path(out_dir) / "eval.json").string() << "\n";
    return 0;
}

int run_viz(const CommonOpts&, const std::string& manifest_path, const std::string& id,
            const std::string& pred_dir, const std::string& out_dir) {
    const std::string data_dir = fs::path(manifest_path).parent_path().string();
    const LoadedPair pair = load_pair(data_dir, id);
    const GridPrediction pred = load_prediction(pred_dir, id);
    DirLock lock(out_dir);
    const VizPaths paths = render_visualizations(pair.image_s, pair.image_t, pred, out_dir, id);
    std::cout << paths.warped << "\n" << paths.checker << "\n" << paths.cycle_error << "\n"
              << paths.confidence << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"warpgrid: bidirectional-grid dense matching toolkit"};
    app.require_subcommand(1);

    CommonOpts synth_common, solve_common, train_common, eval_common, viz_common;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic paired dataset");
    add_common(synth, synth_common);
    int synth_count = -1;
    std::string synth_from, synth_out;
    synth->add_option("--count", synth_count, "Number of pairs")->check(CLI::NonNegativeNumber);
    synth->add_option("--from-manifest", synth_from, "Regenerate bit-identically from a manifest");
    synth->add_option("--out", synth_out, "Output directory")->required();

    auto* solve = app.add_subcommand("solve", "Optimize grids/confidences for pairs");
    add_common(solve, solve_common);
    std::string solve_manifest, solve_id, solve_ckpt, solve_out;
    int solve_iterations = -1;
    solve->add_option("--manifest", solve_manifest, "Dataset manifest")->required();
    solve->add_option("--id", solve_id, "Solve only this pair id");
    solve->add_option("--iterations", solve_iterations, "Override every stage budget");
    solve->add_option("--checkpoint", solve_ckpt, "Predictor checkpoint (solver_mode=predictor)");
    solve->add_option("--out", solve_out, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train the predictor with the staged schedule");
    add_common(train, train_common);
    std::string train_dense, train_real, train_heldout, train_out;
    train->add_option("--train-manifest", train_dense, "Dense-labeled manifest")->required();
    train->add_option("--real-manifest", train_real, "Keypoint-only (real-proxy) manifest")->required();
    train->add_option("--heldout-manifest", train_heldout, "Held-out manifest")->required();
    train->add_option("--out", train_out, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate predictions against ground truth");
    add_common(eval, eval_common);
    std::string eval_manifest, eval_pred, eval_ckpt, eval_out;
    eval->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
    eval->add_option("--pred-dir", eval_pred, "Directory with <id>_gst.wgrd predictions");
    eval->add_option("--checkpoint", eval_ckpt, "Predictor checkpoint to evaluate");
    eval->add_option("--out", eval_out, "Output directory")->required();

    auto* viz = app.add_subcommand("viz", "Render warped/checker/error/confidence images");
    add_common(viz, viz_common);
    std::string viz_manifest, viz_id, viz_pred, viz_out;
    viz->add_option("--manifest", viz_manifest, "Dataset manifest")->required();
    viz->add_option("--id", viz_id, "Pair id")->required();
    viz->add_option("--pred-dir", viz_pred, "Prediction directory")->required();
    viz->add_option("--out", viz_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return run_synth(synth_common, synth_count, synth_from, synth_out);
        if (solve->parsed())
            return run_solve(solve_common, solve_manifest, solve_id, solve_iterations, solve_ckpt,
                             solve_out);
        if (train->parsed())
            return run_train(train_common, train_dense, train_real, train_heldout, train_out);
        if (eval->parsed()) return run_eval(eval_common, eval_manifest, eval_pred, eval_ckpt, eval_out);
        if (viz->parsed()) return run_viz(viz_common, viz_manifest, viz_id, viz_pred, viz_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
