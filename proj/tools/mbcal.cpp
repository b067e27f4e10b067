// mbcal: silhouette-based fundamental matrix estimation toolbox.
//
// Subcommands: synth | calibrate | eval | bench | dump-barcodes.
// Exit codes: 0 success, 2 config/input error, 3 I/O error,
// 4 pipeline-infeasible (not enough usable data).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mbcal/bench.hpp"
#include "mbcal/estimator.hpp"
#include "mbcal/refine.hpp"
#include "mbcal/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mbcal;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;
constexpr int kInfeasible = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw fs::filesystem_error("cannot open", path, std::error_code(ENOENT, std::generic_category()));
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// --- scene directories (the layout written by `mbcal synth`) ---

struct SceneDir {
    std::vector<Mask> masksA, masksB;
    std::optional<Fundamental> gt;
    std::vector<PointPair> gtPoints;  // empty when the manifest has none
};

std::vector<Mask> load_pgm_dir(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".pgm") names.push_back(entry.path().string());
    std::sort(names.begin(), names.end());
    std::vector<Mask> masks;
    for (size_t i = 0; i < names.size(); ++i)
        masks.push_back(load_mask_file(names[i], static_cast<int>(i)));
    return masks;
}

SceneDir load_scene_dir(const std::string& dir) {
    SceneDir scene;
    scene.masksA = load_pgm_dir(dir + "/camA");
    scene.masksB = load_pgm_dir(dir + "/camB");
    if (scene.masksA.empty() || scene.masksB.empty())
        throw FormatError("scene dir: no frames under " + dir);

    json manifest;
    try {
        manifest = json::parse(read_file(dir + "/manifest.json"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    }
    if (manifest.contains("gt_fundamental") && !manifest["gt_fundamental"].is_null())
        scene.gt = fundamental_from_json(manifest["gt_fundamental"].dump());

    if (manifest.contains("frontier_points") && !manifest["frontier_points"].is_null()) {
        std::ifstream csv(dir + "/" + manifest["frontier_points"].get<std::string>());
        std::string line;
        std::getline(csv, line);  // header
        while (std::getline(csv, line)) {
            double frame, xa, ya, xb, yb;
            if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &frame, &xa, &ya, &xb, &yb) == 5)
                scene.gtPoints.push_back(
                    {HomogPoint::pixel(xa, ya), HomogPoint::pixel(xb, yb)});
        }
    }
    return scene;
}

// --- line bank cache (MBCAL_CACHE_DIR) ---

uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ull;
    return h;
}

LineBank bank_with_cache(const std::vector<Mask>& masks, double angleStepDeg) {
    const char* cacheDir = std::getenv("MBCAL_CACHE_DIR");
    if (!cacheDir || !*cacheDir) return compute_line_bank(masks, angleStepDeg);

    // the key covers the mask contents, so stale caches can never match
    uint64_t h = 14695981039346656037ull;
    h = fnv1a(h, &angleStepDeg, sizeof(angleStepDeg));
    for (const auto& m : masks) {
        h = fnv1a(h, &m.width, sizeof(m.width));
        h = fnv1a(h, &m.height, sizeof(m.height));
        h = fnv1a(h, m.bits.data(), m.bits.size());
    }
    char name[32];
    std::snprintf(name, sizeof(name), "/%016llx.mbcb", static_cast<unsigned long long>(h));
    const std::string path = std::string(cacheDir) + name;

    if (fs::exists(path)) {
        try {
            double cachedStep = 0.0;
            LineBank bank = load_line_bank_file(path, &cachedStep);
            if (cachedStep == angleStepDeg && bank.size() == masks.size()) return bank;
        } catch (const FormatError&) {
            // corrupt cache entry: fall through and recompute
        }
    }
    LineBank bank = compute_line_bank(masks, angleStepDeg);
    fs::create_directories(cacheDir);
    save_line_bank_file(bank, angleStepDeg, path);
    return bank;
}

// --- shared GT error reporting (calibrate and eval print the same line) ---

void print_gt_error(const Fundamental& f, const std::vector<PointPair>& gtPoints) {
    std::vector<double> d;
    for (const auto& p : gtPoints) d.push_back(symmetric_epipolar_distance(f, p));
    std::sort(d.begin(), d.end());
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(d.size());
    const size_t n = d.size();
    const double med = n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    std::printf("gt_mean_px=%.17g gt_median_px=%.17g\n", mean, med);
}

// --- subcommand options ---

struct SynthOpts {
    std::string specPath;
    std::string outDir;
};

struct CalibrateOpts {
    std::string sceneDir;
    std::string configPath;
    std::string method = "barcode";
    int hypotheses = 5000;
    uint64_t seed = 0;
    bool noRefine = false;
    int keyFrames = 0;  // 0 = every frame
    double angleStepDeg = 2.0;
    std::string outPath = "f.json";
};

struct EvalOpts {
    std::string fPath;
    std::string sceneDir;
};

struct BenchOpts {
    std::string specPath;
    std::string outDir;
    int threads = 0;
};

struct DumpOpts {
    std::string sceneDir;
    std::string camera = "A";
    int frame = 0;
    double angleStepDeg = 2.0;
};

int cmd_synth(const SynthOpts& opts) {
    SceneSpec spec =
        opts.specPath.empty() ? default_scene_spec() : scene_spec_from_json(read_file(opts.specPath));
    const Scene scene = make_scene(spec);
    save_scene(scene, opts.outDir);
    std::printf("wrote %d frames per camera to %s\n", spec.frames, opts.outDir.c_str());
    return kOk;
}

// config file values fill in whatever was not set on the command line
void merge_calibrate_config(const CLI::App& app, CalibrateOpts& opts) {
    if (opts.configPath.empty()) return;
    json j;
    try {
        j = json::parse(read_file(opts.configPath));
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "method") {
                if (app.count("--method") == 0) opts.method = value.get<std::string>();
            } else if (key == "hypotheses") {
                if (app.count("--hypotheses") == 0) opts.hypotheses = value.get<int>();
            } else if (key == "seed") {
                if (app.count("--seed") == 0) opts.seed = value.get<uint64_t>();
            } else if (key == "no_refine") {
                if (app.count("--no-refine") == 0) opts.noRefine = value.get<bool>();
            } else if (key == "key_frames") {
                if (app.count("--key-frames") == 0) opts.keyFrames = value.get<int>();
            } else if (key == "angle_step") {
                if (app.count("--angle-step") == 0) opts.angleStepDeg = value.get<double>();
            } else if (key == "out") {
                if (app.count("--out") == 0) opts.outPath = value.get<std::string>();
            } else {
                throw FormatError("config: unknown key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
}

int cmd_calibrate(const CalibrateOpts& opts) {
    if (opts.method != "barcode" && opts.method != "sinha")
        throw FormatError("calibrate: --method must be barcode or sinha");
    const SceneDir scene = load_scene_dir(opts.sceneDir);
    if (scene.masksA.size() != scene.masksB.size())
        throw FormatError("calibrate: camera frame counts differ");

    std::vector<int> frames;
    if (opts.keyFrames > 0) {
        frames = select_key_frames(scene.masksA, scene.masksB, opts.keyFrames);
    } else {
        for (size_t t = 0; t < scene.masksA.size(); ++t) frames.push_back(static_cast<int>(t));
    }

    const LineBank bankA = bank_with_cache(scene.masksA, opts.angleStepDeg);
    const LineBank bankB = bank_with_cache(scene.masksB, opts.angleStepDeg);
    const MatchTable table = best_pairs(frames, bankA, bankB);

    RansacConfig cfg;
    cfg.maxHypotheses = opts.hypotheses;
    cfg.seed = opts.seed;
    cfg.imageSize = Vec2(scene.masksA[0].width, scene.masksA[0].height);

    // ground truth is for the final report only, never for estimation
    auto [f, report] = opts.method == "barcode"
                           ? ransac_fundamental(table, cfg)
                           : sinha_baseline(frames, bankA, bankB, table, cfg);

    if (!opts.noRefine) {
        std::vector<PointPair> points;
        std::vector<LinePair> lines;
        for (const auto& c : table.candidates) {
            if (c.correlation < cfg.minCorrelation) continue;
            const PointPair pp{HomogPoint::pixel(c.lineA.touch.pos.x(), c.lineA.touch.pos.y()),
                               HomogPoint::pixel(c.lineB.touch.pos.x(), c.lineB.touch.pos.y())};
            if (symmetric_epipolar_distance(f, pp) < cfg.inlierThresholdPx) {
                points.push_back(pp);
                lines.push_back({c.lineA.line, c.lineB.line});
            }
            if (points.size() >= 30) break;
        }
        if (points.size() >= 7) {
            RefineConfig rcfg;
            rcfg.imageSize = cfg.imageSize;
            f = refine(f, points, lines, make_barcode_provider(scene.masksA, scene.masksB), rcfg)
                    .first;
        } else {
            std::fprintf(stderr, "calibrate: %zu inlier points, skipping refinement\n",
                         points.size());
        }
    }

    std::ofstream(opts.outPath) << fundamental_to_json(f) << '\n';
    {
        std::ofstream csv(opts.outPath + ".report.csv");
        csv << "method,hypothesis_index,window_best_error,post_lm_error,lm_count,wall_ms\n";
        for (const auto& cp : report.checkpoints)
            csv << opts.method << ',' << cp.hypothesisIndex << ',' << cp.windowBestError << ','
                << cp.postLMError << ',' << report.lmCount << ',' << cp.wallMs << '\n';
    }
    // report on the serialized form so `eval` reproduces the same numbers
    if (!scene.gtPoints.empty())
        print_gt_error(fundamental_from_json(fundamental_to_json(f)), scene.gtPoints);
    return kOk;
}

int cmd_eval(const EvalOpts& opts) {
    const Fundamental f = fundamental_from_json(read_file(opts.fPath));
    const SceneDir scene = load_scene_dir(opts.sceneDir);
    if (scene.gtPoints.empty())
        throw NoData("eval: scene has no ground-truth frontier points");
    print_gt_error(f, scene.gtPoints);
    return kOk;
}

int cmd_bench(const BenchOpts& opts) {
    const ExperimentSpec spec = experiment_spec_from_json(read_file(opts.specPath));
    const ExperimentResult result = run_experiment(spec, opts.threads);
    save_experiment(result, opts.outDir);
    std::printf("wrote bench.csv and summary.csv to %s\n", opts.outDir.c_str());
    return kOk;
}

int cmd_dump_barcodes(const DumpOpts& opts) {
    if (opts.camera != "A" && opts.camera != "B")
        throw FormatError("dump-barcodes: --camera must be A or B");
    const std::vector<Mask> masks = load_pgm_dir(opts.sceneDir + "/cam" + opts.camera);
    if (masks.empty()) throw FormatError("dump-barcodes: no frames found");
    if (opts.frame < 0 || static_cast<size_t>(opts.frame) >= masks.size())
        throw FormatError("dump-barcodes: frame out of range");
    const LineBank bank = bank_with_cache(masks, opts.angleStepDeg);
    const FrameLines& fl = bank[static_cast<size_t>(opts.frame)];
    std::printf("angle,barcode\n");
    for (size_t i = 0; i < fl.lines.size(); ++i)
        std::printf("%g,%s\n", fl.lines[i].normalAngle, barcode_to_string(fl.barcodes[i]).c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"silhouette-based fundamental matrix estimation"};
    app.require_subcommand(1);

    SynthOpts synthOpts;
    auto* synth = app.add_subcommand("synth", "render a synthetic scene");
    synth->add_option("--spec", synthOpts.specPath, "scene spec JSON (default: built-in scene)");
    synth->add_option("--out", synthOpts.outDir, "output directory")->required();

    CalibrateOpts calOpts;
    auto* calibrate = app.add_subcommand("calibrate", "estimate F from a scene directory");
    calibrate->add_option("--scene", calOpts.sceneDir, "scene directory")->required();
    calibrate->add_option("--config", calOpts.configPath, "JSON config merged under flags");
    calibrate->add_option("--method", calOpts.method, "barcode | sinha");
    calibrate->add_option("--hypotheses", calOpts.hypotheses, "RANSAC hypothesis budget");
    calibrate->add_option("--seed", calOpts.seed, "RNG seed");
    calibrate->add_flag("--no-refine", calOpts.noRefine, "skip the alternating refinement");
    calibrate->add_option("--key-frames", calOpts.keyFrames, "key frame count (0 = all frames)");
    calibrate->add_option("--angle-step", calOpts.angleStepDeg, "tangent angle step (degrees)");
    calibrate->add_option("--out", calOpts.outPath, "output F JSON path");

    EvalOpts evalOpts;
    auto* eval = app.add_subcommand("eval", "score an F against scene ground truth");
    eval->add_option("--f", evalOpts.fPath, "F JSON path")->required();
    eval->add_option("--scene", evalOpts.sceneDir, "scene directory")->required();

    BenchOpts benchOpts;
    auto* bench = app.add_subcommand("bench", "run a method-comparison experiment");
    bench->add_option("--spec", benchOpts.specPath, "experiment spec JSON")->required();
    bench->add_option("--out", benchOpts.outDir, "output directory")->required();
    bench->add_option("--threads", benchOpts.threads, "max concurrent cells (0 = unlimited)");

    DumpOpts dumpOpts;
    auto* dump = app.add_subcommand("dump-barcodes", "print one frame's line barcodes");
    dump->add_option("--scene", dumpOpts.sceneDir, "scene directory")->required();
    dump->add_option("--camera", dumpOpts.camera, "A | B");
    dump->add_option("--frame", dumpOpts.frame, "frame index");
    dump->add_option("--angle-step", dumpOpts.angleStepDeg, "tangent angle step (degrees)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (synth->parsed()) return cmd_synth(synthOpts);
        if (calibrate->parsed()) {
            merge_calibrate_config(*calibrate, calOpts);
            return cmd_calibrate(calOpts);
        }
        if (eval->parsed()) return cmd_eval(evalOpts);
        if (bench->parsed()) return cmd_bench(benchOpts);
        if (dump->parsed()) return cmd_dump_barcodes(dumpOpts);
    } catch (const NotEnoughCandidates& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInfeasible;
    } catch (const AllDegenerate& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInfeasible;
    } catch (const NotEnoughFrames& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInfeasible;
    } catch (const InsufficientPoints& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInfeasible;
    } catch (const NoFrontierPoints& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInfeasible;
    } catch (const NoData& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInfeasible;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const InvalidSpec& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIoError;
    } catch (const std::ios_base::failure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIoError;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInfeasible;
    }
    return kOk;
}
