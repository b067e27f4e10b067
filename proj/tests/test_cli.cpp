#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = MBCAL_CLI_PATH;
const std::string kRoot = "/tmp/mbcal_cli_test";
const std::string kCache = kRoot + "/cache";

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run(const std::string& args) {
    const std::string cmd = "MBCAL_CACHE_DIR=" + kCache + " " + kCli + " " + args + " 2>/dev/null";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof(buf), pipe)) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream(path) << text;
}

std::string scene_spec_json() {
    nlohmann::json j;
    j["frames"] = 80;
    return j.dump();
}

double parse_metric(const std::string& out, const std::string& key) {
    const size_t pos = out.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::stod(out.substr(pos + key.size() + 1));
}

}  // namespace

TEST_CASE("cli: synth writes a deterministic scene directory") {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    write_file(kRoot + "/spec.json", scene_spec_json());
    const std::string scene = kRoot + "/scene";

    auto r = run("synth --spec " + kRoot + "/spec.json --out " + scene);
    CHECK(r.code == 0);
    CHECK(fs::exists(scene + "/camA/frame_0000.pgm"));
    CHECK(fs::exists(scene + "/camB/frame_0079.pgm"));
    CHECK(fs::exists(scene + "/manifest.json"));
    CHECK(fs::exists(scene + "/frontier_points.csv"));

    r = run("synth --spec " + kRoot + "/spec.json --out " + kRoot + "/scene2");
    CHECK(r.code == 0);
    CHECK(read_file(scene + "/manifest.json") == read_file(kRoot + "/scene2/manifest.json"));
    CHECK(read_file(scene + "/camA/frame_0042.pgm") ==
          read_file(kRoot + "/scene2/camA/frame_0042.pgm"));

    // a path that cannot be created is an I/O error
    write_file(kRoot + "/blocker", "x");
    r = run("synth --out " + kRoot + "/blocker/nested");
    CHECK(r.code == 3);
}

TEST_CASE("cli: calibrate and eval agree on the ground-truth error") {
    const std::string scene = kRoot + "/scene";
    REQUIRE(fs::exists(scene + "/manifest.json"));

    const auto r = run("calibrate --scene " + scene + " --hypotheses 1000 --seed 1 --out " +
                       kRoot + "/f.json");
    REQUIRE(r.code == 0);
    CHECK(parse_metric(r.out, "gt_mean_px") < 1.5);
    CHECK(fs::exists(kRoot + "/f.json"));
    CHECK(read_file(kRoot + "/f.json.report.csv").find("barcode,") != std::string::npos);

    const auto ev = run("eval --f " + kRoot + "/f.json --scene " + scene);
    CHECK(ev.code == 0);
    CHECK(ev.out == r.out.substr(r.out.find("gt_mean_px")));

    // the line bank cache was populated (one entry per camera) and reusing
    // it reproduces the identical result
    size_t banks = 0;
    for (const auto& e : fs::directory_iterator(kCache))
        banks += e.path().extension() == ".mbcb";
    CHECK(banks == 2);
    const auto again = run("calibrate --scene " + scene + " --hypotheses 1000 --seed 1 --out " +
                           kRoot + "/f2.json");
    CHECK(again.code == 0);
    CHECK(read_file(kRoot + "/f2.json") == read_file(kRoot + "/f.json"));
}

TEST_CASE("cli: eval with the true F is near zero") {
    const std::string scene = kRoot + "/scene";
    const auto manifest = nlohmann::json::parse(read_file(scene + "/manifest.json"));
    write_file(kRoot + "/gt.json", manifest["gt_fundamental"].dump());
    const auto r = run("eval --f " + kRoot + "/gt.json --scene " + scene);
    CHECK(r.code == 0);
    CHECK(parse_metric(r.out, "gt_mean_px") < 0.01);
}

TEST_CASE("cli: the sinha method tags its report") {
    const std::string scene = kRoot + "/scene";
    const auto r = run("calibrate --scene " + scene +
                       " --method sinha --no-refine --hypotheses 1000 --seed 1 --out " + kRoot +
                       "/fs.json");
    CHECK(r.code == 0);
    CHECK(read_file(kRoot + "/fs.json.report.csv").find("sinha,") != std::string::npos);
}

TEST_CASE("cli: config file merges under explicit flags") {
    const std::string scene = kRoot + "/scene";
    write_file(kRoot + "/cfg.json",
               "{\"method\": \"sinha\", \"no_refine\": true, \"hypotheses\": 1000, "
               "\"out\": \"" + kRoot + "/fc.json\"}");
    auto r = run("calibrate --scene " + scene + " --config " + kRoot + "/cfg.json");
    CHECK(r.code == 0);
    CHECK(read_file(kRoot + "/fc.json.report.csv").find("sinha,") != std::string::npos);

    // an explicit flag wins over the file value
    r = run("calibrate --scene " + scene + " --config " + kRoot + "/cfg.json --method barcode");
    CHECK(r.code == 0);
    CHECK(read_file(kRoot + "/fc.json.report.csv").find("barcode,") != std::string::npos);

    write_file(kRoot + "/bad.json", "{\"bogus\": 1}");
    r = run("calibrate --scene " + scene + " --config " + kRoot + "/bad.json");
    CHECK(r.code == 2);
}

TEST_CASE("cli: input validation exit codes") {
    const std::string scene = kRoot + "/scene";

    // mismatched frame counts
    const std::string bad = kRoot + "/scene_bad";
    fs::remove_all(bad);
    fs::copy(scene, bad, fs::copy_options::recursive);
    fs::remove(bad + "/camB/frame_0079.pgm");
    auto r = run("calibrate --scene " + bad + " --hypotheses 1000 --out " + kRoot + "/fb.json");
    CHECK(r.code == 2);

    // eval without ground truth
    const std::string bare = kRoot + "/scene_bare";
    fs::remove_all(bare);
    fs::create_directories(bare + "/camA");
    fs::create_directories(bare + "/camB");
    fs::copy(scene + "/camA/frame_0000.pgm", bare + "/camA/frame_0000.pgm");
    fs::copy(scene + "/camB/frame_0000.pgm", bare + "/camB/frame_0000.pgm");
    write_file(bare + "/manifest.json", "{}");
    r = run("eval --f " + kRoot + "/gt.json --scene " + bare);
    CHECK(r.code == 4);

    CHECK(run("calibrate").code == 2);   // missing required --scene
    CHECK(run("frobnicate").code == 2);  // unknown subcommand
    CHECK(run("calibrate --scene " + scene + " --method magic --out " + kRoot + "/fx.json").code ==
          2);
}

TEST_CASE("cli: dump-barcodes prints the frame's line bank") {
    const std::string scene = kRoot + "/scene";
    auto r = run("dump-barcodes --scene " + scene + " --camera A --frame 0");
    CHECK(r.code == 0);
    CHECK(r.out.rfind("angle,barcode", 0) == 0);
    CHECK(r.out.find('1') != std::string::npos);
    r = run("dump-barcodes --scene " + scene + " --camera A --frame 9999");
    CHECK(r.code == 2);
}

TEST_CASE("cli: bench runs both methods deterministically") {
    nlohmann::json spec;
    spec["scene"] = nlohmann::json::parse(scene_spec_json());
    spec["budgets"] = {500};
    spec["thresholds"] = {1.5, 0.5};
    spec["seeds"] = {1};
    spec["checkpoint_interval"] = 500;
    write_file(kRoot + "/exp.json", spec.dump());
    auto r = run("bench --spec " + kRoot + "/exp.json --out " + kRoot + "/bench --threads 2");
    REQUIRE(r.code == 0);
    const std::string summary = read_file(kRoot + "/bench/summary.csv");
    CHECK(summary.find(",barcode,") != std::string::npos);
    CHECK(summary.find(",sinha,") != std::string::npos);

    r = run("bench --spec " + kRoot + "/exp.json --out " + kRoot + "/bench2 --threads 1");
    CHECK(r.code == 0);
    CHECK(read_file(kRoot + "/bench2/summary.csv") == summary);
    CHECK(read_file(kRoot + "/bench2/bench.csv") == read_file(kRoot + "/bench/bench.csv"));
}
