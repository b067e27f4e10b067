#include "mbcal/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace mbcal {

using nlohmann::json;

std::string bench_method_name(BenchMethod m) {
    return m == BenchMethod::Barcode ? "barcode" : "sinha";
}

ExperimentSpec default_experiment_spec() { return ExperimentSpec{}; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// full round-trip precision so the summary is exactly recomputable
std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

std::string fmt_or_marker(double x) { return std::isnan(x) ? "not_attained" : fmt(x); }

BenchCell run_cell(BenchMethod method, uint64_t seed, const ExperimentSpec& spec,
                   const std::vector<int>& frames, const LineBank& bankA, const LineBank& bankB,
                   const MatchTable& table, const std::vector<PointPair>& gt, int maxBudget) {
    BenchCell cell;
    cell.method = method;
    cell.seed = seed;

    RansacConfig cfg;
    cfg.maxHypotheses = maxBudget;
    cfg.checkpointInterval = spec.checkpointInterval;
    cfg.inlierThresholdPx = spec.inlierThresholdPx;
    cfg.seed = seed;
    cfg.minCorrelation = spec.minCorrelation;
    cfg.imageSize = spec.scene.imageSize;

    try {
        std::pair<Fundamental, RansacReport> run =
            method == BenchMethod::Barcode
                ? ransac_fundamental(table, cfg, &gt)
                : sinha_baseline(frames, bankA, bankB, table, cfg, &gt);
        cell.f = run.first;
        cell.report = std::move(run.second);
        cell.chargeIters = cell.report.precomputeCostIters;
        cell.bestError = std::numeric_limits<double>::infinity();
        for (const auto& cp : cell.report.checkpoints)
            cell.bestError = std::min(cell.bestError, cp.postLMError);
        cell.ok = !cell.report.checkpoints.empty();
        if (!cell.ok) cell.error = "no checkpoints produced";
    } catch (const Error& e) {
        cell.error = e.what();
    }
    return cell;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, int threads) {
    if (spec.methods.empty() || spec.budgets.empty() || spec.thresholds.empty() ||
        spec.seeds.empty())
        throw InvalidSpec("run_experiment: methods, budgets, thresholds and seeds must be nonempty");

    ExperimentResult result;
    result.spec = spec;

    // shared offline phase: one render, one line bank per camera
    const Scene scene = make_scene(spec.scene);
    const std::vector<Mask> masksA = render_sequence(scene, 0);
    const std::vector<Mask> masksB = render_sequence(scene, 1);
    const LineBank bankA = compute_line_bank(masksA, spec.angleStepDeg);
    const LineBank bankB = compute_line_bank(masksB, spec.angleStepDeg);
    std::vector<int> frames(static_cast<size_t>(spec.scene.frames));
    for (int t = 0; t < spec.scene.frames; ++t) frames[static_cast<size_t>(t)] = t;
    const MatchTable table = best_pairs(frames, bankA, bankB);

    // GT evaluation points come from noise-free renders
    const Fundamental fGT = scene_fundamental(scene);
    std::vector<Mask> cleanA, cleanB;
    for (int t = 0; t < spec.scene.frames; ++t) {
        cleanA.push_back(render_silhouette(scene.cameras[0], scene.spheresAtFrame[static_cast<size_t>(t)],
                                           spec.scene.imageSize, t));
        cleanB.push_back(render_silhouette(scene.cameras[1], scene.spheresAtFrame[static_cast<size_t>(t)],
                                           spec.scene.imageSize, t));
    }
    result.gtPoints = frontier_point_pairs(ground_truth_frontier_points(cleanA, cleanB, fGT));

    const int maxBudget = *std::max_element(spec.budgets.begin(), spec.budgets.end());

    // cells are independent; the shared banks are read-only here
    std::vector<std::pair<BenchMethod, uint64_t>> jobs;
    for (BenchMethod method : spec.methods)
        for (uint64_t seed : spec.seeds) jobs.emplace_back(method, seed);
    const size_t batch = threads > 0 ? static_cast<size_t>(threads) : jobs.size();
    for (size_t start = 0; start < jobs.size(); start += batch) {
        std::vector<std::future<BenchCell>> futures;
        for (size_t i = start; i < std::min(start + batch, jobs.size()); ++i)
            futures.push_back(std::async(std::launch::async, run_cell, jobs[i].first,
                                         jobs[i].second, std::cref(spec), std::cref(frames),
                                         std::cref(bankA), std::cref(bankB), std::cref(table),
                                         std::cref(result.gtPoints), maxBudget));
        for (auto& f : futures) result.cells.push_back(f.get());
    }

    // expected LM count per threshold from the pooled error CDF
    for (double thr : spec.thresholds) {
        ThresholdSummary row;
        row.thresholdPx = thr;
        for (BenchMethod method : spec.methods) {
            size_t total = 0, hit = 0;
            int charge = 0;
            for (const auto& cell : result.cells) {
                if (cell.method != method || !cell.ok) continue;
                charge = cell.chargeIters;
                for (const auto& cp : cell.report.checkpoints) {
                    ++total;
                    if (cp.postLMError <= thr) ++hit;
                }
            }
            row.expectedLm.push_back(
                hit == 0 ? kNaN
                         : static_cast<double>(total) / static_cast<double>(hit) +
                               static_cast<double>(charge) / spec.checkpointInterval);
        }
        row.ratio = kNaN;
        const auto itB = std::find(spec.methods.begin(), spec.methods.end(), BenchMethod::Barcode);
        const auto itS = std::find(spec.methods.begin(), spec.methods.end(), BenchMethod::Sinha);
        if (itB != spec.methods.end() && itS != spec.methods.end()) {
            const double b = row.expectedLm[static_cast<size_t>(itB - spec.methods.begin())];
            const double s = row.expectedLm[static_cast<size_t>(itS - spec.methods.begin())];
            if (!std::isnan(b) && !std::isnan(s)) row.ratio = s / b;
        }
        result.thresholdTable.push_back(std::move(row));
    }

    // median best post-LM error within each hypothesis budget
    for (int budget : spec.budgets) {
        BudgetSummary row;
        row.budget = budget;
        for (BenchMethod method : spec.methods) {
            std::vector<double> best;
            for (const auto& cell : result.cells) {
                if (cell.method != method || !cell.ok) continue;
                double b = std::numeric_limits<double>::infinity();
                for (const auto& cp : cell.report.checkpoints)
                    if (cp.hypothesisIndex <= budget) b = std::min(b, cp.postLMError);
                if (std::isfinite(b)) best.push_back(b);
            }
            row.medianBestError.push_back(median(std::move(best)));
        }
        result.budgetTable.push_back(std::move(row));
    }
    return result;
}

std::vector<double> success_fraction(const ExperimentResult& result, double thresholdPx) {
    bool any = false;
    for (const auto& cell : result.cells) any = any || cell.ok;
    if (!any) throw NoData("success_fraction: no completed cells");

    std::vector<double> out;
    for (BenchMethod method : result.spec.methods) {
        size_t total = 0, hit = 0;
        for (const auto& cell : result.cells) {
            if (cell.method != method) continue;
            ++total;  // failed cells count as unsuccessful, not missing
            if (cell.ok && cell.bestError <= thresholdPx) ++hit;
        }
        out.push_back(total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total));
    }
    return out;
}

namespace {

// the two intersections of a line with the image rectangle, if any
std::vector<Vec2> clip_line_to_box(const Vec3& l, const Vec2& size) {
    std::vector<Vec2> pts;
    auto push = [&](double x, double y) {
        for (const auto& p : pts)
            if ((p - Vec2(x, y)).norm() < 1e-9) return;
        pts.emplace_back(x, y);
    };
    const double w = size.x(), h = size.y();
    if (std::abs(l.y()) > 1e-12)
        for (double x : {0.0, w}) {
            const double y = -(l.x() * x + l.z()) / l.y();
            if (y >= 0.0 && y <= h) push(x, y);
        }
    if (std::abs(l.x()) > 1e-12)
        for (double y : {0.0, h}) {
            const double x = -(l.y() * y + l.z()) / l.x();
            if (x >= 0.0 && x <= w) push(x, y);
        }
    if (pts.size() < 2) return {};
    // keep the two farthest apart (corner-crossing lines hit 3+ borders)
    size_t bi = 0, bj = 1;
    double bd = -1.0;
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            if ((pts[i] - pts[j]).norm() > bd) {
                bd = (pts[i] - pts[j]).norm();
                bi = i;
                bj = j;
            }
    return {pts[bi], pts[bj]};
}

std::string svg_num(double x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << x;
    return os.str();
}

void svg_line(std::ostream& os, const Vec3& l, const Vec2& size, const char* color) {
    const auto seg = clip_line_to_box(l, size);
    if (seg.empty()) return;
    os << "  <line x1=\"" << svg_num(seg[0].x()) << "\" y1=\"" << svg_num(seg[0].y())
       << "\" x2=\"" << svg_num(seg[1].x()) << "\" y2=\"" << svg_num(seg[1].y())
       << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
}

}  // namespace

std::string render_overlay(const Vec2& imageSize, const Fundamental& fEstimated,
                           const Fundamental& fGT, const std::vector<PointPair>& points) {
    std::ostringstream os;
    const int w = static_cast<int>(imageSize.x()), h = static_cast<int>(imageSize.y());
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    os << "  <rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
       << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (const auto& p : points) {
        svg_line(os, fGT.m * p.x.v, imageSize, "red");
        svg_line(os, fEstimated.m * p.x.v, imageSize, "#e6c000");
        if (p.xPrime.finite()) {
            const Vec2 q = p.xPrime.dehomog();
            os << "  <circle cx=\"" << svg_num(q.x()) << "\" cy=\"" << svg_num(q.y())
               << "\" r=\"3\" fill=\"none\" stroke=\"blue\" stroke-width=\"1\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

void bench_csv(const ExperimentResult& result, std::ostream& out) {
    out << "method,seed,raw_hypotheses,charged_hypotheses,window_best_error,post_lm_error\n";
    for (const auto& cell : result.cells) {
        if (!cell.ok) continue;
        for (const auto& cp : cell.report.checkpoints)
            out << bench_method_name(cell.method) << ',' << cell.seed << ','
                << cp.hypothesisIndex << ',' << cp.hypothesisIndex + cell.chargeIters << ','
                << fmt(cp.windowBestError) << ',' << fmt(cp.postLMError) << '\n';
    }
}

void summary_csv(const ExperimentResult& result, std::ostream& out) {
    const auto& methods = result.spec.methods;
    out << "section,key,method,value\n";
    for (const auto& row : result.thresholdTable)
        for (size_t m = 0; m < methods.size(); ++m)
            out << "expected_lm," << fmt(row.thresholdPx) << ',' << bench_method_name(methods[m])
                << ',' << fmt_or_marker(row.expectedLm[m]) << '\n';
    const bool both =
        std::find(methods.begin(), methods.end(), BenchMethod::Barcode) != methods.end() &&
        std::find(methods.begin(), methods.end(), BenchMethod::Sinha) != methods.end();
    if (both)
        for (const auto& row : result.thresholdTable)
            out << "ratio," << fmt(row.thresholdPx) << ",," << fmt_or_marker(row.ratio) << '\n';
    for (const auto& row : result.budgetTable)
        for (size_t m = 0; m < methods.size(); ++m)
            out << "best_at_budget," << row.budget << ',' << bench_method_name(methods[m]) << ','
                << fmt_or_marker(row.medianBestError[m]) << '\n';
    for (const auto& cell : result.cells) {
        std::string status = cell.ok ? "ok:" + fmt(cell.bestError) : "error:" + cell.error;
        std::replace(status.begin(), status.end(), ',', ';');
        out << "cell," << cell.seed << ',' << bench_method_name(cell.method) << ',' << status
            << '\n';
    }
}

std::string experiment_spec_to_json(const ExperimentSpec& spec) {
    json j;
    j["scene"] = json::parse(scene_spec_to_json(spec.scene));
    j["methods"] = json::array();
    for (BenchMethod m : spec.methods) j["methods"].push_back(bench_method_name(m));
    j["budgets"] = spec.budgets;
    j["thresholds"] = spec.thresholds;
    j["seeds"] = spec.seeds;
    j["checkpoint_interval"] = spec.checkpointInterval;
    j["min_correlation"] = spec.minCorrelation;
    j["inlier_threshold_px"] = spec.inlierThresholdPx;
    j["angle_step_deg"] = spec.angleStepDeg;
    return j.dump(2);
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("experiment spec: ") + e.what());
    }
    ExperimentSpec spec;
    try {
        if (j.contains("scene")) spec.scene = scene_spec_from_json(j["scene"].dump());
        if (j.contains("methods")) {
            spec.methods.clear();
            for (const auto& jm : j["methods"]) {
                const std::string name = jm.get<std::string>();
                if (name == "barcode")
                    spec.methods.push_back(BenchMethod::Barcode);
                else if (name == "sinha")
                    spec.methods.push_back(BenchMethod::Sinha);
                else
                    throw FormatError("experiment spec: unknown method '" + name + "'");
            }
        }
        if (j.contains("budgets")) spec.budgets = j["budgets"].get<std::vector<int>>();
        if (j.contains("thresholds")) spec.thresholds = j["thresholds"].get<std::vector<double>>();
        if (j.contains("seeds")) spec.seeds = j["seeds"].get<std::vector<uint64_t>>();
        if (j.contains("checkpoint_interval"))
            spec.checkpointInterval = j["checkpoint_interval"].get<int>();
        if (j.contains("min_correlation")) spec.minCorrelation = j["min_correlation"].get<double>();
        if (j.contains("inlier_threshold_px"))
            spec.inlierThresholdPx = j["inlier_threshold_px"].get<double>();
        if (j.contains("angle_step_deg")) spec.angleStepDeg = j["angle_step_deg"].get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("experiment spec: ") + e.what());
    }
    return spec;
}

void save_experiment(const ExperimentResult& result, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::ofstream(dir + "/experiment.json") << experiment_spec_to_json(result.spec);
    {
        std::ofstream raw(dir + "/bench.csv");
        bench_csv(result, raw);
    }
    {
        std::ofstream summary(dir + "/summary.csv");
        summary_csv(result, summary);
    }

    const Scene scene = make_scene(result.spec.scene);
    const Fundamental fGT = scene_fundamental(scene);
    for (BenchMethod method : result.spec.methods) {
        const BenchCell* best = nullptr;
        for (const auto& cell : result.cells)
            if (cell.method == method && cell.ok && (!best || cell.bestError < best->bestError))
                best = &cell;
        if (!best) continue;
        std::ofstream(dir + "/overlay_" + bench_method_name(method) + ".svg")
            << render_overlay(result.spec.scene.imageSize, best->f, fGT, result.gtPoints);
    }
}

}  // namespace mbcal
