#include "mbcal/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

namespace mbcal {

namespace {

PointPair candidate_points_pair(const MatchCandidate& c) {
    return {HomogPoint::pixel(c.lineA.touch.pos.x(), c.lineA.touch.pos.y()),
            HomogPoint::pixel(c.lineB.touch.pos.x(), c.lineB.touch.pos.y())};
}

double mean_error(const Fundamental& f, const std::vector<PointPair>& pairs) {
    if (pairs.empty()) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (const auto& p : pairs) s += symmetric_epipolar_distance(f, p);
    return s / static_cast<double>(pairs.size());
}

// a hypothesis source: 3 line pairs plus the candidate indices used
struct Triple {
    std::array<LinePair, 3> pairs;
    std::array<size_t, 3> source{0, 0, 0};
};

using Generator = std::function<std::optional<Triple>(uint64_t rngState)>;

std::pair<Fundamental, RansacReport> run_ransac(const Generator& gen, const MatchTable& table,
                                                const RansacConfig& cfg,
                                                const std::vector<PointPair>* groundTruth) {
    if (cfg.checkpointInterval < 1) throw Error("ransac: checkpointInterval must be >= 1");
    if (cfg.inlierThresholdPx <= 0) throw Error("ransac: inlierThresholdPx must be > 0");

    std::vector<size_t> filtered;
    for (size_t i = 0; i < table.candidates.size(); ++i)
        if (table.candidates[i].correlation >= cfg.minCorrelation) filtered.push_back(i);
    std::vector<PointPair> verifyPairs;
    verifyPairs.reserve(filtered.size());
    for (size_t i : filtered) verifyPairs.push_back(candidate_points_pair(table.candidates[i]));

    auto inlier_pairs = [&](const Fundamental& f) {
        std::vector<PointPair> in;
        for (const auto& p : verifyPairs)
            if (symmetric_epipolar_distance(f, p) < cfg.inlierThresholdPx) in.push_back(p);
        return in;
    };

    RansacReport report;
    bool anyValid = false;
    std::optional<Hypothesis> windowBest;
    std::optional<Hypothesis> globalBest;  // post-LM, ranked by (inliers, score)
    Fundamental bestF;
    const auto t0 = std::chrono::steady_clock::now();

    auto better = [](const Hypothesis& a, const Hypothesis& b) {
        return a.inlierCount != b.inlierCount ? a.inlierCount > b.inlierCount
                                              : a.score < b.score;
    };

    for (int h = 1; h <= cfg.maxHypotheses; ++h) {
        const uint64_t stream = cfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(h));
        if (auto triple = gen(stream)) {
            try {
                const LinePairFit fit = fundamental_from_line_pairs(triple->pairs, cfg.imageSize);
                Hypothesis hyp;
                hyp.f = fit.f;
                hyp.sourceTriple = triple->source;
                const auto [inl, err] =
                    score_hypothesis(fit.f, table, cfg.inlierThresholdPx, cfg.minCorrelation);
                hyp.inlierCount = inl;
                hyp.score = err;
                anyValid = true;
                if (!windowBest || better(hyp, *windowBest)) windowBest = hyp;
            } catch (const Error&) {
                // degenerate triple: hypothesis consumed, nothing scored
            }
        }

        if (h % cfg.checkpointInterval != 0 && h != cfg.maxHypotheses) continue;
        const Hypothesis* toRefine =
            windowBest ? &*windowBest : (globalBest ? &*globalBest : nullptr);
        if (toRefine) {
            Fundamental refined = toRefine->f;
            std::vector<PointPair> in = inlier_pairs(toRefine->f);
            const std::vector<PointPair>& lmSet = in.size() >= 7 ? in : verifyPairs;
            if (lmSet.size() >= 7) refined = lm_refine(toRefine->f, lmSet).f;

            Hypothesis post;
            post.f = refined;
            post.sourceTriple = toRefine->sourceTriple;
            const auto [inl, err] =
                score_hypothesis(refined, table, cfg.inlierThresholdPx, cfg.minCorrelation);
            post.inlierCount = inl;
            post.score = err;
            if (!globalBest || better(post, *globalBest)) {
                globalBest = post;
                bestF = refined;
            }

            Checkpoint cp;
            cp.hypothesisIndex = h;
            cp.windowBestError = toRefine->score;
            cp.postLMError = groundTruth ? mean_error(refined, *groundTruth) : post.score;
            cp.wallMs = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
            report.checkpoints.push_back(cp);
            report.lmCount = static_cast<int>(report.checkpoints.size());
        }
        windowBest.reset();
    }

    if (!anyValid || !globalBest)
        throw AllDegenerate("ransac: no hypothesis produced a valid fundamental matrix");
    return {bestF, report};
}

}  // namespace

std::pair<int, double> score_hypothesis(const Fundamental& f, const MatchTable& table,
                                        double thresholdPx, double minCorrelation) {
    int inliers = 0;
    double sum = 0.0;
    for (const auto& c : table.candidates) {
        if (c.correlation < minCorrelation) continue;
        const double d = symmetric_epipolar_distance(f, candidate_points_pair(c));
        if (d < thresholdPx) {
            ++inliers;
            sum += d;
        }
    }
    return {inliers, inliers ? sum / inliers : std::numeric_limits<double>::infinity()};
}

std::pair<Fundamental, RansacReport> ransac_fundamental(
    const MatchTable& table, const RansacConfig& cfg,
    const std::vector<PointPair>* groundTruth) {
    std::vector<size_t> filtered;
    for (size_t i = 0; i < table.candidates.size(); ++i)
        if (table.candidates[i].correlation >= cfg.minCorrelation) filtered.push_back(i);
    if (filtered.size() < 3)
        throw NotEnoughCandidates("ransac_fundamental: < 3 candidates above minCorrelation");
    {
        std::vector<int> frames;
        for (size_t i : filtered) frames.push_back(table.candidates[i].frame);
        std::sort(frames.begin(), frames.end());
        frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
        if (frames.size() < 3)
            throw NotEnoughCandidates("ransac_fundamental: < 3 distinct candidate frames");
    }

    Generator gen = [&, filtered](uint64_t rngState) -> std::optional<Triple> {
        uint64_t s = rngState;
        for (int attempt = 0; attempt < 64; ++attempt) {
            std::array<size_t, 3> pick{};
            for (auto& p : pick) p = filtered[splitmix64(s) % filtered.size()];
            const auto& c0 = table.candidates[pick[0]];
            const auto& c1 = table.candidates[pick[1]];
            const auto& c2 = table.candidates[pick[2]];
            if (c0.frame == c1.frame || c0.frame == c2.frame || c1.frame == c2.frame) continue;
            Triple t;
            t.pairs = {LinePair{c0.lineA.line, c0.lineB.line},
                       LinePair{c1.lineA.line, c1.lineB.line},
                       LinePair{c2.lineA.line, c2.lineB.line}};
            t.source = pick;
            return t;
        }
        return std::nullopt;
    };
    return run_ransac(gen, table, cfg, groundTruth);
}

std::pair<Fundamental, RansacReport> sinha_baseline(
    const std::vector<int>& framePairs, const LineBank& bankA, const LineBank& bankB,
    const MatchTable& table, const RansacConfig& cfg,
    const std::vector<PointPair>* groundTruth) {
    std::vector<int> usable;
    for (int f : framePairs) {
        if (f < 0 || static_cast<size_t>(f) >= bankA.size() ||
            static_cast<size_t>(f) >= bankB.size())
            continue;
        if (bankA[static_cast<size_t>(f)].lines.size() >= 2 &&
            bankB[static_cast<size_t>(f)].lines.size() >= 2)
            usable.push_back(f);
    }
    if (usable.size() < 2)
        throw NotEnoughCandidates("sinha_baseline: < 2 usable frame pairs");

    Generator gen = [&, usable](uint64_t rngState) -> std::optional<Triple> {
        uint64_t s = rngState;
        const int f1 = usable[splitmix64(s) % usable.size()];
        int f2 = f1;
        for (int attempt = 0; attempt < 16 && f2 == f1; ++attempt)
            f2 = usable[splitmix64(s) % usable.size()];
        if (f2 == f1) return std::nullopt;
        const FrameLines& a1 = bankA[static_cast<size_t>(f1)];
        const FrameLines& b1 = bankB[static_cast<size_t>(f1)];

        const size_t ia = splitmix64(s) % a1.lines.size();
        size_t ia2 = splitmix64(s) % a1.lines.size();
        const size_t ib = splitmix64(s) % b1.lines.size();
        size_t ib2 = splitmix64(s) % b1.lines.size();
        if (ia2 == ia) ia2 = (ia + 1) % a1.lines.size();
        if (ib2 == ib) ib2 = (ib + 1) % b1.lines.size();

        const Vec3 eH = a1.lines[ia].line.v.cross(a1.lines[ia2].line.v);
        const Vec3 epH = b1.lines[ib].line.v.cross(b1.lines[ib2].line.v);
        const HomogPoint e(eH), ep(epH);
        if (!e.finite() || !ep.finite()) return std::nullopt;  // parallel tangents

        const FrameLines& a2 = bankA[static_cast<size_t>(f2)];
        const FrameLines& b2 = bankB[static_cast<size_t>(f2)];
        // an epipole inside the silhouette hull admits no tangent
        const auto tA = tangents_from_point(a2.hull, e.dehomog());
        const auto tB = tangents_from_point(b2.hull, ep.dehomog());
        if (tA.empty() || tB.empty()) return std::nullopt;
        const CandidateLine& thirdA = tA[splitmix64(s) % tA.size()];
        const CandidateLine& thirdB = tB[splitmix64(s) % tB.size()];

        Triple t;
        t.pairs = {LinePair{a1.lines[ia].line, b1.lines[ib].line},
                   LinePair{a1.lines[ia2].line, b1.lines[ib2].line},
                   LinePair{thirdA.line, thirdB.line}};
        t.source = {ia, ib, static_cast<size_t>(f2)};
        return t;
    };
    auto result = run_ransac(gen, table, cfg, groundTruth);
    result.second.precomputeCostIters = 0;  // no barcode offline phase to charge
    return result;
}

void ransac_report_csv(const RansacReport& report, std::ostream& out) {
    out << "hypothesis_index,window_best_error,post_lm_error,lm_count,wall_ms\n";
    for (const auto& cp : report.checkpoints)
        out << cp.hypothesisIndex << ',' << cp.windowBestError << ',' << cp.postLMError << ','
            << report.lmCount << ',' << cp.wallMs << '\n';
}

}  // namespace mbcal
