#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mbcal/lm.hpp"
#include "mbcal/matcher.hpp"
#include "mbcal/rng.hpp"

namespace mbcal {

struct RansacConfig {
    int maxHypotheses = 5000;
    int checkpointInterval = 1000;
    double inlierThresholdPx = 1.0;
    uint64_t seed = 0;
    double minCorrelation = 0.9;
    Vec2 imageSize{640, 480};
};

struct Hypothesis {
    Fundamental f;
    int inlierCount = 0;
    double score = 0.0;  // mean symmetric epipolar distance over inliers
    std::array<size_t, 3> sourceTriple{0, 0, 0};
};

struct Checkpoint {
    int hypothesisIndex = 0;     // 1-based count of hypotheses consumed
    double windowBestError = 0;  // pre-LM mean inlier error of the window best
    double postLMError = 0;      // GT error when GT provided, else inlier error
    double wallMs = 0.0;
};

struct RansacReport {
    std::vector<Checkpoint> checkpoints;
    int lmCount = 0;
    int precomputeCostIters = 35;  // barcode offline phase, in hypothesis-equivalents
};

/// Inlier count and mean symmetric epipolar distance of the touch-point
/// correspondences of candidates with correlation >= minCorrelation.
/// No inliers gives (0, infinity).
std::pair<int, double> score_hypothesis(const Fundamental& f, const MatchTable& table,
                                        double thresholdPx, double minCorrelation = 0.9);

/// RANSAC over 3-candidate triples (distinct frames) from the filtered
/// match table; every checkpointInterval hypotheses the window best is
/// LM-refined and recorded. Ground truth, when given, is used only for
/// the reported checkpoint errors, never for selection.
/// Deterministic in (seed, inputs): per-hypothesis RNG streams.
std::pair<Fundamental, RansacReport> ransac_fundamental(
    const MatchTable& table, const RansacConfig& cfg,
    const std::vector<PointPair>* groundTruth = nullptr);

/// Sinha-style baseline: per hypothesis, two random tangent pairs in
/// one frame hypothesize the epipoles, the third pair is drawn from the
/// tangents through those epipoles in another frame. Epipoles inside
/// (or at infinity of) the second frame's hull discard the hypothesis.
/// Verification shares the match-table point set with the main method.
std::pair<Fundamental, RansacReport> sinha_baseline(
    const std::vector<int>& framePairs, const LineBank& bankA, const LineBank& bankB,
    const MatchTable& table, const RansacConfig& cfg,
    const std::vector<PointPair>* groundTruth = nullptr);

/// CSV: hypothesis_index, window_best_error, post_lm_error, lm_count, wall_ms.
void ransac_report_csv(const RansacReport& report, std::ostream& out);

}  // namespace mbcal
