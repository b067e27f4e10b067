#include "mbcal/matcher.hpp"

#include <algorithm>
#include <iostream>
#include <limits>

namespace mbcal {

namespace {

using Feature = Eigen::Matrix<double, 6, 1>;

bool usable_frame(const Mask& m) {
    return !m.empty_foreground() && !convex_hull(m).degenerate();
}

Feature frame_feature(const Mask& a, const Mask& b) {
    const ConvexHull ha = convex_hull(a), hb = convex_hull(b);
    Feature f;
    f << ha.centroid(), ha.area(), hb.centroid(), hb.area();
    return f;
}

}  // namespace

std::vector<int> select_key_frames(const std::vector<Mask>& masksA,
                                   const std::vector<Mask>& masksB, int count) {
    if (masksA.size() != masksB.size())
        throw DimensionMismatch("select_key_frames: sequences differ in length");
    if (count < 3) throw NotEnoughFrames("select_key_frames: count must be >= 3");

    std::vector<int> usable;
    std::vector<Feature> feats;
    for (size_t f = 0; f < masksA.size(); ++f) {
        if (!usable_frame(masksA[f]) || !usable_frame(masksB[f])) continue;
        usable.push_back(static_cast<int>(f));
        feats.push_back(frame_feature(masksA[f], masksB[f]));
    }
    if (static_cast<int>(usable.size()) < count)
        throw NotEnoughFrames("select_key_frames: fewer usable frames than requested");

    bool allEqual = true;
    for (size_t i = 1; i < feats.size() && allEqual; ++i)
        allEqual = (feats[i] - feats[0]).norm() < 1e-12;
    if (allEqual)
        std::cerr << "select_key_frames: warning: silhouettes look static, "
                     "key frames carry no pose diversity\n";

    // seed with the largest joint silhouette area
    size_t seed = 0;
    double bestArea = -1.0;
    for (size_t i = 0; i < feats.size(); ++i) {
        const double area = feats[i][2] + feats[i][5];
        if (area > bestArea) {
            bestArea = area;
            seed = i;
        }
    }

    std::vector<char> taken(usable.size(), 0);
    std::vector<double> minDist(usable.size(), std::numeric_limits<double>::infinity());
    std::vector<int> out;
    size_t pick = seed;
    for (int k = 0; k < count; ++k) {
        taken[pick] = 1;
        out.push_back(usable[pick]);
        for (size_t i = 0; i < usable.size(); ++i)
            if (!taken[i]) minDist[i] = std::min(minDist[i], (feats[i] - feats[pick]).norm());
        if (k + 1 == count) break;
        double best = -1.0;
        size_t next = 0;
        for (size_t i = 0; i < usable.size(); ++i)
            if (!taken[i] && minDist[i] > best) {  // ties -> smaller index
                best = minDist[i];
                next = i;
            }
        pick = next;
    }
    std::sort(out.begin(), out.end());
    return out;
}

MatchTable best_pairs(const std::vector<int>& framePairs, const LineBank& bankA,
                      const LineBank& bankB, int topM) {
    topM = std::clamp(topM, 1, 3);
    MatchTable table;
    table.framePairs = framePairs;
    for (int f : framePairs) {
        if (f < 0 || static_cast<size_t>(f) >= bankA.size() ||
            static_cast<size_t>(f) >= bankB.size())
            throw DimensionMismatch("best_pairs: frame index outside line banks");
        const FrameLines& fa = bankA[static_cast<size_t>(f)];
        const FrameLines& fb = bankB[static_cast<size_t>(f)];
        if (fa.lines.empty() || fb.lines.empty()) continue;

        const AffinityMatrix aff = affinity_matrix(fa.barcodes, fb.barcodes);
        // the M best non-degenerate entries, ties -> smaller (i, j)
        std::vector<std::pair<Eigen::Index, Eigen::Index>> picks;
        for (int m = 0; m < topM; ++m) {
            double best = -std::numeric_limits<double>::infinity();
            std::pair<Eigen::Index, Eigen::Index> at{-1, -1};
            for (Eigen::Index i = 0; i < aff.values.rows(); ++i) {
                if (aff.rowDegenerate[static_cast<size_t>(i)]) continue;
                for (Eigen::Index j = 0; j < aff.values.cols(); ++j) {
                    if (aff.colDegenerate[static_cast<size_t>(j)]) continue;
                    if (std::find(picks.begin(), picks.end(), std::make_pair(i, j)) !=
                        picks.end())
                        continue;
                    if (aff.values(i, j) > best) {
                        best = aff.values(i, j);
                        at = {i, j};
                    }
                }
            }
            if (at.first < 0) break;
            picks.push_back(at);

            MatchCandidate c;
            c.frame = f;
            c.lineIndexA = static_cast<size_t>(at.first);
            c.lineIndexB = static_cast<size_t>(at.second);
            c.lineA = fa.lines[c.lineIndexA];
            c.lineB = fb.lines[c.lineIndexB];
            // store the exact scalar value, not the matrix product
            c.correlation = barcode_correlation(fa.barcodes[c.lineIndexA],
                                                fb.barcodes[c.lineIndexB]).value;
            table.candidates.push_back(c);
        }
    }
    std::stable_sort(table.candidates.begin(), table.candidates.end(),
                     [](const MatchCandidate& a, const MatchCandidate& b) {
                         return a.correlation > b.correlation;
                     });
    return table;
}

void match_table_csv(const MatchTable& table, std::ostream& out) {
    out << "frame,angleA,angleB,correlation,aA,bA,cA,aB,bB,cB\n";
    for (const auto& c : table.candidates) {
        out << c.frame << ',' << c.lineA.normalAngle << ',' << c.lineB.normalAngle << ','
            << c.correlation << ',' << c.lineA.line.v.x() << ',' << c.lineA.line.v.y() << ','
            << c.lineA.line.v.z() << ',' << c.lineB.line.v.x() << ',' << c.lineB.line.v.y()
            << ',' << c.lineB.line.v.z() << '\n';
    }
}

}  // namespace mbcal
