#pragma once

#include <iosfwd>
#include <vector>

#include "mbcal/barcode.hpp"

namespace mbcal {

/// Best barcode-matched line pair of one synchronized frame pair.
struct MatchCandidate {
    int frame = 0;
    CandidateLine lineA;
    CandidateLine lineB;
    size_t lineIndexA = 0;
    size_t lineIndexB = 0;
    double correlation = 0.0;
};

/// RANSAC candidate table: one (optionally top-M) candidate per key
/// frame, sorted by correlation descending.
struct MatchTable {
    std::vector<MatchCandidate> candidates;
    std::vector<int> framePairs;
};

/// Greedy farthest-point selection of `count` frame indices over the
/// per-frame feature (hull centroid ⊕ hull area, both cameras
/// concatenated), seeded with the largest joint silhouette area. Frames
/// degenerate in either view are excluded. Throws NotEnoughFrames.
std::vector<int> select_key_frames(const std::vector<Mask>& masksA,
                                   const std::vector<Mask>& masksB, int count);

/// Per key frame, the argmax of the barcode affinity matrix between the
/// two views' candidate lines (ties -> smaller line indices). Frames
/// whose affinities are all degenerate yield no candidate. `topM` > 1
/// emits the M best entries per frame (experimental mode).
MatchTable best_pairs(const std::vector<int>& framePairs, const LineBank& bankA,
                      const LineBank& bankB, int topM = 1);

/// CSV dump: frame, angleA, angleB, correlation, line coordinates.
void match_table_csv(const MatchTable& table, std::ostream& out);

}  // namespace mbcal
