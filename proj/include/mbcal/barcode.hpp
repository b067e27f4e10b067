#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mbcal/geometry.hpp"
#include "mbcal/mask.hpp"
#include "mbcal/silhouette.hpp"

namespace mbcal {

/// Binary temporal sequence of a line over all frames, with the
/// normalization statistics used for Pearson correlation.
struct Barcode {
    std::vector<uint8_t> bits;
    double mean = 0.0;
    double stdev = 0.0;

    bool degenerate() const { return stdev == 0.0; }
    size_t size() const { return bits.size(); }
};

struct CorrelationResult {
    double value = 0.0;
    bool degenerate = false;
};

/// Pearson correlations between two line sets; degenerate barcodes give
/// zero rows/columns (flagged).
struct AffinityMatrix {
    Eigen::MatrixXd values;
    std::vector<uint8_t> rowDegenerate;
    std::vector<uint8_t> colDegenerate;
};

/// True iff some foreground pixel center lies within 1/2 px of the line
/// (perpendicular distance, pixel centers only, inside image bounds).
bool line_intersects_mask(const HomogLine& line, const Mask& mask);

/// bits[t] = line_intersects_mask(line, masks[t]).
/// Throws DimensionMismatch on unequal mask dimensions.
Barcode motion_barcode(const HomogLine& line, const std::vector<Mask>& masks);

Barcode barcode_from_bits(std::vector<uint8_t> bits);

/// Pearson correlation in [-1, 1]; 0 with the degenerate flag when
/// either sequence is constant. Throws LengthMismatch.
CorrelationResult barcode_correlation(const Barcode& a, const Barcode& b);

/// All pairwise correlations, computed as a product of mean-centered,
/// stdev-scaled barcode matrices.
AffinityMatrix affinity_matrix(const std::vector<Barcode>& rows, const std::vector<Barcode>& cols);

/// Candidate lines of one frame together with their barcodes over the
/// whole video.
struct FrameLines {
    std::vector<CandidateLine> lines;
    std::vector<Barcode> barcodes;
    ConvexHull hull;  // empty for degenerate frames
};

/// Per-frame candidate lines + barcodes for a camera (the offline
/// phase). Frames with degenerate hulls get no lines but still count in
/// every barcode's length.
using LineBank = std::vector<FrameLines>;

LineBank compute_line_bank(const std::vector<Mask>& masks, double angleStepDeg);

/// Versioned binary cache of a LineBank.
void save_line_bank(const LineBank& bank, double angleStepDeg, std::ostream& out);
void save_line_bank_file(const LineBank& bank, double angleStepDeg, const std::string& path);
LineBank load_line_bank(std::istream& in, double* angleStepDeg = nullptr);
LineBank load_line_bank_file(const std::string& path, double* angleStepDeg = nullptr);

/// "0"/"1" string form of a barcode, for inspection dumps.
std::string barcode_to_string(const Barcode& b);

}  // namespace mbcal
