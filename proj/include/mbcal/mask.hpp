#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mbcal/errors.hpp"

namespace mbcal {

/// Per-frame binary foreground image of a stationary camera.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits;  // row-major, 0 background / 1 foreground
    int frameIndex = 0;

    // Foreground bounding box (inclusive); x0 > x1 when the mask is empty.
    int bboxX0 = 0, bboxY0 = 0, bboxX1 = -1, bboxY1 = -1;

    Mask() = default;
    Mask(int w, int h, int frame = 0)
        : width(w), height(h), bits(static_cast<size_t>(w) * static_cast<size_t>(h), 0), frameIndex(frame) {}

    bool at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool fg) { bits[static_cast<size_t>(y) * width + x] = fg ? 1 : 0; }
    bool empty_foreground() const { return bboxX0 > bboxX1; }
    size_t foreground_count() const;

    /// Recomputes the foreground bounding box; call after editing bits.
    void update_bbox();
};

/// Parses a binary PGM (P5, maxval <= 255); pixels >= 128 are foreground.
/// Throws FormatError with the byte offset of the problem.
Mask load_mask(std::istream& in, int frameIndex = 0);
Mask load_mask_file(const std::string& path, int frameIndex = 0);

/// Writes a binary PGM with foreground 255, background 0.
void save_mask(const Mask& mask, std::ostream& out);
void save_mask_file(const Mask& mask, const std::string& path);

}  // namespace mbcal
