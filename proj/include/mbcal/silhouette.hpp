#pragma once

#include <vector>

#include "mbcal/geometry.hpp"
#include "mbcal/mask.hpp"

namespace mbcal {

/// Strictly convex polygon over pixel centers, counter-clockwise in
/// (x, y) coordinates, starting at the lexicographically smallest vertex.
/// Degenerate silhouettes yield 1 (point) or 2 (segment) vertices.
struct ConvexHull {
    std::vector<Vec2> vertices;

    bool degenerate() const { return vertices.size() < 3; }
    double area() const;
    Vec2 centroid() const;
    /// Max over vertices of the signed distance to the line's outward side.
    bool contains(const Vec2& p, double slack = 0.0) const;
};

/// Pixel on the silhouette boundary that also lies on the hull boundary.
struct CandidatePoint {
    Vec2 pos;
};

/// Supporting line of the hull with its touch vertex and outward-normal
/// angle in degrees, [0, 360).
struct CandidateLine {
    HomogLine line;
    CandidatePoint touch;
    double normalAngle = 0.0;
};

/// Monotone-chain hull of the foreground pixel centers.
/// Throws EmptyMask when there is no foreground.
ConvexHull convex_hull(const Mask& mask);

/// One supporting line per outward-normal angle in {0, step, ..., 360-step}.
/// Ties between extreme vertices go to the lexicographically smaller one.
/// Throws DegenerateHull for hulls with < 3 vertices.
std::vector<CandidateLine> tangent_lines(const ConvexHull& hull, double angleStepDeg);

/// Boundary pixels (4-neighbor background-adjacent, image border counts
/// as background) within 1/2 px of a hull edge.
std::vector<CandidatePoint> candidate_points(const Mask& mask, const ConvexHull& hull);

/// The two tangent lines from an external point to the hull, each with
/// its touch vertex. Empty when the point is inside (or on) the hull.
std::vector<CandidateLine> tangents_from_point(const ConvexHull& hull, const Vec2& p);

}  // namespace mbcal
