#include "mbcal/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mbcal {

double ConvexHull::area() const {
    if (vertices.size() < 3) return 0.0;
    double s = 0.0;
    for (size_t i = 0; i < vertices.size(); ++i) {
        const Vec2& a = vertices[i];
        const Vec2& b = vertices[(i + 1) % vertices.size()];
        s += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * s;
}

Vec2 ConvexHull::centroid() const {
    if (vertices.empty()) return Vec2::Zero();
    if (vertices.size() < 3) {
        Vec2 m = Vec2::Zero();
        for (const auto& v : vertices) m += v;
        return m / static_cast<double>(vertices.size());
    }
    Vec2 c = Vec2::Zero();
    double s = 0.0;
    for (size_t i = 0; i < vertices.size(); ++i) {
        const Vec2& a = vertices[i];
        const Vec2& b = vertices[(i + 1) % vertices.size()];
        const double w = a.x() * b.y() - b.x() * a.y();
        s += w;
        c += w * (a + b);
    }
    return c / (3.0 * s);
}

bool ConvexHull::contains(const Vec2& p, double slack) const {
    if (vertices.size() < 3) return false;
    for (size_t i = 0; i < vertices.size(); ++i) {
        const Vec2& a = vertices[i];
        const Vec2& b = vertices[(i + 1) % vertices.size()];
        const Vec2 e = b - a;
        const double cross = e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x());
        if (cross < -slack * e.norm()) return false;
    }
    return true;
}

namespace {

double cross3(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

}  // namespace

ConvexHull convex_hull(const Mask& mask) {
    if (mask.empty_foreground()) throw EmptyMask("convex_hull: no foreground pixels");
    std::vector<Vec2> pts;
    for (int y = mask.bboxY0; y <= mask.bboxY1; ++y)
        for (int x = mask.bboxX0; x <= mask.bboxX1; ++x)
            if (mask.at(x, y)) pts.emplace_back(x, y);

    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    ConvexHull hull;
    if (pts.size() == 1) {
        hull.vertices = pts;
        return hull;
    }
    const size_t n = pts.size();
    std::vector<Vec2> h(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {  // lower chain
        while (k >= 2 && cross3(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    for (size_t i = n - 1, lo = k + 1; i-- > 0;) {  // upper chain
        while (k >= lo && cross3(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    hull.vertices = std::move(h);
    if (hull.vertices.size() == 2 && hull.vertices[0] == hull.vertices[1])
        hull.vertices.pop_back();
    return hull;
}

std::vector<CandidateLine> tangent_lines(const ConvexHull& hull, double angleStepDeg) {
    if (hull.degenerate()) throw DegenerateHull("tangent_lines: hull has < 3 vertices");
    if (angleStepDeg <= 0 || std::abs(std::remainder(360.0, angleStepDeg)) > 1e-9)
        throw Error("tangent_lines: angle step must divide 360");
    const int count = static_cast<int>(std::lround(360.0 / angleStepDeg));

    std::vector<CandidateLine> out;
    out.reserve(static_cast<size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double deg = k * angleStepDeg;
        const double rad = deg * M_PI / 180.0;
        const Vec2 n(std::cos(rad), std::sin(rad));
        size_t best = 0;
        double bestDot = n.dot(hull.vertices[0]);
        for (size_t i = 1; i < hull.vertices.size(); ++i) {
            const double d = n.dot(hull.vertices[i]);
            const Vec2& v = hull.vertices[i];
            const Vec2& bv = hull.vertices[best];
            if (d > bestDot + 1e-12) {
                best = i;
                bestDot = d;
            } else if (std::abs(d - bestDot) <= 1e-12 &&
                       (v.x() < bv.x() || (v.x() == bv.x() && v.y() < bv.y()))) {
                best = i;  // edge-parallel tie: lexicographically smaller vertex
            }
        }
        CandidateLine cl;
        cl.line = HomogLine(n.x(), n.y(), -bestDot);
        cl.touch.pos = hull.vertices[best];
        cl.normalAngle = deg;
        out.push_back(cl);
    }
    return out;
}

std::vector<CandidatePoint> candidate_points(const Mask& mask, const ConvexHull& hull) {
    if (mask.empty_foreground()) throw EmptyMask("candidate_points: no foreground pixels");
    auto bg = [&](int x, int y) {
        return x < 0 || y < 0 || x >= mask.width || y >= mask.height || !mask.at(x, y);
    };
    auto near_hull_boundary = [&](const Vec2& p) {
        const size_t n = hull.vertices.size();
        if (n == 1) return (p - hull.vertices[0]).norm() <= 0.5;
        double d = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < n; ++i)
            d = std::min(d, point_segment_distance(p, hull.vertices[i], hull.vertices[(i + 1) % n]));
        return d <= 0.5;
    };

    std::vector<CandidatePoint> out;
    for (int y = mask.bboxY0; y <= mask.bboxY1; ++y)
        for (int x = mask.bboxX0; x <= mask.bboxX1; ++x) {
            if (!mask.at(x, y)) continue;
            if (!(bg(x - 1, y) || bg(x + 1, y) || bg(x, y - 1) || bg(x, y + 1))) continue;
            const Vec2 p(x, y);
            if (near_hull_boundary(p)) out.push_back({p});
        }
    return out;
}

std::vector<CandidateLine> tangents_from_point(const ConvexHull& hull, const Vec2& p) {
    if (hull.degenerate()) throw DegenerateHull("tangents_from_point: hull has < 3 vertices");
    if (hull.contains(p, 1e-9)) return {};
    const size_t n = hull.vertices.size();
    const Vec2 inner = hull.centroid();

    std::vector<CandidateLine> out;
    for (size_t i = 0; i < n; ++i) {
        const Vec2& v = hull.vertices[i];
        const Vec2& prev = hull.vertices[(i + n - 1) % n];
        const Vec2& next = hull.vertices[(i + 1) % n];
        const double cp = cross3(p, v, prev);
        const double cn = cross3(p, v, next);
        if ((cp >= 0 && cn >= 0) || (cp <= 0 && cn <= 0)) {
            Vec3 l = Vec3(p.x(), p.y(), 1).cross(Vec3(v.x(), v.y(), 1));
            // orient the normal away from the hull interior
            if (l.head<2>().dot(inner) + l.z() > 0) l = -l;
            CandidateLine cl;
            cl.line = HomogLine(l);
            cl.touch.pos = v;
            double ang = std::atan2(l.y(), l.x()) * 180.0 / M_PI;
            if (ang < 0) ang += 360.0;
            cl.normalAngle = ang;
            out.push_back(cl);
            if (out.size() == 2) break;
        }
    }
    return out;
}

}  // namespace mbcal
