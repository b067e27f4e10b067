#pragma once

#include <cmath>
#include <random>

#include "mbcal/geometry.hpp"

namespace mbcal::testing {

struct Rig {
    Mat34 pA, pB;
};

inline Mat3 look_at_rotation(const Vec3& center, const Vec3& target, const Vec3& upHint = Vec3(0, 1, 0)) {
    const Vec3 z = (target - center).normalized();
    Vec3 x = upHint.cross(z);
    if (x.norm() < 1e-8) x = Vec3(1, 0, 0).cross(z);
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.row(0) = x.transpose();
    r.row(1) = y.transpose();
    r.row(2) = z.transpose();
    return r;
}

inline Mat34 make_camera(const Vec3& center, const Vec3& target, double focal, double cx, double cy) {
    Mat3 k;
    k << focal, 0, cx, 0, focal, cy, 0, 0, 1;
    const Mat3 r = look_at_rotation(center, target);
    Mat34 p;
    p.leftCols<3>() = k * r;
    p.col(3) = -k * r * center;
    return p;
}

/// Two cameras on a circle around the origin at random azimuths.
inline Rig random_rig(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
    std::uniform_real_distribution<double> sep(0.5, 2.6);
    std::uniform_real_distribution<double> rad(3.0, 8.0);
    std::uniform_real_distribution<double> height(-1.0, 1.0);
    const double a0 = angle(rng), da = sep(rng), r = rad(rng);
    const Vec3 cA(r * std::cos(a0), height(rng), r * std::sin(a0));
    const Vec3 cB(r * std::cos(a0 + da), height(rng), r * std::sin(a0 + da));
    Rig rig;
    rig.pA = make_camera(cA, Vec3::Zero(), 600.0, 320.0, 240.0);
    rig.pB = make_camera(cB, Vec3::Zero(), 600.0, 320.0, 240.0);
    return rig;
}

/// Exact epipolar line pairs of f through random image-A points.
inline std::array<LinePair, 3> exact_line_triple(const Fundamental& f, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> px(0.0, 640.0), py(0.0, 480.0);
    std::array<LinePair, 3> pairs;
    for (auto& p : pairs) {
        while (true) {
            const Vec3 x(px(rng), py(rng), 1.0);
            const Vec3 l = f.e.v.cross(x);
            const Vec3 lp = f.m * x;
            if (l.norm() < 1e-6 || lp.norm() < 1e-6) continue;
            p.l = HomogLine(l);
            p.lPrime = HomogLine(lp);
            bool dup = false;
            for (const auto& q : pairs)
                if (&q != &p && q.l.valid() && same_up_to_scale(q.l.v, p.l.v, 1e-6)) dup = true;
            if (!dup) break;
        }
    }
    return pairs;
}

}  // namespace mbcal::testing
