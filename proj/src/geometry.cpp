#include "mbcal/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace mbcal {

bool same_up_to_scale(const Vec3& a, const Vec3& b, double tol) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0 || nb == 0) return na == nb;
    return (a / na).cross(b / nb).norm() <= tol && std::abs(std::abs(a.dot(b)) / (na * nb) - 1.0) <= tol;
}

double point_line_distance(const HomogPoint& p, const HomogLine& l) {
    const double ab = l.v.head<2>().norm();
    if (ab <= 1e-12 * std::abs(l.v.z()))
        throw DegenerateLine("point_line_distance: line at infinity");
    if (!p.finite())
        throw DegenerateLine("point_line_distance: point at infinity");
    return std::abs(l.v.dot(p.v)) / (ab * std::abs(p.v.z()));
}

Mat3 cross_matrix(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
        -v.y(), v.x(), 0;
    return m;
}

Mat3 canonicalize(Mat3 f) {
    const double n0 = f.norm();
    if (n0 == 0) throw Error("canonicalize: zero matrix");
    // Iterate the normalization to an exact floating-point fixed point.
    for (int it = 0; it < 8; ++it) {
        const double n = f.norm();
        Mat3 g = f / n;
        if (g == f) break;
        f = g;
    }
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            if (std::abs(f(r, c)) > 1e-12) {
                if (f(r, c) < 0) f = -f;
                return f;
            }
        }
    return f;
}

Fundamental make_fundamental(const Mat3& raw) {
    Eigen::JacobiSVD<Mat3> svd(raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 s = svd.singularValues();
    if (s(1) <= 1e-15 * s(0))
        throw Error("make_fundamental: matrix rank < 2");
    s(2) = 0.0;  // rank-2 enforcement
    Fundamental f;
    f.m = canonicalize(svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose());
    // Null vectors of the canonical matrix.
    Eigen::JacobiSVD<Mat3> svd2(f.m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    f.e = HomogPoint(svd2.matrixV().col(2));
    f.ePrime = HomogPoint(svd2.matrixU().col(2));
    return f;
}

Fundamental fundamental_from_cameras(const Mat34& pA, const Mat34& pB) {
    Eigen::JacobiSVD<Mat34> svdA(pA, Eigen::ComputeFullV);
    Eigen::JacobiSVD<Mat34> svdB(pB, Eigen::ComputeFullV);
    if (svdA.singularValues()(2) <= 1e-12 * svdA.singularValues()(0) ||
        svdB.singularValues()(2) <= 1e-12 * svdB.singularValues()(0))
        throw DegenerateCameras("fundamental_from_cameras: projection matrix rank < 3");
    const Eigen::Vector4d centerA = svdA.matrixV().col(3);
    const Vec3 ePrime = pB * centerA;
    if (ePrime.norm() <= 1e-9 * pB.norm() * centerA.norm())
        throw DegenerateCameras("fundamental_from_cameras: coincident camera centers");
    const Eigen::Matrix<double, 4, 3> pinvA =
        pA.completeOrthogonalDecomposition().pseudoInverse();
    return make_fundamental(cross_matrix(ePrime) * (pB * pinvA));
}

double symmetric_epipolar_distance(const Fundamental& f, const PointPair& pair) {
    const HomogLine lB(f.m * pair.x.v);
    const HomogLine lA(f.m.transpose() * pair.xPrime.v);
    const double d1 = point_line_distance(pair.xPrime, lB);
    const double d2 = point_line_distance(pair.x, lA);
    return 0.5 * (d1 + d2);
}

EpipoleFit epipole_from_lines(const std::vector<HomogLine>& lines) {
    if (lines.size() < 2)
        throw Error("epipole_from_lines: need >= 2 lines");
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(lines.size()), 3);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const Vec3& l = lines[static_cast<size_t>(i)].v;
        const double n = l.norm();
        if (n == 0) throw Error("epipole_from_lines: zero line");
        rows.row(i) = l.transpose() / n;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const Eigen::Index k = s.size();
    const double s1 = s(k - 2), s0 = s(k - 1);
    if (s1 <= 1e-12 * s(0) || (s1 - s0) / s1 < 1e-12)
        throw IllConditioned("epipole_from_lines: pencil ambiguous");
    EpipoleFit fit;
    fit.point = HomogPoint(svd.matrixV().col(2));
    fit.residuals.reserve(lines.size());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        fit.residuals.push_back(std::abs(rows.row(i).dot(fit.point.v.transpose())) / fit.point.v.norm());
    return fit;
}

double epipole_line_residual(const HomogPoint& e, const HomogLine& l) {
    if (e.finite() && l.finite())
        return point_line_distance(e, l);
    return std::abs(l.v.normalized().dot(e.v.normalized()));
}

HomogLine pencil_reference_line(const HomogPoint& e, const Vec2& imageSize) {
    const double w = imageSize.x(), h = imageSize.y();
    const std::array<Vec2, 4> corners{Vec2(0, 0), Vec2(w, 0), Vec2(0, h), Vec2(w, h)};
    const double diag = std::hypot(w, h);

    Vec2 c0 = corners[0], c1 = corners[3];
    if (e.finite()) {
        const Vec2 ep = e.dehomog();
        // Two farthest corners (distinct), by decreasing distance from e.
        std::array<int, 4> order{0, 1, 2, 3};
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return (corners[size_t(a)] - ep).norm() > (corners[size_t(b)] - ep).norm();
        });
        c0 = corners[size_t(order[0])];
        c1 = corners[size_t(order[1])];
    }
    Vec3 r = Vec3(c0.x(), c0.y(), 1).cross(Vec3(c1.x(), c1.y(), 1));
    // Offset along the normal until the line clears the epipole.
    const Vec2 n = r.head<2>().normalized();
    for (int k = 0; k < 64 && epipole_line_residual(e, HomogLine(r)) < 0.02 * diag; ++k)
        r.z() -= 0.05 * diag * r.head<2>().norm();
    (void)n;
    return HomogLine(r / r.norm());
}

namespace {

// Chart matrix M for the pencil through e: lines through e are M*t for
// t in R^2, with t the coordinates of the line's intersection with the
// reference line in the basis (p0, p1) of points on it.
Eigen::Matrix<double, 3, 2> pencil_chart(const HomogPoint& e, const HomogLine& ref) {
    const Vec3 r = ref.v;
    Vec3 k = Vec3::UnitX();
    if (std::abs(r.x()) >= std::abs(r.y()) && std::abs(r.x()) >= std::abs(r.z()))
        k = Vec3::UnitY();
    const Vec3 p0 = r.cross(k).normalized();
    const Vec3 p1 = r.cross(p0).normalized();
    Eigen::Matrix<double, 3, 2> p;
    p << p0, p1;
    return cross_matrix(e.v.normalized()) * p;
}

}  // namespace

LinePairFit fundamental_from_pencils(const HomogPoint& e, const HomogPoint& ePrime,
                                     const std::vector<LinePair>& pairs,
                                     const Vec2& imageSize) {
    if (pairs.size() < 3)
        throw Error("fundamental_from_pencils: need >= 3 line pairs");
    const HomogLine refA = pencil_reference_line(e, imageSize);
    const HomogLine refB = pencil_reference_line(ePrime, imageSize);
    const Eigen::Matrix<double, 3, 2> mA = pencil_chart(e, refA);
    const Eigen::Matrix<double, 3, 2> mB = pencil_chart(ePrime, refB);

    // 1-D projective map between the pencil charts, one equation per pair.
    Eigen::MatrixXd rowsH(static_cast<Eigen::Index>(pairs.size()), 4);
    for (Eigen::Index i = 0; i < rowsH.rows(); ++i) {
        const auto& p = pairs[static_cast<size_t>(i)];
        const Vec2 t = mA.colPivHouseholderQr().solve(p.l.v.normalized());
        const Vec2 tp = mB.colPivHouseholderQr().solve(p.lPrime.v.normalized());
        rowsH.row(i) << tp.y() * t.x(), tp.y() * t.y(), -tp.x() * t.x(), -tp.x() * t.y();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svdH(rowsH, Eigen::ComputeFullV);
    const Eigen::Vector4d h = svdH.matrixV().col(3);
    Eigen::Matrix2d H;
    H << h(0), h(1), h(2), h(3);

    // Lift to a 3x3 line map on the pencil subspace.
    const Eigen::Matrix<double, 2, 3> pinvMA =
        (mA.transpose() * mA).inverse() * mA.transpose();
    const Mat3 A = mB * H * pinvMA;

    LinePairFit fit;
    fit.f = make_fundamental(A * cross_matrix(e.v.normalized()));
    for (const auto& p : pairs) {
        // Parallelism of the transferred line and l' as 2-D directions.
        const Vec2 u = (A * p.l.v).head<2>().normalized();
        const Vec2 w = p.lPrime.v.head<2>().normalized();
        const double cross = u.x() * w.y() - u.y() * w.x();
        const double ang = std::atan2(std::abs(cross), std::abs(u.dot(w)));
        fit.transferAngle = std::max(fit.transferAngle, ang);
    }
    return fit;
}

LinePairFit fundamental_from_line_pairs(const std::array<LinePair, 3>& pairs,
                                        const Vec2& imageSize) {
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            if (same_up_to_scale(pairs[i].l.v, pairs[j].l.v, 1e-9) ||
                same_up_to_scale(pairs[i].lPrime.v, pairs[j].lPrime.v, 1e-9))
                throw DegeneratePencil("fundamental_from_line_pairs: coincident input lines");
        }

    std::vector<HomogLine> linesA, linesB;
    for (const auto& p : pairs) {
        linesA.push_back(p.l);
        linesB.push_back(p.lPrime);
    }
    const EpipoleFit eA = epipole_from_lines(linesA);
    const EpipoleFit eB = epipole_from_lines(linesB);
    for (const auto& l : linesA)
        if (epipole_line_residual(eA.point, l) >= 1.0)
            throw NotConcurrent("fundamental_from_line_pairs: image-A lines not concurrent");
    for (const auto& l : linesB)
        if (epipole_line_residual(eB.point, l) >= 1.0)
            throw NotConcurrent("fundamental_from_line_pairs: image-B lines not concurrent");

    return fundamental_from_pencils(eA.point, eB.point,
                                    {pairs[0], pairs[1], pairs[2]}, imageSize);
}

// --- serialization ---

std::string fundamental_to_json(const Fundamental& f) {
    nlohmann::json j;
    std::vector<double> m(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m[static_cast<size_t>(r * 3 + c)] = f.m(r, c);
    j["f"] = m;
    j["e"] = {f.e.v.x(), f.e.v.y(), f.e.v.z()};
    j["e_prime"] = {f.ePrime.v.x(), f.ePrime.v.y(), f.ePrime.v.z()};
    return j.dump(2);
}

Fundamental fundamental_from_json(const std::string& json) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("fundamental_from_json: ") + e.what());
    }
    if (!j.contains("f") || !j["f"].is_array() || j["f"].size() != 9)
        throw FormatError("fundamental_from_json: expected 9 row-major floats under \"f\"");
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = j["f"][static_cast<size_t>(r * 3 + c)].get<double>();
    return make_fundamental(m);
}

Fundamental fundamental_from_text(const std::string& text) {
    std::string cleaned;
    for (char ch : text) cleaned += (ch == '/' || ch == '=') ? ' ' : ch;
    std::istringstream in(cleaned);
    std::string tok;
    std::vector<double> vals;
    while (in >> tok) {
        if (tok == "F") continue;
        try {
            vals.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw FormatError("fundamental_from_text: bad token '" + tok + "'");
        }
    }
    if (vals.size() != 9)
        throw FormatError("fundamental_from_text: expected 9 entries");
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = vals[static_cast<size_t>(r * 3 + c)];
    return make_fundamental(m);
}

}  // namespace mbcal
