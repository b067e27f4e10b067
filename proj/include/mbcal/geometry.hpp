#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

#include "mbcal/errors.hpp"

namespace mbcal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

/// Homogeneous image point (x, y, w), pixel units when w = 1.
struct HomogPoint {
    Vec3 v{0, 0, 1};

    HomogPoint() = default;
    explicit HomogPoint(Vec3 coords) : v(std::move(coords)) {}
    HomogPoint(double x, double y, double w) : v(x, y, w) {}
    static HomogPoint pixel(double x, double y) { return {x, y, 1.0}; }

    bool finite() const { return std::abs(v.z()) > 1e-12 * v.head<2>().norm(); }
    Vec2 dehomog() const { return v.head<2>() / v.z(); }
};

/// Line (a, b, c) with point incidence a*x + b*y + c*w = 0.
struct HomogLine {
    Vec3 v{0, 0, 0};

    HomogLine() = default;
    explicit HomogLine(Vec3 coeffs) : v(std::move(coeffs)) {}
    HomogLine(double a, double b, double c) : v(a, b, c) {}

    bool valid() const { return v.head<2>().norm() > 0 || std::abs(v.z()) > 0; }
    bool finite() const { return v.head<2>().norm() > 1e-12 * std::abs(v.z()); }
};

/// Scale-invariant comparison of homogeneous 3-vectors.
bool same_up_to_scale(const Vec3& a, const Vec3& b, double tol = 1e-9);

/// Euclidean distance from a finite point to a finite line, in pixels.
double point_line_distance(const HomogPoint& p, const HomogLine& l);

/// Skew-symmetric matrix [v]x so that [v]x * w = v.cross(w).
Mat3 cross_matrix(const Vec3& v);

/// Unit Frobenius norm, first entry of absolute value > 1e-12 made
/// positive (row-major scan). Exact fixed point under repetition.
Mat3 canonicalize(Mat3 f);

/// Rank-2 3x3 matrix with its epipoles, canonical scale and sign.
struct Fundamental {
    Mat3 m = Mat3::Zero();
    HomogPoint e;       // right null vector: m * e = 0
    HomogPoint ePrime;  // left null vector: m^T * ePrime = 0
};

/// Enforces rank 2 (smallest singular value truncated), canonicalizes,
/// and extracts both epipoles.
Fundamental make_fundamental(const Mat3& raw);

struct LinePair {
    HomogLine l;       // image A
    HomogLine lPrime;  // image B
};

struct PointPair {
    HomogPoint x;       // image A
    HomogPoint xPrime;  // image B
};

/// F such that (pB*X)^T * F * (pA*X) = 0 for every 3-D point X.
/// Throws DegenerateCameras when the camera centers coincide.
Fundamental fundamental_from_cameras(const Mat34& pA, const Mat34& pB);

/// Mean of the two point-to-line distances d(x', F x) and d(x, F^T x').
double symmetric_epipolar_distance(const Fundamental& f, const PointPair& pair);

struct EpipoleFit {
    HomogPoint point;
    std::vector<double> residuals;  // per-line algebraic residual, unit-normalized
};

/// Least-squares common intersection of >= 2 lines (smallest right
/// singular vector of the stacked unit-normalized coefficients).
/// Throws IllConditioned when the pencil is ambiguous.
EpipoleFit epipole_from_lines(const std::vector<HomogLine>& lines);

struct LinePairFit {
    Fundamental f;
    /// Worst angle (radians) between the line-homography image of l_i
    /// and l_i'. Exact inputs give ~0; an inconsistent pairing is
    /// flagged by a large value rather than an exception.
    double transferAngle = 0.0;
};

/// Fundamental matrix from 3 corresponding epipolar line pairs:
/// epipoles from each concurrent triple, pencils parameterized on a
/// reference line, a 1-D projective map fitted from the 3 parameter
/// correspondences and lifted to a line map A, then F = A * [e]x.
/// imageSize anchors the reference-line chart at pixel scale.
LinePairFit fundamental_from_line_pairs(const std::array<LinePair, 3>& pairs,
                                        const Vec2& imageSize = Vec2(640, 480));

/// Reference line for pencil parameterization: through the two image
/// corners farthest from the epipole, offset when it would pass
/// through it.
HomogLine pencil_reference_line(const HomogPoint& e, const Vec2& imageSize);

/// Least-squares fit of F from known epipoles and >= 3 corresponding
/// pencil lines (1-D projective map on the reference-line chart,
/// lifted to a line map A, F = A * [e]x).
LinePairFit fundamental_from_pencils(const HomogPoint& e, const HomogPoint& ePrime,
                                     const std::vector<LinePair>& pairs,
                                     const Vec2& imageSize = Vec2(640, 480));

/// Distance from the epipole to a line; for an infinite epipole the
/// angular incidence residual is used instead.
double epipole_line_residual(const HomogPoint& e, const HomogLine& l);

// --- serialization ---

/// JSON with 9 row-major floats plus both epipoles.
std::string fundamental_to_json(const Fundamental& f);
Fundamental fundamental_from_json(const std::string& json);
/// Accepts the text form "F = a b c / d e f / g h i".
Fundamental fundamental_from_text(const std::string& text);

}  // namespace mbcal
