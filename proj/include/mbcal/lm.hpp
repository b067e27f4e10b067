#pragma once

#include <array>
#include <vector>

#include "mbcal/geometry.hpp"

namespace mbcal {

struct LmResult {
    Fundamental f;
    bool converged = false;
    int iterations = 0;
    double initialError = 0.0;  // RMS of the symmetric epipolar residuals
    double finalError = 0.0;
};

/// Levenberg-Marquardt minimization of the sum of squared symmetric
/// epipolar residuals over a rank-2 parameterization: both epipoles in
/// spherical coordinates plus the 2x2 pencil homography (8 raw
/// parameters, 7 dof after the scale gauge). Never increases the
/// objective; iteration cap 100, gradient tolerance 1e-10.
/// Throws InsufficientPoints for < 7 pairs.
LmResult lm_refine(const Fundamental& f, const std::vector<PointPair>& pairs);

namespace detail {

using Vec8 = Eigen::Matrix<double, 8, 1>;

/// Frozen chart data: the anchor vectors that define the tangent bases
/// at the two epipoles. Fixed when a state is packed.
struct LmChart {
    Vec3 anchorA = Vec3::UnitX();
    Vec3 anchorB = Vec3::UnitX();
};

/// (theta, phi, theta', phi', h11, h12, h21, h22) from a Fundamental,
/// choosing anchors least aligned with the epipoles.
Vec8 lm_pack(const Fundamental& f, LmChart& chart);

/// F = V * H * U^T for the bases induced by the chart. Unit-scale-free.
Mat3 lm_unpack(const Vec8& p, const LmChart& chart);

/// F plus its partial derivatives with respect to the 8 parameters.
void lm_matrices(const Vec8& p, const LmChart& chart, Mat3& f, std::array<Mat3, 8>& df);

/// Two residuals per pair: the algebraic epipolar error divided by the
/// line-gradient norm in each image (signed point-to-line distances).
/// When jac is non-null it receives the analytic (2n)x8 Jacobian.
void lm_residuals(const Vec8& p, const LmChart& chart, const std::vector<PointPair>& pairs,
                  Eigen::VectorXd& r, Eigen::MatrixXd* jac);

}  // namespace detail

}  // namespace mbcal
