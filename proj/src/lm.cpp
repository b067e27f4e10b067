#include "mbcal/lm.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace mbcal {

namespace detail {

namespace {

Vec3 spherical(double theta, double phi) {
    return {std::cos(theta) * std::sin(phi), std::sin(theta) * std::sin(phi), std::cos(phi)};
}

// d(spherical)/d(theta), d(spherical)/d(phi)
void spherical_derivs(double theta, double phi, Vec3& dTheta, Vec3& dPhi) {
    dTheta = Vec3(-std::sin(theta) * std::sin(phi), std::cos(theta) * std::sin(phi), 0.0);
    dPhi = Vec3(std::cos(theta) * std::cos(phi), std::sin(theta) * std::cos(phi), -std::sin(phi));
}

// orthonormal basis {u1, u2} of the plane orthogonal to the unit vector e
void tangent_basis(const Vec3& e, const Vec3& anchor, Vec3& u1, Vec3& u2) {
    const Vec3 w = e.cross(anchor);
    u1 = w.normalized();
    u2 = e.cross(u1);
}

// derivative of the basis along a perturbation de of e
void tangent_basis_derivs(const Vec3& e, const Vec3& anchor, const Vec3& u1, const Vec3& de,
                          Vec3& du1, Vec3& du2) {
    const Vec3 w = e.cross(anchor);
    const Vec3 dw = de.cross(anchor);
    du1 = (dw - u1 * u1.dot(dw)) / w.norm();
    du2 = de.cross(u1) + e.cross(du1);
}

Vec3 pick_anchor(const Vec3& e) {
    // coordinate axis least aligned with e keeps the cross product large
    int k = 0;
    e.cwiseAbs().minCoeff(&k);
    return Vec3::Unit(k);
}

}  // namespace

Vec8 lm_pack(const Fundamental& f, LmChart& chart) {
    Vec3 e = f.e.v.normalized();
    Vec3 ep = f.ePrime.v.normalized();
    chart.anchorA = pick_anchor(e);
    chart.anchorB = pick_anchor(ep);

    Vec8 p;
    p[0] = std::atan2(e.y(), e.x());
    p[1] = std::acos(std::clamp(e.z(), -1.0, 1.0));
    p[2] = std::atan2(ep.y(), ep.x());
    p[3] = std::acos(std::clamp(ep.z(), -1.0, 1.0));

    Vec3 u1, u2, v1, v2;
    tangent_basis(spherical(p[0], p[1]), chart.anchorA, u1, u2);
    tangent_basis(spherical(p[2], p[3]), chart.anchorB, v1, v2);
    // H = V^T F U reproduces F exactly because e, e' are the null vectors
    p[4] = v1.dot(f.m * u1);
    p[5] = v1.dot(f.m * u2);
    p[6] = v2.dot(f.m * u1);
    p[7] = v2.dot(f.m * u2);
    const double n = p.tail<4>().norm();
    if (n > 0) p.tail<4>() /= n;
    return p;
}

Mat3 lm_unpack(const Vec8& p, const LmChart& chart) {
    Vec3 u1, u2, v1, v2;
    tangent_basis(spherical(p[0], p[1]), chart.anchorA, u1, u2);
    tangent_basis(spherical(p[2], p[3]), chart.anchorB, v1, v2);
    return p[4] * v1 * u1.transpose() + p[5] * v1 * u2.transpose() +
           p[6] * v2 * u1.transpose() + p[7] * v2 * u2.transpose();
}

void lm_matrices(const Vec8& p, const LmChart& chart, Mat3& f, std::array<Mat3, 8>& df) {
    const Vec3 e = spherical(p[0], p[1]);
    const Vec3 ep = spherical(p[2], p[3]);
    Vec3 u1, u2, v1, v2;
    tangent_basis(e, chart.anchorA, u1, u2);
    tangent_basis(ep, chart.anchorB, v1, v2);
    f = p[4] * v1 * u1.transpose() + p[5] * v1 * u2.transpose() + p[6] * v2 * u1.transpose() +
        p[7] * v2 * u2.transpose();

    Vec3 dTheta, dPhi, du1, du2;
    spherical_derivs(p[0], p[1], dTheta, dPhi);
    tangent_basis_derivs(e, chart.anchorA, u1, dTheta, du1, du2);
    df[0] = p[4] * v1 * du1.transpose() + p[5] * v1 * du2.transpose() +
            p[6] * v2 * du1.transpose() + p[7] * v2 * du2.transpose();
    tangent_basis_derivs(e, chart.anchorA, u1, dPhi, du1, du2);
    df[1] = p[4] * v1 * du1.transpose() + p[5] * v1 * du2.transpose() +
            p[6] * v2 * du1.transpose() + p[7] * v2 * du2.transpose();
    spherical_derivs(p[2], p[3], dTheta, dPhi);
    Vec3 dv1, dv2;
    tangent_basis_derivs(ep, chart.anchorB, v1, dTheta, dv1, dv2);
    df[2] = p[4] * dv1 * u1.transpose() + p[5] * dv1 * u2.transpose() +
            p[6] * dv2 * u1.transpose() + p[7] * dv2 * u2.transpose();
    tangent_basis_derivs(ep, chart.anchorB, v1, dPhi, dv1, dv2);
    df[3] = p[4] * dv1 * u1.transpose() + p[5] * dv1 * u2.transpose() +
            p[6] * dv2 * u1.transpose() + p[7] * dv2 * u2.transpose();
    df[4] = v1 * u1.transpose();
    df[5] = v1 * u2.transpose();
    df[6] = v2 * u1.transpose();
    df[7] = v2 * u2.transpose();
}

void lm_residuals(const Vec8& p, const LmChart& chart, const std::vector<PointPair>& pairs,
                  Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    Mat3 f;
    std::array<Mat3, 8> df;
    lm_matrices(p, chart, f, df);

    const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
    r.resize(2 * n);
    if (jac) jac->resize(2 * n, 8);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Vec3 x(pairs[static_cast<size_t>(k)].x.dehomog().homogeneous());
        const Vec3 xp(pairs[static_cast<size_t>(k)].xPrime.dehomog().homogeneous());
        const Vec3 fx = f * x;
        const Vec3 ftxp = f.transpose() * xp;
        const double s = xp.dot(fx);
        const double na = fx.head<2>().norm();
        const double nb = ftxp.head<2>().norm();
        r[2 * k] = s / na;
        r[2 * k + 1] = s / nb;
        if (!jac) continue;
        for (int m = 0; m < 8; ++m) {
            const Vec3 dfx = df[static_cast<size_t>(m)] * x;
            const Vec3 dftxp = df[static_cast<size_t>(m)].transpose() * xp;
            const double ds = xp.dot(dfx);
            (*jac)(2 * k, m) = ds / na - s * fx.head<2>().dot(dfx.head<2>()) / (na * na * na);
            (*jac)(2 * k + 1, m) =
                ds / nb - s * ftxp.head<2>().dot(dftxp.head<2>()) / (nb * nb * nb);
        }
    }
}

}  // namespace detail

LmResult lm_refine(const Fundamental& f, const std::vector<PointPair>& pairs) {
    if (pairs.size() < 7) throw InsufficientPoints("lm_refine: need >= 7 point pairs");
    using detail::Vec8;

    detail::LmChart chart;
    Vec8 p = detail::lm_pack(f, chart);

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    detail::lm_residuals(p, chart, pairs, r, &jac);
    double cost = r.squaredNorm();

    LmResult out;
    out.initialError = std::sqrt(cost / static_cast<double>(r.size()));
    Vec8 best = p;
    double bestCost = cost;

    double lambda = 1e-3;
    bool converged = false;
    int iter = 0;
    for (; iter < 100; ++iter) {
        const Eigen::Matrix<double, 8, 8> jtj = jac.transpose() * jac;
        const Vec8 g = jac.transpose() * r;
        if (g.cwiseAbs().maxCoeff() < 1e-10) {
            converged = true;
            break;
        }
        Eigen::Matrix<double, 8, 8> a = jtj;
        a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
        const Vec8 step = a.ldlt().solve(-g);
        const Vec8 trial = p + step;
        Eigen::VectorXd rt;
        detail::lm_residuals(trial, chart, pairs, rt, nullptr);
        const double trialCost = rt.squaredNorm();
        if (trialCost < cost) {
            p = trial;
            cost = trialCost;
            lambda = std::max(lambda / 3.0, 1e-12);
            detail::lm_residuals(p, chart, pairs, r, &jac);
            if (cost < bestCost) {
                bestCost = cost;
                best = p;
            }
            if (std::abs(step.cwiseAbs().maxCoeff()) < 1e-14) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;  // stuck: keep the best iterate
        }
    }

    out.f = make_fundamental(detail::lm_unpack(best, chart));
    out.converged = converged;
    out.iterations = iter;
    out.finalError = std::sqrt(bestCost / static_cast<double>(r.size()));
    return out;
}

}  // namespace mbcal
