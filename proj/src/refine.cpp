#include "mbcal/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace mbcal {

BarcodeProvider make_barcode_provider(const std::vector<Mask>& masksA,
                                      const std::vector<Mask>& masksB) {
    return [&masksA, &masksB](const HomogLine& line, int camera) {
        return motion_barcode(line, camera == 0 ? masksA : masksB);
    };
}

namespace {

// x_hat' on the line l, anchored at the orthogonal projection of the
// measured point xp and offset by t along the line direction
Vec2 corrected_point(const Vec3& l, const Vec2& xp, double t) {
    const Vec2 n = l.head<2>();
    const double n2 = n.squaredNorm();
    const double s = n.dot(xp) + l.z();
    const Vec2 d(-l.y() / std::sqrt(n2), l.x() / std::sqrt(n2));
    return xp - (s / n2) * n + t * d;
}

// 2x3 derivative of corrected_point with respect to the line coefficients
Eigen::Matrix<double, 2, 3> corrected_point_dl(const Vec3& l, const Vec2& xp, double t) {
    const double a = l.x(), b = l.y();
    const double n2 = a * a + b * b;
    const double rn = std::sqrt(n2);
    const double s = a * xp.x() + b * xp.y() + l.z();
    const Vec2 n(a, b);
    const Vec2 dperp(-b, a);

    Eigen::Matrix<double, 2, 3> g;
    g.col(0) = -((xp.x() * n2 - 2 * a * s) / (n2 * n2)) * n - (s / n2) * Vec2(1, 0) +
               t * (Vec2(0, 1) / rn - (a / (n2 * rn)) * dperp);
    g.col(1) = -((xp.y() * n2 - 2 * b * s) / (n2 * n2)) * n - (s / n2) * Vec2(0, 1) +
               t * (Vec2(-1, 0) / rn - (b / (n2 * rn)) * dperp);
    g.col(2) = -(1.0 / n2) * n;
    return g;
}

double epipole_shift_px(const HomogPoint& a, const HomogPoint& b) {
    if (a.finite() && b.finite()) return (a.dehomog() - b.dehomog()).norm();
    const Vec3 ua = a.v.normalized(), ub = b.v.normalized();
    const double chordal = std::min((ua - ub).norm(), (ua + ub).norm());
    return chordal < 1e-12 ? 0.0 : 1e9 * chordal;  // infinite epipoles: angular proxy
}

}  // namespace

namespace detail {

void StepOneProblem::residuals(const Eigen::VectorXd& params, Eigen::VectorXd& r,
                               Eigen::MatrixXd* jac) const {
    const size_t n = xm.size();
    const int nf = 8;
    Mat3 f;
    std::array<Mat3, 8> df;
    lm_matrices(params.head<8>(), chart, f, df);
    r.resize(4 * static_cast<Eigen::Index>(n));
    if (jac) jac->setZero(4 * static_cast<Eigen::Index>(n), paramCount());
    for (size_t i = 0; i < n; ++i) {
        const double du = params[nf + 3 * static_cast<int>(i)];
        const double dv = params[nf + 3 * static_cast<int>(i) + 1];
        const double t = params[nf + 3 * static_cast<int>(i) + 2];
        const Vec3 xh(xm[i].x() + du, xm[i].y() + dv, 1.0);
        const Vec3 l = f * xh;
        const Vec2 xph = corrected_point(l, xpm[i], t);
        const Eigen::Index row = 4 * static_cast<Eigen::Index>(i);
        r[row] = du;
        r[row + 1] = dv;
        r.segment<2>(row + 2) = xph - xpm[i];
        if (!jac) continue;
        (*jac)(row, nf + 3 * static_cast<int>(i)) = 1.0;
        (*jac)(row + 1, nf + 3 * static_cast<int>(i) + 1) = 1.0;
        const Eigen::Matrix<double, 2, 3> g = corrected_point_dl(l, xpm[i], t);
        for (int m = 0; m < 8; ++m)
            jac->block<2, 1>(row + 2, m) = g * (df[static_cast<size_t>(m)] * xh);
        jac->block<2, 1>(row + 2, nf + 3 * static_cast<int>(i)) = g * f.col(0);
        jac->block<2, 1>(row + 2, nf + 3 * static_cast<int>(i) + 1) = g * f.col(1);
        const Vec2 dir(-l.y(), l.x());
        jac->block<2, 1>(row + 2, nf + 3 * static_cast<int>(i) + 2) = dir.normalized();
    }
}

std::pair<StepOneProblem, Eigen::VectorXd> make_step_one_problem(const RefineState& state) {
    StepOneProblem problem;
    const size_t n = state.points.size();
    problem.xm.resize(n);
    problem.xpm.resize(n);
    for (size_t i = 0; i < n; ++i) {
        problem.xm[i] = state.points[i].x.dehomog();
        problem.xpm[i] = state.points[i].xPrime.dehomog();
    }
    Eigen::VectorXd p = Eigen::VectorXd::Zero(problem.paramCount());
    p.head<8>() = lm_pack(state.f, problem.chart);
    return {problem, p};
}

}  // namespace detail

RefineState step_one_reproject(const RefineState& state) {
    const size_t n = state.points.size();
    if (n < 7) throw InsufficientPoints("step_one_reproject: need >= 7 point pairs");

    auto [problem, p] = detail::make_step_one_problem(state);
    const int nf = 8;
    auto evaluate = [&problem](const Eigen::VectorXd& params, Eigen::VectorXd& r,
                               Eigen::MatrixXd* jac) { problem.residuals(params, r, jac); };

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    evaluate(p, r, &jac);
    double cost = r.squaredNorm();
    Eigen::VectorXd best = p;
    double bestCost = cost;

    double lambda = 1e-3;
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::VectorXd g = jac.transpose() * r;
        if (g.cwiseAbs().maxCoeff() < 1e-10) {
            converged = true;
            break;
        }
        Eigen::MatrixXd a = jac.transpose() * jac;
        a.diagonal() += lambda * a.diagonal().cwiseMax(1e-12);
        const Eigen::VectorXd step = a.ldlt().solve(-g);
        const Eigen::VectorXd trial = p + step;
        Eigen::VectorXd rt;
        evaluate(trial, rt, nullptr);
        if (rt.squaredNorm() < cost) {
            p = trial;
            cost = rt.squaredNorm();
            lambda = std::max(lambda / 3.0, 1e-12);
            evaluate(p, r, &jac);
            if (cost < bestCost) {
                bestCost = cost;
                best = p;
            }
            if (step.cwiseAbs().maxCoeff() < 1e-14) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }

    RefineState out = state;
    Mat3 f;
    std::array<Mat3, 8> df;
    detail::lm_matrices(best.head<8>(), problem.chart, f, df);
    out.f = make_fundamental(f);
    out.converged = converged;
    out.objective = std::sqrt(bestCost / static_cast<double>(2 * n));
    out.points.resize(n);
    out.lines.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const double du = best[nf + 3 * static_cast<int>(i)];
        const double dv = best[nf + 3 * static_cast<int>(i) + 1];
        const double t = best[nf + 3 * static_cast<int>(i) + 2];
        const Vec3 xh(problem.xm[i].x() + du, problem.xm[i].y() + dv, 1.0);
        // raw f, not the canonicalized copy: t is tied to f's sign
        const Vec2 xph = corrected_point(f * xh, problem.xpm[i], t);
        out.points[i].x = HomogPoint::pixel(xh.x(), xh.y());
        out.points[i].xPrime = HomogPoint::pixel(xph.x(), xph.y());
        // reset the lines through the corrected points
        out.lines[i].l = HomogLine(out.f.m.transpose() * out.points[i].xPrime.v);
        out.lines[i].lPrime = HomogLine(out.f.m * out.points[i].x.v);
    }
    return out;
}

RefineState step_two_line_search(const RefineState& state, const BarcodeProvider& barcodes,
                                 const RefineConfig& cfg) {
    if (cfg.thetaDeg <= 0 || cfg.angleSamples < 3 || cfg.angleSamples % 2 == 0)
        throw Error("step_two_line_search: theta must be > 0 and angleSamples odd");
    const size_t n = state.lines.size();
    if (n != state.points.size() || n < 3)
        throw Error("step_two_line_search: need >= 3 line pairs matching the points");

    const int samples = cfg.angleSamples;
    std::vector<double> offsets(static_cast<size_t>(samples));
    for (int k = 0; k < samples; ++k)
        offsets[static_cast<size_t>(k)] =
            -cfg.thetaDeg + 2.0 * cfg.thetaDeg * k / static_cast<double>(samples - 1);

    auto rotated = [](const HomogLine& line, const Vec2& pivot, double deltaDeg) {
        const double rad = deltaDeg * M_PI / 180.0;
        const Eigen::Rotation2Dd rot(rad);
        const Vec2 nrm = rot * Vec2(line.v.x(), line.v.y());
        return HomogLine(nrm.x(), nrm.y(), -nrm.dot(pivot));
    };

    RefineState out = state;
    double sumCl = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec2 pA = state.points[i].x.dehomog();
        const Vec2 pB = state.points[i].xPrime.dehomog();
        std::vector<HomogLine> candA, candB;
        std::vector<Barcode> bcA, bcB;
        for (int k = 0; k < samples; ++k) {
            candA.push_back(rotated(state.lines[i].l, pA, offsets[static_cast<size_t>(k)]));
            candB.push_back(rotated(state.lines[i].lPrime, pB, offsets[static_cast<size_t>(k)]));
            bcA.push_back(barcodes(candA.back(), 0));
            bcB.push_back(barcodes(candB.back(), 1));
        }
        double bestC = std::numeric_limits<double>::infinity();
        double bestAngle = std::numeric_limits<double>::infinity();
        int bestKa = samples / 2, bestKb = samples / 2;
        for (int ka = 0; ka < samples; ++ka)
            for (int kb = 0; kb < samples; ++kb) {
                const double da = offsets[static_cast<size_t>(ka)];
                const double db = offsets[static_cast<size_t>(kb)];
                const double corr =
                    barcode_correlation(bcA[static_cast<size_t>(ka)], bcB[static_cast<size_t>(kb)])
                        .value;
                const double c = std::abs(da) / cfg.thetaDeg + std::abs(db) / cfg.thetaDeg - corr;
                const double angle = std::abs(da) + std::abs(db);
                if (c < bestC || (c == bestC && angle < bestAngle)) {
                    bestC = c;
                    bestAngle = angle;
                    bestKa = ka;
                    bestKb = kb;
                }
            }
        out.lines[i].l = candA[static_cast<size_t>(bestKa)];
        out.lines[i].lPrime = candB[static_cast<size_t>(bestKb)];
        sumCl += bestC;
    }
    out.meanCl = sumCl / static_cast<double>(n);

    std::vector<HomogLine> linesA, linesB;
    for (const auto& lp : out.lines) {
        linesA.push_back(lp.l);
        linesB.push_back(lp.lPrime);
    }
    const EpipoleFit fitA = epipole_from_lines(linesA);
    const EpipoleFit fitB = epipole_from_lines(linesB);
    for (const auto& lp : out.lines) {
        if (epipole_line_residual(fitA.point, lp.l) >= 1.0 ||
            epipole_line_residual(fitB.point, lp.lPrime) >= 1.0)
            throw DegeneratePencil("step_two_line_search: optimized lines lost concurrency");
    }

    const LinePairFit fit =
        fundamental_from_pencils(fitA.point, fitB.point, out.lines, cfg.imageSize);
    out.f = fit.f;
    out.epipoleShiftPx = std::max(epipole_shift_px(state.f.e, out.f.e),
                                  epipole_shift_px(state.f.ePrime, out.f.ePrime));

    // re-project the points onto their optimized lines
    for (size_t i = 0; i < n; ++i) {
        const Vec2 a = corrected_point(out.lines[i].l.v, state.points[i].x.dehomog(), 0.0);
        const Vec2 b = corrected_point(out.lines[i].lPrime.v, state.points[i].xPrime.dehomog(), 0.0);
        out.points[i].x = HomogPoint::pixel(a.x(), a.y());
        out.points[i].xPrime = HomogPoint::pixel(b.x(), b.y());
    }
    return out;
}

std::pair<Fundamental, int> refine(const Fundamental& f0, const std::vector<PointPair>& points,
                                   const std::vector<LinePair>& lines,
                                   const BarcodeProvider& barcodes, const RefineConfig& cfg,
                                   std::vector<RefineTraceRow>* trace) {
    if (points.size() < 7) throw InsufficientPoints("refine: need >= 7 point pairs");
    if (cfg.maxIters < 1) throw Error("refine: maxIters must be >= 1");

    auto objective = [&](const Fundamental& f) {
        double s = 0.0;
        for (const auto& p : points) s += symmetric_epipolar_distance(f, p);
        return s / static_cast<double>(points.size());
    };

    RefineState state;
    state.f = f0;
    state.points = points;
    state.lines = lines;

    Fundamental best = f0;
    double bestObj = objective(f0);
    int iters = 0;
    for (int iter = 1; iter <= cfg.maxIters; ++iter) {
        try {
            state = step_one_reproject(state);
            state = step_two_line_search(state, barcodes, cfg);
        } catch (const Error&) {
            break;  // a degenerate step never discards the best-so-far F
        }
        state.iter = iter;
        iters = iter;
        const double obj = objective(state.f);
        if (obj < bestObj) {
            bestObj = obj;
            best = state.f;
        }
        if (trace)
            trace->push_back({iter, state.epipoleShiftPx, state.meanCl, state.objective});
        if (state.epipoleShiftPx < cfg.epipoleTolPx) break;
    }
    return {best, iters};
}

void refine_trace_csv(const std::vector<RefineTraceRow>& trace, std::ostream& out) {
    out << "iter,epipole_shift_px,mean_Cl,objective\n";
    for (const auto& row : trace)
        out << row.iter << ',' << row.epipoleShiftPx << ',' << row.meanCl << ','
            << row.objective << '\n';
}

}  // namespace mbcal
