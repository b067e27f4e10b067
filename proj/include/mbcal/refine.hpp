#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "mbcal/barcode.hpp"
#include "mbcal/lm.hpp"

namespace mbcal {

struct RefineConfig {
    double thetaDeg = 0.2;   // search half-range per line
    int angleSamples = 41;   // odd, so the 0-degree offset is on the grid
    int maxIters = 20;
    double epipoleTolPx = 0.1;
    Vec2 imageSize{640, 480};
};

struct RefineState {
    Fundamental f;
    std::vector<PointPair> points;
    std::vector<LinePair> lines;  // lines[i] passes through points[i] in each image
    int iter = 0;
    double epipoleShiftPx = 0.0;
    double meanCl = 0.0;       // last step-two mean cost
    double objective = 0.0;    // last step-one reprojection RMS (px)
    bool converged = true;     // step-one LM convergence flag
};

/// Barcode of an arbitrary line in camera 0 (image A) or 1 (image B).
using BarcodeProvider = std::function<Barcode(const HomogLine& line, int camera)>;

/// Provider backed by mask sequences. The sequences must outlive the
/// returned function.
BarcodeProvider make_barcode_provider(const std::vector<Mask>& masksA,
                                      const std::vector<Mask>& masksB);

/// Gold-standard reprojection step: joint LM over the F parameters and
/// per-pair point corrections (the corrected pair satisfies the
/// epipolar constraint exactly); lines are reset from the new F.
/// Throws InsufficientPoints for < 7 pairs.
RefineState step_one_reproject(const RefineState& state);

/// Barcode-driven grid search: each line pair is rotated about its points over
/// the angleSamples x angleSamples offset grid in [-theta, theta]; the
/// argmin of C = |da|/theta + |db|/theta - corr is selected (ties ->
/// minimal angle), epipoles and the pencil homography are refit, points
/// are re-projected onto their optimized lines, and F is rebuilt.
/// Throws DegeneratePencil when the optimized lines lose concurrency
/// beyond 1 px residual.
RefineState step_two_line_search(const RefineState& state, const BarcodeProvider& barcodes,
                                 const RefineConfig& cfg);

struct RefineTraceRow {
    int iter = 0;
    double epipoleShiftPx = 0.0;
    double meanCl = 0.0;
    double objective = 0.0;
};

/// Alternates step one / step two until the epipole shift drops below
/// epipoleTolPx or maxIters is reached. Returns the best-so-far F by
/// the ground-truth-free objective (mean symmetric epipolar distance
/// over the input points) and the iteration count.
std::pair<Fundamental, int> refine(const Fundamental& f0, const std::vector<PointPair>& points,
                                   const std::vector<LinePair>& lines,
                                   const BarcodeProvider& barcodes, const RefineConfig& cfg,
                                   std::vector<RefineTraceRow>* trace = nullptr);

/// CSV: iter, epipole_shift_px, mean_Cl, objective.
void refine_trace_csv(const std::vector<RefineTraceRow>& trace, std::ostream& out);

namespace detail {

/// Gold-standard reprojection problem: parameters are the 8 F-chart
/// values followed by (du, dv, t) per pair; residuals are the four
/// per-pair correction components.
struct StepOneProblem {
    LmChart chart;
    std::vector<Vec2> xm, xpm;  // measured points

    int paramCount() const { return 8 + 3 * static_cast<int>(xm.size()); }
    void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const;
};

/// Problem plus the initial parameter vector (zero corrections).
std::pair<StepOneProblem, Eigen::VectorXd> make_step_one_problem(const RefineState& state);

}  // namespace detail

}  // namespace mbcal
