#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mbcal/estimator.hpp"
#include "mbcal/synth.hpp"

namespace mbcal {

enum class BenchMethod { Barcode, Sinha };

std::string bench_method_name(BenchMethod m);

/// One efficiency/accuracy comparison: both methods on one synthetic
/// scene over a list of seeds, evaluated on GT frontier points.
struct ExperimentSpec {
    SceneSpec scene;
    std::vector<BenchMethod> methods{BenchMethod::Barcode, BenchMethod::Sinha};
    std::vector<int> budgets{1000, 2000, 5000, 10000};
    std::vector<double> thresholds{1.5, 1.0, 0.8, 0.5, 0.4, 0.3};
    std::vector<uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int checkpointInterval = 1000;
    double minCorrelation = 0.9;
    double inlierThresholdPx = 1.0;
    double angleStepDeg = 2.0;
};

ExperimentSpec default_experiment_spec();

/// One (method, seed) run. Checkpoint postLMError values are GT
/// frontier-point errors. chargeIters is the offline-phase cost in
/// hypothesis-equivalents (35 for the barcode method, 0 for Sinha).
struct BenchCell {
    BenchMethod method = BenchMethod::Barcode;
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    int chargeIters = 0;
    RansacReport report;
    Fundamental f;
    double bestError = 0.0;  // min post-LM GT error over checkpoints
};

/// Expected LM count to reach a threshold, per method (aligned with
/// spec.methods), from the empirical CDF of all post-LM errors; the
/// barcode entries include the precompute charge in LM-equivalents.
/// NaN marks "not attained".
struct ThresholdSummary {
    double thresholdPx = 0.0;
    std::vector<double> expectedLm;
    double ratio = 0.0;  // sinha / barcode; NaN when either is missing
};

/// Median best post-LM error within a hypothesis budget, per method.
struct BudgetSummary {
    int budget = 0;
    std::vector<double> medianBestError;  // NaN when no checkpoint fits
};

struct ExperimentResult {
    ExperimentSpec spec;
    std::vector<PointPair> gtPoints;
    std::vector<BenchCell> cells;
    std::vector<ThresholdSummary> thresholdTable;
    std::vector<BudgetSummary> budgetTable;
};

/// Renders the scene once, shares line banks and the match table across
/// all cells, runs each (method, seed) cell, and derives the summary
/// tables. A failing cell is recorded with its error message and does
/// not abort the others. Throws InvalidSpec on empty methods, budgets,
/// thresholds or seeds. threads caps the number of concurrent cells
/// (0 = all at once) without changing any result.
ExperimentResult run_experiment(const ExperimentSpec& spec, int threads = 0);

/// Fraction of completed cells with bestError <= threshold, aligned
/// with spec.methods. Throws NoData when no cell completed.
std::vector<double> success_fraction(const ExperimentResult& result, double thresholdPx);

/// SVG overlay of estimated (yellow) vs ground-truth (red) epipolar
/// lines of image B through the image-A points, with the measured
/// image-B points as circles. Deterministic bytes.
std::string render_overlay(const Vec2& imageSize, const Fundamental& fEstimated,
                           const Fundamental& fGT, const std::vector<PointPair>& points);

/// Raw per-checkpoint rows: method, seed, raw/charged hypothesis count,
/// window best and post-LM (GT) error. Excludes wall-clock columns so
/// reruns are byte-identical.
void bench_csv(const ExperimentResult& result, std::ostream& out);

/// Derived tables in long form (section, key, method, value) with the
/// literal marker `not_attained` for unreachable levels, plus one
/// status row per cell.
void summary_csv(const ExperimentResult& result, std::ostream& out);

std::string experiment_spec_to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const std::string& text);

/// Writes experiment.json, bench.csv, summary.csv and one
/// overlay_<method>.svg per method with a completed cell under dir.
void save_experiment(const ExperimentResult& result, const std::string& dir);

}  // namespace mbcal
