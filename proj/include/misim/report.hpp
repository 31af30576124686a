// CSV emission matching the appendix-style schema, run manifests, audit
// dumps, and static SVG rendering (densities, boxplots, QQ panels).

#ifndef MISIM_REPORT_HPP
#define MISIM_REPORT_HPP

#include <string>
#include <vector>

#include "misim/config.hpp"
#include "misim/mcengine.hpp"

namespace misim::report {

/// Fixed six-decimal rendering used for every float in the CSV outputs.
std::string format_double(double v);

/// One row per (scenario, method, branch); deterministic order and bytes.
void emit_csv(const std::vector<mc::ScenarioSummary>& summaries, const std::string& path);

/// Replicate-level CV-MSE table (written under --keep-replicates).
void emit_replicates_csv(const std::vector<mc::Scenario>& scenarios,
                         const std::vector<std::vector<mc::ReplicateRecord>>& replicates,
                         const std::string& path);

/// QQ calibration curves, one row per percentile grid point.
void emit_qq_csv(const std::vector<mc::ScenarioSummary>& summaries, const std::string& path);

/// Audit CSV: y,x1,x2,x2_missing(0/1),contaminated(0/1).
std::string dataset_csv(const synth::Dataset& d);

/// Fit dump (pooled estimates per cell) for debugging.
void emit_fits_json(const std::vector<mc::ScenarioSummary>& summaries, const std::string& path);

/// Everything needed to reproduce the outputs bit-for-bit.
void write_manifest(const config::RunConfig& cfg, const std::vector<mc::Scenario>& scenarios,
                    const std::string& path);

/// Renders density / boxplot / QQ SVG panels from the CSV files in `in_dir`
/// (requires replicates.csv from --keep-replicates) into the same directory.
void emit_plots(const std::string& in_dir);

/// Tukey box statistics: type-7 quartiles, whiskers at the furthest points
/// within 1.5 IQR of the box.
struct BoxStats {
    double q1 = 0, q2 = 0, q3 = 0;
    double whisker_lo = 0, whisker_hi = 0;
    std::vector<double> outliers;
};
BoxStats box_stats(const std::vector<double>& values);

/// Gaussian KDE with Silverman's bandwidth; a zero-variance series is marked
/// degenerate and rendered as a spike.
struct DensityCurve {
    std::vector<double> x, y;
    double bandwidth = 0;
    bool degenerate = false;
};
DensityCurve density_curve(const std::vector<double>& values);

}  // namespace misim::report

#endif
