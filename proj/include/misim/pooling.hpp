// Rubin's-rules combination, coefficient bias/RMSE/coverage metrics, the
// post-selection pooled-OLS rule for the EN branch, and replicate-level
// CV-MSE / QQ reductions.

#ifndef MISIM_POOLING_HPP
#define MISIM_POOLING_HPP

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "misim/imputers.hpp"
#include "misim/synthdata.hpp"

namespace misim::pooling {

struct PooledEstimate {
    Eigen::VectorXd qbar;    // pooled coefficients
    Eigen::VectorXd ubar;    // mean within-imputation variance
    Eigen::VectorXd b;       // between-imputation variance (M-1 denominator)
    Eigen::VectorXd t_total; // ubar + (1 + 1/M) b
    Eigen::VectorXd df;      // Barnard-Rubin degrees of freedom
    Eigen::VectorXd ci_lo;
    Eigen::VectorXd ci_hi;
    std::vector<bool> dropped;  // coefficient reported as 0 with no interval
    int M = 0;

    std::size_t dim() const { return static_cast<std::size_t>(qbar.size()); }
};

enum class SelectionStage { threshold, union_fallback, full_fallback };

struct SelectionOutcome {
    std::vector<int> selected;  // subset of {1, 2} (x1, x2), ascending, never empty
    SelectionStage stage = SelectionStage::threshold;
};

std::string stage_name(SelectionStage s);

/// Rubin's rules over M coefficient vectors with within-imputation covariance
/// matrices; nu_com is the complete-data degrees of freedom (n - p). For
/// identical imputations (b = 0) and for M = 1 the interval collapses to the
/// single-fit t-interval with df = nu_com.
PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& covs, int nu_com);

/// Retain slopes selected in >= threshold of the M fits; union fallback if
/// empty; {x1, x2} if still empty. `selections` holds the nonzero-slope index
/// sets (subsets of {1, 2}) of the M elastic-net fits.
SelectionOutcome select_support(const std::vector<std::vector<int>>& selections,
                                double threshold = 0.5);

/// Refit OLS on the selected predictors in each completed set and Rubin-pool;
/// dropped coefficients are reported as 0 with no interval, flagged.
PooledEstimate post_selection_pool(const std::vector<imputers::CompletedDataset>& completions,
                                   const SelectionOutcome& sel);

struct CoefficientMetrics {
    std::array<double, 3> bias{};
    std::array<double, 3> rmse{};
    std::array<double, 3> coverage{};
};

/// bias_k = mean(qbar_k) - beta_k; rmse_k = sqrt(mean((qbar_k - beta_k)^2));
/// coverage_k = fraction of replicates whose interval contains beta_k. A
/// dropped coefficient counts as covering only when the truth is 0.
CoefficientMetrics coefficient_metrics(const std::vector<PooledEstimate>& pooled,
                                       const std::array<double, 3>& truth = {1.0, 0.5, 1.5});

struct CvMseSummary {
    double mean = 0.0;
    double variance = 0.0;  // n-1 denominator; 0 (flagged) for a single value
    double q025 = 0.0;
    double q50 = 0.0;
    double q975 = 0.0;
    bool variance_degenerate = false;
};

CvMseSummary aggregate_cvmse(const std::vector<double>& values);

/// Type-7 quantile (linear interpolation of order statistics), p in [0,1].
double quantile_type7(std::vector<double> values, double p);

struct QqCurve {
    std::vector<double> true_q;  // one point per percentile 1..99
    std::vector<double> pred_q;
};

/// Per replicate: type-7 quantiles of the predicted-y medians and of the true
/// y at percentiles 1..99; aggregated across replicates by the mean per grid
/// point.
QqCurve qq_reduce(const std::vector<std::vector<double>>& pred_medians_per_rep,
                  const std::vector<std::vector<double>>& true_y_per_rep);

}  // namespace misim::pooling

#endif
