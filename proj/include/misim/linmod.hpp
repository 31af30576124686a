// OLS (pivoted QR) and elastic net (coordinate descent with covariance
// updates) on completed data, plus fixed-fold lambda selection and
// cross-validated MSE.

#ifndef MISIM_LINMOD_HPP
#define MISIM_LINMOD_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "misim/synthdata.hpp"

namespace misim::linmod {

struct SingularDesignError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& msg, int iters)
        : std::runtime_error(msg), iterations(iters) {}
    int iterations;
};

/// Response plus predictor matrix with an explicit leading intercept column.
struct DesignMatrix {
    Eigen::MatrixXd X;  // n x p, first column all ones
    Eigen::VectorXd y;

    std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
};

/// Full (1, x1, x2) design from a complete dataset. Throws if any x2 entry
/// is still masked.
DesignMatrix make_design(const synth::Dataset& d);

/// Design restricted to a predictor subset; `slots` lists which of {1,2}
/// (x1, x2) are kept, ascending. The intercept is always present.
DesignMatrix make_design_subset(const synth::Dataset& d, const std::vector<int>& slots);

struct OlsFit {
    Eigen::VectorXd coef;
    double sigma2_hat = 0.0;   // RSS / (n - p)
    Eigen::MatrixXd cov;       // sigma2_hat * (X'X)^-1
};

struct EnFit {
    Eigen::VectorXd coef;      // original scale, intercept first
    double alpha = 0.5;
    double lambda = 0.0;
    std::vector<int> selected;  // slope indices (1-based into coef) with nonzero slope
    int sweeps = 0;
};

struct CvResult {
    std::vector<double> lambda_grid;  // descending
    std::vector<double> cv_mse;
    std::vector<double> cv_se;        // standard error of cv_mse over folds
    double lambda_min = 0.0;
    double cv_mse_at_min = 0.0;
    double lambda_1se = 0.0;  // largest lambda within one SE of the minimum
};

enum class Branch { ols, en };

/// Least squares via Householder QR with column pivoting; rank tolerance
/// 1e-10 * ||X||. Throws SingularDesignError on rank deficiency.
OlsFit fit_ols(const DesignMatrix& d);

/// Solves the 1/(2n) squared loss plus lambda*(alpha*l1 + (1-alpha)/2*l2)
/// slope penalty. Predictors are centered/scaled to unit (population) SD,
/// the response is centered, the intercept is unpenalized, and coefficients
/// are returned on the original scale. Convergence: max coordinate change
/// < 1e-7 or 1e5 sweeps (then ConvergenceError).
/// `objective_trace`, when non-null, receives the standardized-space
/// objective after every sweep.
EnFit fit_elastic_net(const DesignMatrix& d, double alpha, double lambda,
                      std::vector<double>* objective_trace = nullptr);

/// Elastic-net objective in standardized space for a standardized slope
/// vector; exposed for the monotonicity checks.
double en_objective_standardized(const DesignMatrix& d, double alpha, double lambda,
                                 const Eigen::VectorXd& slopes_std);

/// 100-point log-spaced grid from lambda_max down to 1e-4*lambda_max with
/// lambda_max = max_j |<x~_j, y~>| / (n * max(alpha, 1e-3)); cv_mse(lambda)
/// is the mean over folds of held-out MSE; ties resolve to the larger lambda.
CvResult cv_lambda_select(const DesignMatrix& d, double alpha, const synth::FoldMap& folds);

/// K-fold out-of-sample MSE: fit on each fold complement (EN: at this
/// design's lambda_min selected with the same folds), predict held out,
/// grand mean over all n held-out squared errors.
double cv_mse(Branch branch, const DesignMatrix& d, const synth::FoldMap& folds);

}  // namespace misim::linmod

#endif
