#include "misim/linmod.hpp"

#include <cmath>
#include <string>

namespace misim::linmod {

namespace {

constexpr double kCdTol = 1e-7;
constexpr int kCdMaxSweeps = 100000;
constexpr int kLambdaGridLen = 100;
constexpr double kLambdaGridRatio = 1e-4;

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

// Slope columns centered and scaled to unit population SD; response centered.
struct StdProblem {
    Eigen::MatrixXd Xs;        // n x q, only slope columns with positive SD
    Eigen::VectorXd yc;
    Eigen::VectorXd xmean;     // per kept column
    Eigen::VectorXd xsd;
    std::vector<int> cols;     // original design column of each kept column
    double ymean = 0.0;
    Eigen::MatrixXd gram;      // Xs'Xs / n (unit diagonal)
    Eigen::VectorXd corr;      // Xs'yc / n

    std::size_t q() const { return cols.size(); }
};

StdProblem standardize(const DesignMatrix& d) {
    const auto n = static_cast<Eigen::Index>(d.n());
    StdProblem sp;
    sp.ymean = d.y.mean();
    sp.yc = d.y.array() - sp.ymean;
    std::vector<double> means, sds;
    for (Eigen::Index j = 1; j < d.X.cols(); ++j) {
        const double m = d.X.col(j).mean();
        const double sd = std::sqrt((d.X.col(j).array() - m).square().sum() / n);
        if (sd > 0.0) {
            sp.cols.push_back(static_cast<int>(j));
            means.push_back(m);
            sds.push_back(sd);
        }
    }
    const auto q = static_cast<Eigen::Index>(sp.cols.size());
    sp.Xs.resize(n, q);
    sp.xmean.resize(q);
    sp.xsd.resize(q);
    for (Eigen::Index k = 0; k < q; ++k) {
        sp.xmean[k] = means[k];
        sp.xsd[k] = sds[k];
        sp.Xs.col(k) = (d.X.col(sp.cols[k]).array() - means[k]) / sds[k];
    }
    sp.gram = sp.Xs.transpose() * sp.Xs / static_cast<double>(n);
    sp.corr = sp.Xs.transpose() * sp.yc / static_cast<double>(n);
    return sp;
}

double objective(const StdProblem& sp, double alpha, double lambda, const Eigen::VectorXd& b) {
    const double n = static_cast<double>(sp.yc.size());
    const double rss = (sp.yc - sp.Xs * b).squaredNorm();
    return rss / (2.0 * n) +
           lambda * (alpha * b.cwiseAbs().sum() + 0.5 * (1.0 - alpha) * b.squaredNorm());
}

// Cyclic coordinate descent with covariance updates; b is the warm start.
int coordinate_descent(const StdProblem& sp, double alpha, double lambda, Eigen::VectorXd& b,
                       std::vector<double>* trace) {
    const auto q = static_cast<Eigen::Index>(sp.q());
    const double denom = 1.0 + lambda * (1.0 - alpha);
    for (int sweep = 1; sweep <= kCdMaxSweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < q; ++j) {
            const double z = sp.corr[j] - (sp.gram.row(j).dot(b) - b[j]);
            const double bj = soft_threshold(z, lambda * alpha) / denom;
            max_change = std::max(max_change, std::fabs(bj - b[j]));
            b[j] = bj;
        }
        if (trace) trace->push_back(objective(sp, alpha, lambda, b));
        if (max_change < kCdTol) return sweep;
    }
    throw ConvergenceError("elastic net failed to converge after " +
                               std::to_string(kCdMaxSweeps) + " sweeps",
                           kCdMaxSweeps);
}

// Map a standardized slope vector back to an original-scale coefficient vector.
Eigen::VectorXd back_transform(const DesignMatrix& d, const StdProblem& sp,
                               const Eigen::VectorXd& b) {
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(d.X.cols());
    double intercept = sp.ymean;
    for (std::size_t k = 0; k < sp.q(); ++k) {
        const double slope = b[static_cast<Eigen::Index>(k)] / sp.xsd[static_cast<Eigen::Index>(k)];
        coef[sp.cols[k]] = slope;
        intercept -= slope * sp.xmean[static_cast<Eigen::Index>(k)];
    }
    coef[0] = intercept;
    return coef;
}

double lambda_max_of(const StdProblem& sp, double alpha) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < sp.corr.size(); ++j) m = std::max(m, std::fabs(sp.corr[j]));
    return m / std::max(alpha, 1e-3);
}

std::vector<double> lambda_grid(double lambda_max) {
    std::vector<double> grid(kLambdaGridLen);
    const double log_max = std::log(lambda_max);
    const double log_min = std::log(lambda_max * kLambdaGridRatio);
    for (int i = 0; i < kLambdaGridLen; ++i)
        grid[i] = std::exp(log_max + (log_min - log_max) * i / (kLambdaGridLen - 1));
    return grid;
}

DesignMatrix subset_rows(const DesignMatrix& d, const std::vector<Eigen::Index>& rows) {
    DesignMatrix out;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), d.X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = d.X.row(rows[i]);
        out.y[static_cast<Eigen::Index>(i)] = d.y[rows[i]];
    }
    return out;
}

}  // namespace

DesignMatrix make_design(const synth::Dataset& d) {
    return make_design_subset(d, {1, 2});
}

DesignMatrix make_design_subset(const synth::Dataset& d, const std::vector<int>& slots) {
    const auto n = static_cast<Eigen::Index>(d.n());
    DesignMatrix out;
    out.X.resize(n, 1 + static_cast<Eigen::Index>(slots.size()));
    out.X.col(0).setOnes();
    out.y.resize(n);
    bool uses_x2 = false;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const std::vector<double>& col = (slots[k] == 1) ? d.x1 : d.x2;
        if (slots[k] == 2) uses_x2 = true;
        for (Eigen::Index i = 0; i < n; ++i) out.X(i, static_cast<Eigen::Index>(k) + 1) = col[i];
    }
    for (Eigen::Index i = 0; i < n; ++i) out.y[i] = d.y[i];
    if (uses_x2) {
        for (std::size_t i = 0; i < d.n(); ++i)
            if (d.x2_mask[i])
                throw std::invalid_argument("make_design: dataset still has masked x2 entries");
    }
    if (!out.X.allFinite() || !out.y.allFinite())
        throw std::invalid_argument("make_design: non-finite values in design");
    return out;
}

OlsFit fit_ols(const DesignMatrix& d) {
    const auto n = static_cast<Eigen::Index>(d.n());
    const auto p = static_cast<Eigen::Index>(d.p());
    if (n <= p) throw SingularDesignError("fit_ols: n <= p");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw SingularDesignError("fit_ols: rank-deficient design");
    OlsFit fit;
    fit.coef = qr.solve(d.y);
    const double rss = (d.y - d.X * fit.coef).squaredNorm();
    fit.sigma2_hat = rss / static_cast<double>(n - p);
    fit.cov = fit.sigma2_hat * (d.X.transpose() * d.X).inverse();
    return fit;
}

double en_objective_standardized(const DesignMatrix& d, double alpha, double lambda,
                                 const Eigen::VectorXd& slopes_std) {
    return objective(standardize(d), alpha, lambda, slopes_std);
}

EnFit fit_elastic_net(const DesignMatrix& d, double alpha, double lambda,
                      std::vector<double>* objective_trace) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("fit_elastic_net: alpha must be in [0,1]");
    if (!(lambda >= 0.0)) throw std::invalid_argument("fit_elastic_net: lambda must be >= 0");
    const StdProblem sp = standardize(d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.q()));
    EnFit fit;
    fit.alpha = alpha;
    fit.lambda = lambda;
    if (lambda == 0.0) {
        // The unpenalized objective is plain least squares; solve it exactly
        // instead of iterating to the coordinate-descent tolerance.
        try {
            fit.coef = fit_ols(d).coef;
            fit.sweeps = 0;
            if (objective_trace) {
                Eigen::VectorXd b_std = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.q()));
                for (std::size_t k = 0; k < sp.q(); ++k)
                    b_std[static_cast<Eigen::Index>(k)] =
                        fit.coef[sp.cols[k]] * sp.xsd[static_cast<Eigen::Index>(k)];
                objective_trace->push_back(objective(sp, alpha, lambda, b_std));
            }
            for (Eigen::Index j = 1; j < fit.coef.size(); ++j)
                if (fit.coef[j] != 0.0) fit.selected.push_back(static_cast<int>(j));
            return fit;
        } catch (const SingularDesignError&) {
            // fall through to coordinate descent, which tolerates collinearity
        }
    }
    fit.sweeps = coordinate_descent(sp, alpha, lambda, b, objective_trace);
    fit.coef = back_transform(d, sp, b);
    for (Eigen::Index j = 1; j < fit.coef.size(); ++j)
        if (fit.coef[j] != 0.0) fit.selected.push_back(static_cast<int>(j));
    return fit;
}

CvResult cv_lambda_select(const DesignMatrix& d, double alpha, const synth::FoldMap& folds) {
    if (folds.assignment.size() != d.n())
        throw std::invalid_argument("cv_lambda_select: fold map length mismatch");
    CvResult res;
    const StdProblem full = standardize(d);
    res.lambda_grid = lambda_grid(lambda_max_of(full, alpha));
    res.cv_mse.assign(res.lambda_grid.size(), 0.0);
    std::vector<std::vector<double>> fold_mse(res.lambda_grid.size());

    for (int f = 0; f < folds.K; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < folds.assignment.size(); ++i)
            (folds.assignment[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        if (train.size() < 4)
            throw std::invalid_argument("cv_lambda_select: fold leaves fewer than 4 training rows");
        if (test.empty())
            throw std::invalid_argument("cv_lambda_select: empty fold");
        const DesignMatrix dtrain = subset_rows(d, train);
        const StdProblem sp = standardize(dtrain);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.q()));
        for (std::size_t g = 0; g < res.lambda_grid.size(); ++g) {
            coordinate_descent(sp, alpha, res.lambda_grid[g], b, nullptr);
            const Eigen::VectorXd coef = back_transform(dtrain, sp, b);
            double sse = 0.0;
            for (Eigen::Index i : test) {
                const double e = d.y[i] - d.X.row(i).dot(coef);
                sse += e * e;
            }
            res.cv_mse[g] += sse / static_cast<double>(test.size());
            fold_mse[g].push_back(sse / static_cast<double>(test.size()));
        }
    }
    for (double& v : res.cv_mse) v /= static_cast<double>(folds.K);

    res.cv_se.assign(res.lambda_grid.size(), 0.0);
    for (std::size_t g = 0; g < res.lambda_grid.size(); ++g) {
        double ss = 0.0;
        for (double v : fold_mse[g]) ss += (v - res.cv_mse[g]) * (v - res.cv_mse[g]);
        const double k = static_cast<double>(folds.K);
        res.cv_se[g] = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
    }

    std::size_t best = 0;  // grid descends, so scanning with strict < ties to larger lambda
    for (std::size_t g = 1; g < res.cv_mse.size(); ++g)
        if (res.cv_mse[g] < res.cv_mse[best]) best = g;
    res.lambda_min = res.lambda_grid[best];
    res.cv_mse_at_min = res.cv_mse[best];

    // Largest lambda whose curve value stays within one SE of the minimum.
    res.lambda_1se = res.lambda_min;
    for (std::size_t g = 0; g < res.lambda_grid.size(); ++g)
        if (res.cv_mse[g] <= res.cv_mse_at_min + res.cv_se[best]) {
            res.lambda_1se = res.lambda_grid[g];
            break;
        }
    return res;
}

double cv_mse(Branch branch, const DesignMatrix& d, const synth::FoldMap& folds) {
    if (folds.assignment.size() != d.n())
        throw std::invalid_argument("cv_mse: fold map length mismatch");
    double lambda = 0.0;
    const double alpha = 0.5;
    if (branch == Branch::en) lambda = cv_lambda_select(d, alpha, folds).lambda_min;

    double sse = 0.0;
    for (int f = 0; f < folds.K; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < folds.assignment.size(); ++i)
            (folds.assignment[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        const DesignMatrix dtrain = subset_rows(d, train);
        Eigen::VectorXd coef;
        if (branch == Branch::ols) {
            coef = fit_ols(dtrain).coef;
        } else {
            coef = fit_elastic_net(dtrain, alpha, lambda).coef;
        }
        for (Eigen::Index i : test) {
            const double e = d.y[i] - d.X.row(i).dot(coef);
            sse += e * e;
        }
    }
    return sse / static_cast<double>(d.n());
}

}  // namespace misim::linmod
