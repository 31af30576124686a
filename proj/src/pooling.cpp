#include "misim/pooling.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <stdexcept>

#include "misim/linmod.hpp"

namespace misim::pooling {

namespace {

double t_quantile_975(double df) {
    return boost::math::quantile(boost::math::students_t(df), 0.975);
}

// Barnard-Rubin small-sample degrees of freedom; collapses to nu_com when
// the between-imputation variance vanishes.
double barnard_rubin_df(double lambda, int M, int nu_com) {
    if (lambda <= 0.0) return static_cast<double>(nu_com);
    const double df_old = (M - 1) / (lambda * lambda);
    const double nu = static_cast<double>(nu_com);
    const double df_obs = (nu + 1.0) / (nu + 3.0) * nu * (1.0 - lambda);
    // Floor at one degree of freedom so the t quantile stays finite even when
    // the between-imputation variance dominates completely (lambda -> 1).
    if (df_obs <= 0.0) return 1.0;
    return std::max(1.0, 1.0 / (1.0 / df_old + 1.0 / df_obs));
}

}  // namespace

std::string stage_name(SelectionStage s) {
    switch (s) {
        case SelectionStage::threshold: return "threshold";
        case SelectionStage::union_fallback: return "union-fallback";
        case SelectionStage::full_fallback: return "full-fallback";
    }
    return "?";
}

PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& covs, int nu_com) {
    const int M = static_cast<int>(estimates.size());
    if (M < 1) throw std::invalid_argument("rubin_pool: M must be >= 1");
    if (covs.size() != estimates.size())
        throw std::invalid_argument("rubin_pool: estimates/covs length mismatch");
    const Eigen::Index k = estimates[0].size();
    for (int m = 0; m < M; ++m)
        if (estimates[m].size() != k || covs[m].rows() != k || covs[m].cols() != k)
            throw std::invalid_argument("rubin_pool: dimension mismatch");

    PooledEstimate pe;
    pe.M = M;
    pe.qbar = Eigen::VectorXd::Zero(k);
    pe.ubar = Eigen::VectorXd::Zero(k);
    pe.b = Eigen::VectorXd::Zero(k);
    pe.dropped.assign(static_cast<std::size_t>(k), false);
    for (int m = 0; m < M; ++m) {
        pe.qbar += estimates[m];
        pe.ubar += covs[m].diagonal();
    }
    pe.qbar /= M;
    pe.ubar /= M;
    if (M > 1) {
        for (int m = 0; m < M; ++m) {
            const Eigen::VectorXd d = estimates[m] - pe.qbar;
            pe.b += d.cwiseProduct(d);
        }
        pe.b /= (M - 1);
    }
    pe.t_total = pe.ubar + (1.0 + 1.0 / M) * pe.b;
    pe.df.resize(k);
    pe.ci_lo.resize(k);
    pe.ci_hi.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double lambda =
            (pe.t_total[j] > 0.0) ? (1.0 + 1.0 / M) * pe.b[j] / pe.t_total[j] : 0.0;
        pe.df[j] = barnard_rubin_df(lambda, M, nu_com);
        const double half = t_quantile_975(pe.df[j]) * std::sqrt(pe.t_total[j]);
        pe.ci_lo[j] = pe.qbar[j] - half;
        pe.ci_hi[j] = pe.qbar[j] + half;
    }
    return pe;
}

SelectionOutcome select_support(const std::vector<std::vector<int>>& selections,
                                double threshold) {
    const int M = static_cast<int>(selections.size());
    if (M < 1) throw std::invalid_argument("select_support: M must be >= 1");
    SelectionOutcome out;
    int count[3] = {0, 0, 0};
    for (const auto& sel : selections)
        for (int j : sel) count[j] += 1;
    for (int j : {1, 2})
        if (static_cast<double>(count[j]) / M >= threshold) out.selected.push_back(j);
    if (!out.selected.empty()) {
        out.stage = SelectionStage::threshold;
        return out;
    }
    for (int j : {1, 2})
        if (count[j] > 0) out.selected.push_back(j);
    if (!out.selected.empty()) {
        out.stage = SelectionStage::union_fallback;
        return out;
    }
    out.selected = {1, 2};
    out.stage = SelectionStage::full_fallback;
    return out;
}

PooledEstimate post_selection_pool(const std::vector<imputers::CompletedDataset>& completions,
                                   const SelectionOutcome& sel) {
    if (completions.empty()) throw std::invalid_argument("post_selection_pool: no completions");
    if (sel.selected.empty()) throw std::invalid_argument("post_selection_pool: empty selection");
    std::vector<Eigen::VectorXd> estimates;
    std::vector<Eigen::MatrixXd> covs;
    const int n = static_cast<int>(completions[0].data.n());
    const int p_sel = 1 + static_cast<int>(sel.selected.size());
    for (const auto& cd : completions) {
        const linmod::DesignMatrix dm = linmod::make_design_subset(cd.data, sel.selected);
        const linmod::OlsFit fit = linmod::fit_ols(dm);
        estimates.push_back(fit.coef);
        covs.push_back(fit.cov);
    }
    PooledEstimate sub = rubin_pool(estimates, covs, n - p_sel);

    // Expand back to the 3-slot coefficient layout; dropped slopes are 0,
    // flagged, with a degenerate interval.
    PooledEstimate pe;
    pe.M = sub.M;
    pe.qbar = Eigen::VectorXd::Zero(3);
    pe.ubar = Eigen::VectorXd::Zero(3);
    pe.b = Eigen::VectorXd::Zero(3);
    pe.t_total = Eigen::VectorXd::Zero(3);
    pe.df = Eigen::VectorXd::Zero(3);
    pe.ci_lo = Eigen::VectorXd::Zero(3);
    pe.ci_hi = Eigen::VectorXd::Zero(3);
    pe.dropped.assign(3, true);
    pe.dropped[0] = false;
    std::vector<int> slots = {0};
    for (int j : sel.selected) slots.push_back(j);
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const int slot = slots[k];
        const auto kk = static_cast<Eigen::Index>(k);
        pe.dropped[static_cast<std::size_t>(slot)] = false;
        pe.qbar[slot] = sub.qbar[kk];
        pe.ubar[slot] = sub.ubar[kk];
        pe.b[slot] = sub.b[kk];
        pe.t_total[slot] = sub.t_total[kk];
        pe.df[slot] = sub.df[kk];
        pe.ci_lo[slot] = sub.ci_lo[kk];
        pe.ci_hi[slot] = sub.ci_hi[kk];
    }
    return pe;
}

CoefficientMetrics coefficient_metrics(const std::vector<PooledEstimate>& pooled,
                                       const std::array<double, 3>& truth) {
    if (pooled.empty()) throw std::invalid_argument("coefficient_metrics: no replicates");
    CoefficientMetrics m;
    const double R = static_cast<double>(pooled.size());
    for (int j = 0; j < 3; ++j) {
        double sum = 0.0, sq = 0.0, cov = 0.0;
        for (const auto& pe : pooled) {
            const double q = pe.qbar[j];
            sum += q - truth[static_cast<std::size_t>(j)];
            sq += (q - truth[static_cast<std::size_t>(j)]) * (q - truth[static_cast<std::size_t>(j)]);
            if (pe.dropped[static_cast<std::size_t>(j)]) {
                cov += (truth[static_cast<std::size_t>(j)] == 0.0) ? 1.0 : 0.0;
            } else if (truth[static_cast<std::size_t>(j)] >= pe.ci_lo[j] &&
                       truth[static_cast<std::size_t>(j)] <= pe.ci_hi[j]) {
                cov += 1.0;
            }
        }
        m.bias[static_cast<std::size_t>(j)] = sum / R;
        m.rmse[static_cast<std::size_t>(j)] = std::sqrt(sq / R);
        m.coverage[static_cast<std::size_t>(j)] = cov / R;
    }
    return m;
}

double quantile_type7(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile_type7: empty input");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - std::floor(h)) * (values[lo + 1] - values[lo]);
}

CvMseSummary aggregate_cvmse(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("aggregate_cvmse: empty input");
    CvMseSummary s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.variance = ss / static_cast<double>(values.size() - 1);
    } else {
        s.variance_degenerate = true;
    }
    s.q025 = quantile_type7(values, 0.025);
    s.q50 = quantile_type7(values, 0.5);
    s.q975 = quantile_type7(values, 0.975);
    return s;
}

QqCurve qq_reduce(const std::vector<std::vector<double>>& pred_medians_per_rep,
                  const std::vector<std::vector<double>>& true_y_per_rep) {
    if (pred_medians_per_rep.empty() || pred_medians_per_rep.size() != true_y_per_rep.size())
        throw std::invalid_argument("qq_reduce: replicate lists empty or mismatched");
    QqCurve curve;
    curve.true_q.assign(99, 0.0);
    curve.pred_q.assign(99, 0.0);
    const double R = static_cast<double>(pred_medians_per_rep.size());
    for (std::size_t r = 0; r < pred_medians_per_rep.size(); ++r) {
        for (int g = 0; g < 99; ++g) {
            const double p = (g + 1) / 100.0;
            curve.pred_q[static_cast<std::size_t>(g)] +=
                quantile_type7(pred_medians_per_rep[r], p);
            curve.true_q[static_cast<std::size_t>(g)] += quantile_type7(true_y_per_rep[r], p);
        }
    }
    for (int g = 0; g < 99; ++g) {
        curve.pred_q[static_cast<std::size_t>(g)] /= R;
        curve.true_q[static_cast<std::size_t>(g)] /= R;
    }
    return curve;
}

}  // namespace misim::pooling
