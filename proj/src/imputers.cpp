#include "misim/imputers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "misim/linmod.hpp"

namespace misim::imputers {

namespace {

struct FrameFit {
    Eigen::VectorXd beta;
    double rss = 0.0;
    Eigen::MatrixXd xtx_inv;
    int q = 0;  // number of fitted parameters
};

std::optional<FrameFit> try_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() <= X.cols()) return std::nullopt;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) return std::nullopt;
    FrameFit fit;
    fit.beta = qr.solve(y);
    fit.rss = (y - X * fit.beta).squaredNorm();
    fit.xtx_inv = (X.transpose() * X).inverse();
    fit.q = static_cast<int>(X.cols());
    return fit;
}

std::vector<double> mean_fill(const ImputationModelFrame& f) {
    std::cerr << "misim: singular imputation design; falling back to observed-mean fill\n";
    return std::vector<double>(f.n_mis(), f.x2_obs.mean());
}

double draw_gamma(rng::Stream& s, double shape) {
    if (shape < 1.0) {
        const double u = s.next_uniform();
        return draw_gamma(s, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze method.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = s.next_normal();
        const double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        const double v = t * t * t;
        const double u = s.next_uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double draw_chi_squared(rng::Stream& s, double dof) { return 2.0 * draw_gamma(s, dof / 2.0); }

struct PosteriorDraw {
    Eigen::VectorXd beta_star;
    double sigma_star = 0.0;
};

// sigma*^2 = RSS / chi2_{n-q}; beta* ~ N(beta_hat, sigma*^2 (X'X)^-1).
PosteriorDraw bayes_draw(const FrameFit& fit, Eigen::Index n_obs, rng::Stream& s) {
    const double nu = static_cast<double>(n_obs - fit.q);
    PosteriorDraw d;
    const double chi2 = draw_chi_squared(s, nu);
    d.sigma_star = std::sqrt(fit.rss / std::max(chi2, 1e-300));
    Eigen::LLT<Eigen::MatrixXd> llt(fit.xtx_inv);
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::VectorXd z(fit.beta.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = s.next_normal();
    d.beta_star = fit.beta + d.sigma_star * (L * z);
    return d;
}

std::size_t draw_categorical(rng::Stream& s, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double u = s.next_uniform() * total;
    double acc = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        acc += weights[j];
        if (u < acc) return j;
    }
    return weights.size() - 1;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(cols[k]);
    return out;
}

}  // namespace

const std::vector<MethodId>& all_methods() {
    static const std::vector<MethodId> ms = {MethodId::T1, MethodId::T2, MethodId::T3,
                                             MethodId::T4, MethodId::T5, MethodId::T6};
    return ms;
}

std::string method_name(MethodId m) {
    switch (m) {
        case MethodId::T1: return "T1";
        case MethodId::T2: return "T2";
        case MethodId::T3: return "T3";
        case MethodId::T4: return "T4";
        case MethodId::T5: return "T5";
        case MethodId::T6: return "T6";
    }
    return "?";
}

std::string method_description(MethodId m) {
    switch (m) {
        case MethodId::T1: return "deterministic-regression";
        case MethodId::T2: return "lasso-select-bayes-regression";
        case MethodId::T3: return "bootstrap-regression";
        case MethodId::T4: return "predictive-mean-matching";
        case MethodId::T5: return "random-forest-donor";
        case MethodId::T6: return "distance-aided-pmm";
    }
    return "?";
}

ImputationModelFrame build_frame(const synth::Dataset& d) {
    ImputationModelFrame f;
    for (std::size_t i = 0; i < d.n(); ++i)
        (d.x2_mask[i] ? f.mis_rows : f.obs_rows).push_back(i);
    if (f.mis_rows.empty()) throw std::invalid_argument("build_frame: no masked rows");
    if (f.obs_rows.size() < 4)
        throw std::invalid_argument("build_frame: fewer than 4 observed x2 rows");
    // Predictors are (1, y, x1) only: x2 never enters its own imputation model.
    auto fill = [&](const std::vector<std::size_t>& rows, Eigen::MatrixXd& X) {
        X.resize(static_cast<Eigen::Index>(rows.size()), 3);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            X(static_cast<Eigen::Index>(i), 0) = 1.0;
            X(static_cast<Eigen::Index>(i), 1) = d.y[rows[i]];
            X(static_cast<Eigen::Index>(i), 2) = d.x1[rows[i]];
        }
    };
    fill(f.obs_rows, f.x_obs);
    fill(f.mis_rows, f.x_mis);
    f.x2_obs.resize(static_cast<Eigen::Index>(f.obs_rows.size()));
    for (std::size_t i = 0; i < f.obs_rows.size(); ++i)
        f.x2_obs[static_cast<Eigen::Index>(i)] = d.x2[f.obs_rows[i]];
    return f;
}

std::vector<double> impute_T1_norm_predict(const ImputationModelFrame& f) {
    const auto fit = try_ols(f.x_obs, f.x2_obs);
    if (!fit) return mean_fill(f);
    Eigen::VectorXd pred = f.x_mis * fit->beta;
    return {pred.data(), pred.data() + pred.size()};
}

std::vector<double> impute_T2_lasso_select_norm(const ImputationModelFrame& f, rng::Stream& s,
                                                std::vector<int>* selected_out) {
    const auto n_obs = static_cast<Eigen::Index>(f.n_obs());

    // Stage 1: lasso selection of (y, x1) by 5-fold CV within the observed rows.
    std::vector<int> keep = {0};
    if (n_obs >= 5) {
        linmod::DesignMatrix dm;
        dm.X = f.x_obs;
        dm.y = f.x2_obs;
        rng::Stream fs = s.child("lassofolds", 0);
        const synth::FoldMap folds = synth::assign_folds(f.n_obs(), 5, fs);
        try {
            // Selection uses the sparser one-SE lambda: the minimizing lambda
            // routinely keeps pure-noise predictors with tiny slopes.
            const linmod::CvResult cv = linmod::cv_lambda_select(dm, 1.0, folds);
            const linmod::EnFit lasso = linmod::fit_elastic_net(dm, 1.0, cv.lambda_1se);
            for (int j : lasso.selected) keep.push_back(j);
        } catch (const std::exception&) {
            keep = {0, 1, 2};  // degenerate selection problem: keep everything
        }
    } else {
        keep = {0, 1, 2};
    }

    if (selected_out) *selected_out = keep;

    // Stage 2: Bayesian normal regression on the selected set.
    const Eigen::MatrixXd Xo = select_columns(f.x_obs, keep);
    const auto fit = try_ols(Xo, f.x2_obs);
    if (!fit) return mean_fill(f);
    const PosteriorDraw pd = bayes_draw(*fit, n_obs, s);
    const Eigen::MatrixXd Xm = select_columns(f.x_mis, keep);
    std::vector<double> fills(f.n_mis());
    const Eigen::VectorXd mu = Xm * pd.beta_star;
    for (std::size_t i = 0; i < fills.size(); ++i)
        fills[i] = mu[static_cast<Eigen::Index>(i)] + pd.sigma_star * s.next_normal();
    return fills;
}

std::vector<double> impute_T3_norm_boot(const ImputationModelFrame& f, rng::Stream& s) {
    const std::size_t n_obs = f.n_obs();
    std::optional<FrameFit> fit;
    for (int attempt = 0; attempt < 10 && !fit; ++attempt) {
        Eigen::MatrixXd Xb(f.x_obs.rows(), f.x_obs.cols());
        Eigen::VectorXd yb(f.x2_obs.size());
        for (std::size_t i = 0; i < n_obs; ++i) {
            const auto r = static_cast<Eigen::Index>(s.uniform_below(n_obs));
            Xb.row(static_cast<Eigen::Index>(i)) = f.x_obs.row(r);
            yb[static_cast<Eigen::Index>(i)] = f.x2_obs[r];
        }
        fit = try_ols(Xb, yb);
    }
    if (!fit) return mean_fill(f);
    const double sigma_b =
        std::sqrt(fit->rss / static_cast<double>(static_cast<int>(n_obs) - fit->q));
    std::vector<double> fills(f.n_mis());
    const Eigen::VectorXd mu = f.x_mis * fit->beta;
    for (std::size_t i = 0; i < fills.size(); ++i)
        fills[i] = mu[static_cast<Eigen::Index>(i)] + sigma_b * s.next_normal();
    return fills;
}

std::vector<double> impute_T4_pmm(const ImputationModelFrame& f, rng::Stream& s, int d_pool,
                                  bool force_beta_hat) {
    const auto n_obs = static_cast<Eigen::Index>(f.n_obs());
    if (n_obs < d_pool) throw std::invalid_argument("impute_T4_pmm: n_obs < d_pool");
    const auto fit = try_ols(f.x_obs, f.x2_obs);
    if (!fit) return mean_fill(f);
    Eigen::VectorXd beta_star = fit->beta;
    if (!force_beta_hat) beta_star = bayes_draw(*fit, n_obs, s).beta_star;

    const Eigen::VectorXd eta_obs = f.x_obs * fit->beta;   // type-1 matching
    const Eigen::VectorXd eta_mis = f.x_mis * beta_star;
    std::vector<double> fills(f.n_mis());
    std::vector<std::size_t> order(f.n_obs());
    for (std::size_t i = 0; i < fills.size(); ++i) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        const double target = eta_mis[static_cast<Eigen::Index>(i)];
        // Ties break by ascending donor row index.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::fabs(eta_obs[static_cast<Eigen::Index>(a)] - target) <
                   std::fabs(eta_obs[static_cast<Eigen::Index>(b)] - target);
        });
        const std::size_t pick = s.uniform_below(static_cast<std::uint64_t>(d_pool));
        fills[i] = f.x2_obs[static_cast<Eigen::Index>(order[pick])];
    }
    return fills;
}

namespace {

struct TreeNode {
    int split_var = -1;        // 1 = y, 2 = x1; -1 for a leaf
    double split_value = 0.0;
    int left = -1;
    int right = -1;
    std::vector<Eigen::Index> rows;  // bootstrap-sample rows, leaves only
};

struct Tree {
    std::vector<TreeNode> nodes;
    std::vector<Eigen::Index> sample;  // bootstrap row -> observed row

    int route(double y, double x1) const {
        int node = 0;
        while (nodes[node].split_var >= 0) {
            const double v = (nodes[node].split_var == 1) ? y : x1;
            node = (v <= nodes[node].split_value) ? nodes[node].left : nodes[node].right;
        }
        return node;
    }
};

// Best SSE-reducing split over midpoints of sorted unique values of one
// randomly chosen predictor; both children must hold >= min_leaf rows.
bool find_split(const ImputationModelFrame& f, const Tree& t,
                const std::vector<Eigen::Index>& rows, int var, int min_leaf, double& best_value) {
    std::vector<std::pair<double, double>> vals;  // (predictor, x2)
    vals.reserve(rows.size());
    for (Eigen::Index r : rows) {
        const Eigen::Index o = t.sample[static_cast<std::size_t>(r)];
        vals.emplace_back(f.x_obs(o, var), f.x2_obs[o]);
    }
    std::sort(vals.begin(), vals.end());
    const std::size_t n = vals.size();
    double total = 0.0;
    for (auto& [p, v] : vals) total += v;

    double best_score = -1.0;
    double left_sum = 0.0;
    bool found = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf))
            continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (score > best_score) {
            best_score = score;
            best_value = 0.5 * (vals[i].first + vals[i + 1].first);
            found = true;
        }
    }
    return found;
}

int grow(Tree& t, const ImputationModelFrame& f, std::vector<Eigen::Index> rows, int depth,
         int min_leaf, int max_depth, rng::Stream& s) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    bool split_ok = false;
    int var = 0;
    double value = 0.0;
    if (depth < max_depth && rows.size() >= 2 * static_cast<std::size_t>(min_leaf)) {
        var = (s.uniform_below(2) == 0) ? 1 : 2;  // 1 random candidate of the 2 predictors
        split_ok = find_split(f, t, rows, var, min_leaf, value);
    }
    if (!split_ok) {
        t.nodes[id].rows = std::move(rows);
        return id;
    }
    std::vector<Eigen::Index> left, right;
    for (Eigen::Index r : rows) {
        const Eigen::Index o = t.sample[static_cast<std::size_t>(r)];
        (f.x_obs(o, var) <= value ? left : right).push_back(r);
    }
    t.nodes[id].split_var = var;
    t.nodes[id].split_value = value;
    const int l = grow(t, f, std::move(left), depth + 1, min_leaf, max_depth, s);
    t.nodes[id].left = l;
    const int r = grow(t, f, std::move(right), depth + 1, min_leaf, max_depth, s);
    t.nodes[id].right = r;
    return id;
}

}  // namespace

std::vector<double> impute_T5_rf(const ImputationModelFrame& f, rng::Stream& s, int n_trees,
                                 int min_leaf, int max_depth) {
    const std::size_t n_obs = f.n_obs();
    if (n_obs < 8) throw std::invalid_argument("impute_T5_rf: n_obs must be >= 8");
    std::vector<Tree> forest(static_cast<std::size_t>(n_trees));
    for (int t = 0; t < n_trees; ++t) {
        rng::Stream ts = s.child("tree", t);
        Tree& tree = forest[static_cast<std::size_t>(t)];
        tree.sample.resize(n_obs);
        std::vector<Eigen::Index> rows(n_obs);
        for (std::size_t i = 0; i < n_obs; ++i) {
            tree.sample[i] = static_cast<Eigen::Index>(ts.uniform_below(n_obs));
            rows[i] = static_cast<Eigen::Index>(i);
        }
        grow(tree, f, std::move(rows), 0, min_leaf, max_depth, ts);
    }
    std::vector<double> fills(f.n_mis());
    for (std::size_t i = 0; i < fills.size(); ++i) {
        const Tree& tree = forest[s.uniform_below(static_cast<std::uint64_t>(n_trees))];
        const auto ii = static_cast<Eigen::Index>(i);
        const int leaf = tree.route(f.x_mis(ii, 1), f.x_mis(ii, 2));
        const auto& rows = tree.nodes[static_cast<std::size_t>(leaf)].rows;
        const Eigen::Index pick = rows[s.uniform_below(rows.size())];
        fills[i] = f.x2_obs[tree.sample[static_cast<std::size_t>(pick)]];
    }
    return fills;
}

std::vector<double> impute_T6_midastouch(const ImputationModelFrame& f, rng::Stream& s) {
    const std::size_t n_obs = f.n_obs();
    if (n_obs < 3) throw std::invalid_argument("impute_T6_midastouch: n_obs must be >= 3");
    std::optional<FrameFit> fit;
    for (int attempt = 0; attempt < 10 && !fit; ++attempt) {
        Eigen::MatrixXd Xb(f.x_obs.rows(), f.x_obs.cols());
        Eigen::VectorXd yb(f.x2_obs.size());
        for (std::size_t i = 0; i < n_obs; ++i) {
            const auto r = static_cast<Eigen::Index>(s.uniform_below(n_obs));
            Xb.row(static_cast<Eigen::Index>(i)) = f.x_obs.row(r);
            yb[static_cast<Eigen::Index>(i)] = f.x2_obs[r];
        }
        fit = try_ols(Xb, yb);
    }
    if (!fit) return mean_fill(f);
    const Eigen::VectorXd eta_obs = f.x_obs * fit->beta;
    const Eigen::VectorXd eta_mis = f.x_mis * fit->beta;
    const double range = eta_obs.maxCoeff() - eta_obs.minCoeff();
    const double delta = (range > 0.0) ? 1e-6 * range : 1e-6;
    std::vector<double> fills(f.n_mis());
    std::vector<double> weights(n_obs);
    for (std::size_t i = 0; i < fills.size(); ++i) {
        const double target = eta_mis[static_cast<Eigen::Index>(i)];
        for (std::size_t j = 0; j < n_obs; ++j)
            weights[j] = 1.0 / (std::fabs(eta_obs[static_cast<Eigen::Index>(j)] - target) + delta);
        fills[i] = f.x2_obs[static_cast<Eigen::Index>(draw_categorical(s, weights))];
    }
    return fills;
}

std::vector<CompletedDataset> impute(MethodId method, const synth::Dataset& d, int M,
                                     const rng::Stream& s, const ImputerParams& params) {
    if (M < 1) throw std::invalid_argument("impute: M must be >= 1");
    const ImputationModelFrame f = build_frame(d);

    // T1 is deterministic: compute the fills once and reuse.
    std::vector<double> t1_fills;
    if (method == MethodId::T1) t1_fills = impute_T1_norm_predict(f);

    std::vector<CompletedDataset> out;
    out.reserve(static_cast<std::size_t>(M));
    for (int m = 1; m <= M; ++m) {
        rng::Stream sm = s.child("imp", m);
        std::vector<double> fills;
        switch (method) {
            case MethodId::T1: fills = t1_fills; break;
            case MethodId::T2: fills = impute_T2_lasso_select_norm(f, sm); break;
            case MethodId::T3: fills = impute_T3_norm_boot(f, sm); break;
            case MethodId::T4:
                fills = impute_T4_pmm(f, sm, params.d_pool, params.t4_force_beta_hat);
                break;
            case MethodId::T5:
                fills = impute_T5_rf(f, sm, params.n_trees, params.min_leaf, params.max_depth);
                break;
            case MethodId::T6: fills = impute_T6_midastouch(f, sm); break;
        }
        CompletedDataset cd;
        cd.data = d;
        cd.method = method;
        cd.m = m;
        for (std::size_t i = 0; i < f.mis_rows.size(); ++i) {
            cd.data.x2[f.mis_rows[i]] = fills[i];
            cd.data.x2_mask[f.mis_rows[i]] = false;
        }
        out.push_back(std::move(cd));
    }
    return out;
}

}  // namespace misim::imputers
