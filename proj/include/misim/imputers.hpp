// Six univariate multiple-imputation engines for x2 given (y, x1). The
// predictor matrix is congenial by construction: the frame never contains
// x2 itself.

#ifndef MISIM_IMPUTERS_HPP
#define MISIM_IMPUTERS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "misim/rngkit.hpp"
#include "misim/synthdata.hpp"

namespace misim::imputers {

enum class MethodId { T1, T2, T3, T4, T5, T6 };

constexpr int kMethodCount = 6;

/// Presentation order T1..T6 is fixed.
const std::vector<MethodId>& all_methods();
std::string method_name(MethodId m);        // "T1".."T6"
std::string method_description(MethodId m); // e.g. "deterministic-regression"

/// Regression frame for x2: response x2_obs on predictors (1, y, x1);
/// the same predictor rows for the missing slots.
struct ImputationModelFrame {
    Eigen::MatrixXd x_obs;   // n_obs x 3
    Eigen::VectorXd x2_obs;
    Eigen::MatrixXd x_mis;   // n_mis x 3
    std::vector<std::size_t> obs_rows;  // dataset row of each observed entry
    std::vector<std::size_t> mis_rows;  // dataset row of each missing entry

    std::size_t n_obs() const { return obs_rows.size(); }
    std::size_t n_mis() const { return mis_rows.size(); }
};

/// Builds the frame from a masked dataset. Requires >= 1 masked and >= 4
/// observed x2 rows.
ImputationModelFrame build_frame(const synth::Dataset& d);

struct CompletedDataset {
    synth::Dataset data;  // mask resolved, observed entries untouched
    MethodId method = MethodId::T1;
    int m = 0;            // imputation index in [1, M]
};

struct ImputerParams {
    int d_pool = 5;        // T4 donor pool size
    int n_trees = 10;      // T5 forest size
    int min_leaf = 5;      // T5 minimum leaf size
    int max_depth = 10;    // T5 depth cap
    double support_threshold = 0.5;  // selection rule, used downstream
    bool t4_force_beta_hat = false;  // test hook: T4 uses beta-hat for missing rows
};

/// M completed datasets; imputation m draws from s.child("imp", m).
std::vector<CompletedDataset> impute(MethodId method, const synth::Dataset& d, int M,
                                     const rng::Stream& s, const ImputerParams& params = {});

// Per-method fills, one value per missing row in frame order.
std::vector<double> impute_T1_norm_predict(const ImputationModelFrame& f);
/// `selected_out`, when non-null, receives the kept predictor column indices
/// (0 = intercept, 1 = y, 2 = x1) of the stage-1 selection.
std::vector<double> impute_T2_lasso_select_norm(const ImputationModelFrame& f, rng::Stream& s,
                                                std::vector<int>* selected_out = nullptr);
std::vector<double> impute_T3_norm_boot(const ImputationModelFrame& f, rng::Stream& s);
std::vector<double> impute_T4_pmm(const ImputationModelFrame& f, rng::Stream& s, int d_pool = 5,
                                  bool force_beta_hat = false);
std::vector<double> impute_T5_rf(const ImputationModelFrame& f, rng::Stream& s, int n_trees = 10,
                                 int min_leaf = 5, int max_depth = 10);
std::vector<double> impute_T6_midastouch(const ImputationModelFrame& f, rng::Stream& s);

}  // namespace misim::imputers

#endif
