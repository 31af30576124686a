// Monte Carlo orchestration: scenario grid expansion, paired clean /
// contaminated replicates with deterministic substreams, and reduction to
// per-scenario summaries.

#ifndef MISIM_MCENGINE_HPP
#define MISIM_MCENGINE_HPP

#include <array>
#include <string>
#include <vector>

#include "misim/imputers.hpp"
#include "misim/pooling.hpp"
#include "misim/rngkit.hpp"
#include "misim/synthdata.hpp"

namespace misim::mc {

enum class BranchId { clean_ols, contaminated_en };

std::string branch_name(BranchId b);  // "clean-ols" / "contaminated-en"

struct Scenario {
    std::size_t n = 40;
    double p_miss = 0.25;
    double p_ext = 0.05;
    double rho = 0.6;
    int M = 5;
    int n_sim = 50;
    std::vector<imputers::MethodId> methods = imputers::all_methods();
    std::vector<BranchId> branches = {BranchId::clean_ols, BranchId::contaminated_en};

    /// Checks factor levels against the design grid (unless allow_custom) and
    /// structural preconditions (mask size >= 1, enough observed rows).
    void validate(bool allow_custom) const;

    /// Root stream path encoding the scenario coordinates, so results do not
    /// depend on which other scenarios run alongside.
    rng::StreamPath stream_path() const;

    /// Stream path keyed by the factors that shape the data pair: the baseline
    /// sample depends on (n, rho) and the contaminated twin additionally on
    /// p_ext. Scenarios differing only in p_miss, M, or n_sim therefore share
    /// one data pair, which keeps comparisons across missingness levels paired.
    rng::StreamPath data_path() const;

    std::string key() const;  // compact label for filenames and logs
};

struct GridSpec {
    std::vector<std::size_t> n_levels;
    std::vector<double> p_miss_levels;
    std::vector<double> p_ext_levels;
    std::vector<double> rho_levels;
    std::vector<int> m_levels;
    std::vector<int> n_sim_levels;
    std::vector<imputers::MethodId> methods = imputers::all_methods();
    std::vector<BranchId> branches = {BranchId::clean_ols, BranchId::contaminated_en};
};

/// Cartesian product of the requested levels, deduplicated, in stable order
/// (sorted by n, p_ext, p_miss, rho, M, n_sim). Throws on an empty factor
/// list; logs a warning when duplicate levels are dropped.
std::vector<Scenario> expand_grid(const GridSpec& spec);

struct MethodBranchRecord {
    imputers::MethodId method = imputers::MethodId::T1;
    BranchId branch = BranchId::clean_ols;
    double cv_mse = 0.0;  // mean over the M completions
    pooling::PooledEstimate pooled;
    pooling::SelectionOutcome selection;  // EN branch only
    bool has_selection = false;
    std::vector<double> pred_median;  // per-observation median over M predictions
};

struct ReplicateRecord {
    int rep = 0;
    std::vector<MethodBranchRecord> cells;  // branch-major, then method order
    std::array<std::vector<double>, 2> true_y;  // indexed by BranchId
};

struct MethodBranchSummary {
    imputers::MethodId method = imputers::MethodId::T1;
    BranchId branch = BranchId::clean_ols;
    pooling::CoefficientMetrics coef;
    pooling::CvMseSummary mse;
    pooling::QqCurve qq;
};

struct ScenarioSummary {
    Scenario scenario;
    std::vector<MethodBranchSummary> rows;  // branch-major, then method order
};

/// Executes one replicate of the Algorithm-1 body. Throws with full context
/// on an unrecoverable fit error.
ReplicateRecord run_replicate(const Scenario& sc, int rep, rng::MasterSeed seed,
                              const imputers::ImputerParams& params = {});

struct ScenarioResult {
    ScenarioSummary summary;
    std::vector<ReplicateRecord> replicates;  // populated when keep_replicates
};

/// Runs n_sim replicates (replicate-level parallelism) and reduces them. A
/// failed replicate is retried once with a "retry" substream suffix, then the
/// scenario aborts. Results are independent of the worker count.
ScenarioResult run_scenario(const Scenario& sc, rng::MasterSeed seed, int workers,
                            const imputers::ImputerParams& params = {},
                            bool keep_replicates = false, bool progress = false);

}  // namespace misim::mc

#endif
