#include "misim/mcengine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "misim/linmod.hpp"

namespace misim::mc {

namespace {

constexpr int kFolds = 5;

const std::vector<std::size_t> kLegalN = {20, 40, 80, 200, 500};
const std::vector<double> kLegalPMiss = {0.05, 0.10, 0.25, 0.30};
const std::vector<double> kLegalPExt = {0.03, 0.04, 0.05, 0.10, 0.15, 0.30};
const std::vector<double> kLegalRho = {0.0, 0.6};
const std::vector<int> kLegalM = {5, 10};
const std::vector<int> kLegalNSim = {50, 300, 1000, 3000};

template <typename T>
bool is_level(const std::vector<T>& levels, T v) {
    return std::find(levels.begin(), levels.end(), v) != levels.end();
}

bool is_level_close(const std::vector<double>& levels, double v) {
    for (double l : levels)
        if (std::fabs(l - v) < 1e-12) return true;
    return false;
}

std::int64_t scale4(double v) { return static_cast<std::int64_t>(std::llround(v * 1e4)); }

MethodBranchRecord run_cell(const Scenario& sc, const synth::Dataset& masked,
                            const synth::FoldMap& folds, imputers::MethodId method,
                            BranchId branch, const rng::Stream& stream,
                            const imputers::ImputerParams& params) {
    MethodBranchRecord rec;
    rec.method = method;
    rec.branch = branch;
    const auto completions = imputers::impute(method, masked, sc.M, stream, params);
    const auto n = masked.n();

    double mse_sum = 0.0;
    std::vector<std::vector<double>> preds;  // [m][obs]
    preds.reserve(completions.size());

    if (branch == BranchId::clean_ols) {
        std::vector<Eigen::VectorXd> estimates;
        std::vector<Eigen::MatrixXd> covs;
        for (const auto& cd : completions) {
            const linmod::DesignMatrix dm = linmod::make_design(cd.data);
            const linmod::OlsFit fit = linmod::fit_ols(dm);
            mse_sum += linmod::cv_mse(linmod::Branch::ols, dm, folds);
            estimates.push_back(fit.coef);
            covs.push_back(fit.cov);
            const Eigen::VectorXd yhat = dm.X * fit.coef;
            preds.emplace_back(yhat.data(), yhat.data() + yhat.size());
        }
        rec.pooled = pooling::rubin_pool(estimates, covs, static_cast<int>(n) - 3);
    } else {
        std::vector<std::vector<int>> selections;
        for (const auto& cd : completions) {
            const linmod::DesignMatrix dm = linmod::make_design(cd.data);
            const linmod::CvResult cv = linmod::cv_lambda_select(dm, 0.5, folds);
            mse_sum += cv.cv_mse_at_min;
            // The reported error is the curve value at the minimizing lambda;
            // the fit driving support selection uses the sparser one-SE lambda
            // so that weak predictors are actually dropped.
            const linmod::EnFit fit = linmod::fit_elastic_net(dm, 0.5, cv.lambda_1se);
            selections.push_back(fit.selected);
            const Eigen::VectorXd yhat = dm.X * fit.coef;
            preds.emplace_back(yhat.data(), yhat.data() + yhat.size());
        }
        rec.selection = pooling::select_support(selections, params.support_threshold);
        rec.has_selection = true;
        rec.pooled = pooling::post_selection_pool(completions, rec.selection);
    }
    rec.cv_mse = mse_sum / static_cast<double>(completions.size());

    rec.pred_median.resize(n);
    std::vector<double> column(completions.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < completions.size(); ++m) column[m] = preds[m][i];
        rec.pred_median[i] = pooling::quantile_type7(column, 0.5);
    }
    return rec;
}

ReplicateRecord run_replicate_at(const Scenario& sc, int rep, rng::MasterSeed seed,
                                 const imputers::ImputerParams& params,
                                 const rng::StreamPath& rep_path) {
    ReplicateRecord rr;
    rr.rep = rep;

    synth::GenParams gp;
    gp.rho = sc.rho;

    // The data pair hangs off the data-factor path, not the replicate: one
    // baseline sample and one contaminated twin are shared by all replicates,
    // and only masks, folds, and imputation draws vary from replicate to
    // replicate. Re-deriving the streams here keeps the function pure.
    const rng::StreamPath data_path = sc.data_path();
    rng::Stream sa = rng::derive_stream(seed, data_path.child("baseline", 0));
    const synth::Dataset clean = synth::generate_baseline(sc.n, gp, sa);
    rng::Stream sc_stream =
        rng::derive_stream(seed, data_path.child("pext", scale4(sc.p_ext)).child("contam", 0));
    const synth::Dataset contaminated = synth::contaminate(clean, sc.p_ext, sc_stream);

    // Substream B: one fold map reused by every CV call in this replicate.
    rng::Stream sb = rng::derive_stream(seed, rep_path.child("folds", 0));
    const synth::FoldMap folds = synth::assign_folds(sc.n, kFolds, sb);

    // Substreams C, D: independent MCAR masks per copy.
    rng::Stream sm_clean = rng::derive_stream(seed, rep_path.child("mask-clean", 0));
    const synth::Dataset masked_clean = synth::apply_mcar_mask(clean, sc.p_miss, sm_clean);
    rng::Stream sm_cont = rng::derive_stream(seed, rep_path.child("mask-cont", 0));
    const synth::Dataset masked_cont = synth::apply_mcar_mask(contaminated, sc.p_miss, sm_cont);

    for (BranchId branch : sc.branches) {
        const synth::Dataset& masked =
            (branch == BranchId::clean_ols) ? masked_clean : masked_cont;
        rr.true_y[static_cast<std::size_t>(branch)] = masked.y;
        for (imputers::MethodId method : sc.methods) {
            // Substream E_{r,t,d}.
            const rng::Stream se = rng::derive_stream(
                seed, rep_path.child("branch", static_cast<int>(branch))
                          .child("method", static_cast<int>(method)));
            rr.cells.push_back(run_cell(sc, masked, folds, method, branch, se, params));
        }
    }
    return rr;
}

}  // namespace

std::string branch_name(BranchId b) {
    return b == BranchId::clean_ols ? "clean-ols" : "contaminated-en";
}

void Scenario::validate(bool allow_custom) const {
    if (!allow_custom) {
        std::ostringstream bad;
        if (!is_level(kLegalN, n)) bad << " n=" << n;
        if (!is_level_close(kLegalPMiss, p_miss)) bad << " p_miss=" << p_miss;
        if (!is_level_close(kLegalPExt, p_ext)) bad << " p_ext=" << p_ext;
        if (!is_level_close(kLegalRho, rho)) bad << " rho=" << rho;
        if (!is_level(kLegalM, M)) bad << " M=" << M;
        if (!is_level(kLegalNSim, n_sim)) bad << " n_sim=" << n_sim;
        if (!bad.str().empty())
            throw std::invalid_argument("scenario has factor levels outside the design grid:" +
                                        bad.str() + " (use --allow-custom to override)");
    }
    if (methods.empty() || branches.empty())
        throw std::invalid_argument("scenario needs at least one method and one branch");
    const long k_miss = synth::round_half_away(static_cast<double>(n) * p_miss);
    if (k_miss < 1) throw std::invalid_argument("scenario: round(n*p_miss) must be >= 1");
    if (k_miss > static_cast<long>(n) - 4)
        throw std::invalid_argument("scenario: too few observed rows would remain after masking");
    if (synth::round_half_away(static_cast<double>(n) * p_ext) < 1)
        throw std::invalid_argument("scenario: round(n*p_ext) must be >= 1");
    if (n < kFolds) throw std::invalid_argument("scenario: n < K");
}

rng::StreamPath Scenario::data_path() const {
    return rng::StreamPath{}
        .child("n", static_cast<std::int64_t>(n))
        .child("rho", scale4(rho));
}

rng::StreamPath Scenario::stream_path() const {
    return rng::StreamPath{}
        .child("n", static_cast<std::int64_t>(n))
        .child("pmiss", scale4(p_miss))
        .child("pext", scale4(p_ext))
        .child("rho", scale4(rho))
        .child("M", M)
        .child("nsim", n_sim);
}

std::string Scenario::key() const {
    std::ostringstream out;
    out << "n" << n << "_pext" << p_ext << "_pmiss" << p_miss << "_rho" << rho << "_M" << M
        << "_nsim" << n_sim;
    return out.str();
}

std::vector<Scenario> expand_grid(const GridSpec& spec) {
    auto dedup = [](auto levels, const char* name) {
        auto sorted = levels;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        if (sorted.size() != levels.size())
            std::cerr << "misim: duplicate " << name << " levels deduplicated\n";
        if (sorted.empty())
            throw std::invalid_argument(std::string("expand_grid: empty factor list: ") + name);
        return sorted;
    };
    const auto ns = dedup(spec.n_levels, "n");
    const auto pms = dedup(spec.p_miss_levels, "p_miss");
    const auto pes = dedup(spec.p_ext_levels, "p_ext");
    const auto rhos = dedup(spec.rho_levels, "rho");
    const auto ms = dedup(spec.m_levels, "M");
    const auto nsims = dedup(spec.n_sim_levels, "n_sim");
    if (spec.methods.empty()) throw std::invalid_argument("expand_grid: empty method list");
    if (spec.branches.empty()) throw std::invalid_argument("expand_grid: empty branch list");

    std::vector<Scenario> out;
    for (std::size_t n : ns)
        for (double pe : pes)
            for (double pm : pms)
                for (double rho : rhos)
                    for (int M : ms)
                        for (int ns_ : nsims) {
                            Scenario sc;
                            sc.n = n;
                            sc.p_ext = pe;
                            sc.p_miss = pm;
                            sc.rho = rho;
                            sc.M = M;
                            sc.n_sim = ns_;
                            sc.methods = spec.methods;
                            sc.branches = spec.branches;
                            out.push_back(std::move(sc));
                        }
    return out;
}

ReplicateRecord run_replicate(const Scenario& sc, int rep, rng::MasterSeed seed,
                              const imputers::ImputerParams& params) {
    const rng::StreamPath rep_path = sc.stream_path().child("rep", rep);
    try {
        return run_replicate_at(sc, rep, seed, params, rep_path);
    } catch (const std::exception& first) {
        // One retry on a fresh substream; silent dropping would bias summaries.
        try {
            return run_replicate_at(sc, rep, seed, params, rep_path.child("retry", 1));
        } catch (const std::exception& second) {
            std::ostringstream msg;
            msg << "replicate failed twice [scenario " << sc.key() << ", rep " << rep
                << "]: " << first.what() << " / retry: " << second.what();
            throw std::runtime_error(msg.str());
        }
    }
}

ScenarioResult run_scenario(const Scenario& sc, rng::MasterSeed seed, int workers,
                            const imputers::ImputerParams& params, bool keep_replicates,
                            bool progress) {
    if (workers < 1) workers = 1;
    std::vector<ReplicateRecord> records(static_cast<std::size_t>(sc.n_sim));
    std::atomic<int> next{1};
    std::atomic<int> done{0};
    std::mutex err_mutex;
    std::string error;
    const auto t0 = std::chrono::steady_clock::now();

    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r > sc.n_sim) return;
            {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!error.empty()) return;
            }
            try {
                records[static_cast<std::size_t>(r - 1)] = run_replicate(sc, r, seed, params);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (error.empty()) error = e.what();
                return;
            }
            const int d = done.fetch_add(1) + 1;
            if (progress && (d % 10 == 0 || d == sc.n_sim)) {
                const double secs =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                const double rate = d / std::max(secs, 1e-9);
                std::lock_guard<std::mutex> lock(err_mutex);
                std::cerr << "misim: " << sc.key() << " " << d << "/" << sc.n_sim << " replicates, "
                          << rate << "/s, ETA " << (sc.n_sim - d) / std::max(rate, 1e-9) << "s\n";
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(workers, sc.n_sim); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (!error.empty()) throw std::runtime_error("scenario aborted: " + error);

    // Reduction is sequential in replicate order: independent of scheduling.
    ScenarioResult result;
    result.summary.scenario = sc;
    std::size_t cell = 0;
    for (BranchId branch : sc.branches) {
        for (imputers::MethodId method : sc.methods) {
            MethodBranchSummary row;
            row.method = method;
            row.branch = branch;
            std::vector<pooling::PooledEstimate> pooled;
            std::vector<double> mses;
            std::vector<std::vector<double>> preds, trues;
            for (const auto& rr : records) {
                const MethodBranchRecord& rec = rr.cells[cell];
                pooled.push_back(rec.pooled);
                mses.push_back(rec.cv_mse);
                preds.push_back(rec.pred_median);
                trues.push_back(rr.true_y[static_cast<std::size_t>(branch)]);
            }
            row.coef = pooling::coefficient_metrics(pooled);
            row.mse = pooling::aggregate_cvmse(mses);
            row.qq = pooling::qq_reduce(preds, trues);
            result.summary.rows.push_back(std::move(row));
            ++cell;
        }
    }
    if (keep_replicates) result.replicates = std::move(records);
    return result;
}

}  // namespace misim::mc
