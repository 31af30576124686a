// Baseline sample generation, casewise +-3s contamination, MCAR masks on x2,
// and balanced K-fold assignment. All operations are pure given their stream.

#ifndef MISIM_SYNTHDATA_HPP
#define MISIM_SYNTHDATA_HPP

#include <cstdint>
#include <vector>

#include "misim/rngkit.hpp"

namespace misim::synth {

struct GenParams {
    double beta0 = 1.0;
    double beta1 = 0.5;
    double beta2 = 1.5;
    double sigma_y = 1.5;
    double mu1 = 10.0;
    double sigma1 = 2.0;
    double mu2 = 5.0;
    double sigma2 = 1.5;
    double rho = 0.0;  // Pearson correlation of (x1, x2), |rho| <= 1

    void validate() const;
};

/// n x 3 table (y, x1, x2) with a missingness mask on x2 only.
struct Dataset {
    std::vector<double> y;
    std::vector<double> x1;
    std::vector<double> x2;
    std::vector<bool> x2_mask;                 // true = missing
    std::vector<std::size_t> contaminated_rows;  // empty for clean data

    std::size_t n() const { return y.size(); }
    bool is_contaminated() const { return !contaminated_rows.empty(); }
    std::size_t n_masked() const;
};

/// Length-n vector of fold ids in [0,K); sizes differ by at most one.
struct FoldMap {
    std::vector<int> assignment;
    int K = 0;
};

/// round(x) with halves away from zero, as in k = round(n * P).
long round_half_away(double x);

/// x1 ~ N(mu1, sigma1^2); x2 conditional on x1 to induce rho; y linear in
/// (x1, x2) plus N(0, sigma_y^2) noise. Requires n >= 4.
Dataset generate_baseline(std::size_t n, const GenParams& p, rng::Stream& s);

/// Replace round(n*p_ext) rows, selected uniformly without replacement, by
/// vbar +- 3*s_v componentwise in every variable. Moments are computed on the
/// pre-contamination sample (n-1 denominator); signs alternate +,-,... over
/// the selected rows in ascending index order. Requires a clean input and
/// 0 < p_ext < 1.
Dataset contaminate(const Dataset& d, double p_ext, rng::Stream& s);

/// Mask exactly round(n*p_miss) entries of x2 uniformly at random. Requires
/// 0 < p_miss < 1 and round(n*p_miss) <= n-4.
Dataset apply_mcar_mask(const Dataset& d, double p_miss, rng::Stream& s);

/// Balanced random partition of [0,n) into K folds. Requires K >= 2, n >= K.
FoldMap assign_folds(std::size_t n, int K, rng::Stream& s);

}  // namespace misim::synth

#endif
