#include "misim/synthdata.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace misim::synth {

void GenParams::validate() const {
    if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("GenParams: |rho| must be <= 1");
    if (!(sigma_y > 0 && sigma1 > 0 && sigma2 > 0))
        throw std::invalid_argument("GenParams: standard deviations must be positive");
}

std::size_t Dataset::n_masked() const {
    std::size_t k = 0;
    for (bool m : x2_mask) k += m;
    return k;
}

long round_half_away(double x) {
    return static_cast<long>(x < 0 ? std::ceil(x - 0.5) : std::floor(x + 0.5));
}

Dataset generate_baseline(std::size_t n, const GenParams& p, rng::Stream& s) {
    if (n < 4) throw std::invalid_argument("generate_baseline: n must be >= 4");
    p.validate();
    Dataset d;
    d.y.resize(n);
    d.x1.resize(n);
    d.x2.resize(n);
    d.x2_mask.assign(n, false);

    const std::vector<double> g1 = rng::draw_normal(s, n);
    const std::vector<double> z = rng::draw_normal(s, n);
    const std::vector<double> eps = rng::draw_normal(s, n);
    const double cond_slope = p.rho * p.sigma2 / p.sigma1;
    const double cond_sd = p.sigma2 * std::sqrt(1.0 - p.rho * p.rho);
    for (std::size_t i = 0; i < n; ++i) {
        d.x1[i] = p.mu1 + p.sigma1 * g1[i];
        d.x2[i] = p.mu2 + cond_slope * (d.x1[i] - p.mu1) + cond_sd * z[i];
        d.y[i] = p.beta0 + p.beta1 * d.x1[i] + p.beta2 * d.x2[i] + p.sigma_y * eps[i];
    }
    return d;
}

namespace {

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
    double sum = 0.0;
    for (double x : v) sum += x;
    mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

Dataset contaminate(const Dataset& d, double p_ext, rng::Stream& s) {
    if (d.is_contaminated()) throw std::invalid_argument("contaminate: input already contaminated");
    if (!(p_ext > 0.0 && p_ext < 1.0))
        throw std::invalid_argument("contaminate: p_ext must be in (0,1)");
    const std::size_t n = d.n();
    const long k = round_half_away(static_cast<double>(n) * p_ext);

    double ybar, sy, x1bar, s1, x2bar, s2;
    mean_sd(d.y, ybar, sy);
    mean_sd(d.x1, x1bar, s1);
    mean_sd(d.x2, x2bar, s2);

    Dataset out = d;
    // sample_without_replacement returns ascending indices; signs alternate
    // +,-,... in that order, so ceil(k/2) rows get the +3s replacement.
    out.contaminated_rows = rng::sample_without_replacement(s, n, static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < out.contaminated_rows.size(); ++j) {
        const double eta = (j % 2 == 0) ? 1.0 : -1.0;
        const std::size_t i = out.contaminated_rows[j];
        out.y[i] = ybar + 3.0 * eta * sy;
        out.x1[i] = x1bar + 3.0 * eta * s1;
        out.x2[i] = x2bar + 3.0 * eta * s2;
    }
    return out;
}

Dataset apply_mcar_mask(const Dataset& d, double p_miss, rng::Stream& s) {
    if (!(p_miss > 0.0 && p_miss < 1.0))
        throw std::invalid_argument("apply_mcar_mask: p_miss must be in (0,1)");
    const std::size_t n = d.n();
    const long k = round_half_away(static_cast<double>(n) * p_miss);
    if (k > static_cast<long>(n) - 4)
        throw std::invalid_argument(
            "apply_mcar_mask: fewer than 4 observed rows would remain");
    Dataset out = d;
    for (std::size_t i : rng::sample_without_replacement(s, n, static_cast<std::size_t>(k)))
        out.x2_mask[i] = true;
    return out;
}

FoldMap assign_folds(std::size_t n, int K, rng::Stream& s) {
    if (K < 2) throw std::invalid_argument("assign_folds: K must be >= 2");
    if (n < static_cast<std::size_t>(K)) throw std::invalid_argument("assign_folds: n < K");
    FoldMap fm;
    fm.K = K;
    fm.assignment.resize(n);
    // Fill with balanced fold ids, then shuffle.
    for (std::size_t i = 0; i < n; ++i)
        fm.assignment[i] = static_cast<int>(i % static_cast<std::size_t>(K));
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(s.uniform_below(i));
        std::swap(fm.assignment[i - 1], fm.assignment[j]);
    }
    return fm;
}

}  // namespace misim::synth
