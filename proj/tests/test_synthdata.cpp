#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "misim/rngkit.hpp"
#include "misim/synthdata.hpp"

using namespace misim;
using synth::Dataset;
using synth::GenParams;

namespace {

rng::Stream stream(const char* tag, std::int64_t idx = 0) {
    return rng::derive_stream(rng::MasterSeed{}, rng::StreamPath{}.child(tag, idx));
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// Plain normal-equations OLS for (1, x1, x2) as an independent oracle.
std::array<double, 3> ols3(const Dataset& d) {
    double s[3][3] = {};
    double t[3] = {};
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double row[3] = {1.0, d.x1[i], d.x2[i]};
        for (int a = 0; a < 3; ++a) {
            t[a] += row[a] * d.y[i];
            for (int b = 0; b < 3; ++b) s[a][b] += row[a] * row[b];
        }
    }
    // Gaussian elimination on the 3x3 system.
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(s[r][c]) > std::abs(s[piv][c])) piv = r;
        std::swap(s[c], s[piv]);
        std::swap(t[c], t[piv]);
        for (int r = 0; r < 3; ++r) {
            if (r == c) continue;
            const double f = s[r][c] / s[c][c];
            for (int k = c; k < 3; ++k) s[r][k] -= f * s[c][k];
            t[r] -= f * t[c];
        }
    }
    return {t[0] / s[0][0], t[1] / s[1][1], t[2] / s[2][2]};
}

}  // namespace

TEST_CASE("rounding is half-away-from-zero") {
    CHECK(synth::round_half_away(2.5) == 3);
    CHECK(synth::round_half_away(-2.5) == -3);
    CHECK(synth::round_half_away(2.4) == 2);
    CHECK(synth::round_half_away(5.0) == 5);
    CHECK(synth::round_half_away(20 * 0.25) == 5);
}

TEST_CASE("baseline generation rejects tiny samples and bad params") {
    rng::Stream s = stream("gen-bad");
    CHECK_THROWS_AS(synth::generate_baseline(3, GenParams{}, s), std::invalid_argument);
    GenParams bad;
    bad.rho = 1.5;
    CHECK_THROWS_AS(synth::generate_baseline(100, bad, s), std::invalid_argument);
}

TEST_CASE("independent predictors when rho is zero") {
    rng::Stream s = stream("gen-rho0");
    GenParams p;
    p.rho = 0.0;
    Dataset d = synth::generate_baseline(100000, p, s);
    CHECK(std::abs(corr(d.x1, d.x2)) < 0.01);
    CHECK(mean(d.x1) == doctest::Approx(10.0).epsilon(0.01));
    CHECK(mean(d.x2) == doctest::Approx(5.0).epsilon(0.01));
    CHECK(sample_sd(d.x1) == doctest::Approx(2.0).epsilon(0.01));
    CHECK(sample_sd(d.x2) == doctest::Approx(1.5).epsilon(0.01));
}

TEST_CASE("correlated predictors match the target second moments") {
    rng::Stream s = stream("gen-rho06");
    GenParams p;
    p.rho = 0.6;
    Dataset d = synth::generate_baseline(100000, p, s);
    CHECK(corr(d.x1, d.x2) == doctest::Approx(0.6).epsilon(0.017));
    const double ma = mean(d.x1), mb = mean(d.x2);
    double cov = 0;
    for (std::size_t i = 0; i < d.n(); ++i) cov += (d.x1[i] - ma) * (d.x2[i] - mb);
    cov /= static_cast<double>(d.n() - 1);
    CHECK(std::abs(cov - 1.8) < 0.05);
}

TEST_CASE("repeated generation recovers the response coefficients") {
    const int reps = 200;
    const std::size_t n = 200;
    GenParams p;
    p.rho = 0.6;
    std::array<std::vector<double>, 3> coef;
    for (int r = 0; r < reps; ++r) {
        rng::Stream s = stream("gen-ols", r);
        const auto b = ols3(synth::generate_baseline(n, p, s));
        for (int j = 0; j < 3; ++j) coef[static_cast<std::size_t>(j)].push_back(b[static_cast<std::size_t>(j)]);
    }
    const double truth[3] = {1.0, 0.5, 1.5};
    for (int j = 0; j < 3; ++j) {
        const auto& v = coef[static_cast<std::size_t>(j)];
        const double mc_se = sample_sd(v) / std::sqrt(static_cast<double>(reps));
        CHECK(std::abs(mean(v) - truth[j]) < 2.0 * mc_se + 1e-12);
    }
}

TEST_CASE("contamination replaces the expected rows with exact +-3s values") {
    rng::Stream g = stream("cont-gen");
    Dataset d = synth::generate_baseline(10, GenParams{}, g);
    const double ybar = mean(d.y), sy = sample_sd(d.y);
    const double x1bar = mean(d.x1), s1 = sample_sd(d.x1);
    const double x2bar = mean(d.x2), s2 = sample_sd(d.x2);

    rng::Stream c = stream("cont-draw");
    Dataset out = synth::contaminate(d, 0.3, c);
    REQUIRE(out.contaminated_rows.size() == 3);
    CHECK(std::is_sorted(out.contaminated_rows.begin(), out.contaminated_rows.end()));

    int pos = 0, neg = 0;
    for (std::size_t j = 0; j < out.contaminated_rows.size(); ++j) {
        const std::size_t i = out.contaminated_rows[j];
        const double eta = (j % 2 == 0) ? 1.0 : -1.0;
        (eta > 0 ? pos : neg)++;
        CHECK(out.y[i] == ybar + 3.0 * eta * sy);
        CHECK(out.x1[i] == x1bar + 3.0 * eta * s1);
        CHECK(out.x2[i] == x2bar + 3.0 * eta * s2);
    }
    CHECK(pos == 2);
    CHECK(neg == 1);

    // Untouched rows are bit-identical to the input.
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (std::find(out.contaminated_rows.begin(), out.contaminated_rows.end(), i) !=
            out.contaminated_rows.end())
            continue;
        CHECK(out.y[i] == d.y[i]);
        CHECK(out.x1[i] == d.x1[i]);
        CHECK(out.x2[i] == d.x2[i]);
    }
}

TEST_CASE("ten percent contamination of five hundred rows touches fifty rows") {
    rng::Stream g = stream("cont-500");
    Dataset d = synth::generate_baseline(500, GenParams{}, g);
    rng::Stream c = stream("cont-500-draw");
    Dataset out = synth::contaminate(d, 0.10, c);
    CHECK(out.contaminated_rows.size() == 50);
}

TEST_CASE("contamination input validation") {
    rng::Stream g = stream("cont-valid");
    Dataset d = synth::generate_baseline(10, GenParams{}, g);
    rng::Stream c = stream("cont-valid-draw");
    CHECK_THROWS_AS(synth::contaminate(d, 0.0, c), std::invalid_argument);
    CHECK_THROWS_AS(synth::contaminate(d, 1.0, c), std::invalid_argument);
    Dataset already = synth::contaminate(d, 0.2, c);
    CHECK_THROWS_AS(synth::contaminate(already, 0.2, c), std::invalid_argument);
}

TEST_CASE("mcar mask hits the exact count and only x2") {
    rng::Stream g = stream("mask-gen");
    Dataset d = synth::generate_baseline(20, GenParams{}, g);
    rng::Stream m = stream("mask-draw");
    Dataset out = synth::apply_mcar_mask(d, 0.30, m);
    CHECK(out.n_masked() == 6);
    CHECK(out.y == d.y);
    CHECK(out.x1 == d.x1);
    CHECK(out.x2 == d.x2);  // values retained; only the mask changes
}

TEST_CASE("mcar mask rounds the target count") {
    rng::Stream g = stream("mask-40");
    Dataset d = synth::generate_baseline(40, GenParams{}, g);
    rng::Stream m = stream("mask-40-draw");
    CHECK(synth::apply_mcar_mask(d, 0.05, m).n_masked() == 2);
}

TEST_CASE("mcar mask keeps enough observed rows") {
    rng::Stream g = stream("mask-tight");
    Dataset d = synth::generate_baseline(10, GenParams{}, g);
    rng::Stream m = stream("mask-tight-draw");
    CHECK_THROWS_AS(synth::apply_mcar_mask(d, 0.75, m), std::invalid_argument);
    CHECK(synth::apply_mcar_mask(d, 0.6, m).n_masked() == 6);
}

TEST_CASE("masking is independent of the response") {
    // Over many repetitions, the mean response of masked rows matches the
    // overall mean to within 4 standard errors.
    const int reps = 10000;
    rng::Stream g = stream("mask-mcar-gen");
    Dataset d = synth::generate_baseline(50, GenParams{}, g);
    const double overall = mean(d.y);
    const double sd_y = sample_sd(d.y);
    std::vector<double> masked_means;
    for (int r = 0; r < reps; ++r) {
        rng::Stream m = stream("mask-mcar", r);
        Dataset out = synth::apply_mcar_mask(d, 0.2, m);
        double s = 0;
        int c = 0;
        for (std::size_t i = 0; i < out.n(); ++i)
            if (out.x2_mask[i]) {
                s += out.y[i];
                ++c;
            }
        masked_means.push_back(s / c);
    }
    const double se = sd_y / std::sqrt(10.0) / std::sqrt(static_cast<double>(reps));
    CHECK(std::abs(mean(masked_means) - overall) < 4.0 * se);
}

TEST_CASE("fold assignment balances sizes") {
    rng::Stream s = stream("folds-10");
    synth::FoldMap f = synth::assign_folds(10, 5, s);
    std::vector<int> sizes(5, 0);
    for (int a : f.assignment) ++sizes[a];
    for (int c : sizes) CHECK(c == 2);

    rng::Stream s7 = stream("folds-7");
    synth::FoldMap f7 = synth::assign_folds(7, 5, s7);
    std::vector<int> sizes7(5, 0);
    for (int a : f7.assignment) ++sizes7[a];
    std::sort(sizes7.begin(), sizes7.end());
    CHECK(sizes7 == std::vector<int>{1, 1, 1, 2, 2});
}

TEST_CASE("fold assignment is deterministic for a given stream path") {
    rng::Stream a = stream("folds-det");
    rng::Stream b = stream("folds-det");
    CHECK(synth::assign_folds(33, 5, a).assignment == synth::assign_folds(33, 5, b).assignment);
    rng::Stream bad = stream("folds-bad");
    CHECK_THROWS_AS(synth::assign_folds(3, 5, bad), std::invalid_argument);
}

TEST_CASE("clean and contaminated copies share the pre-contamination draw") {
    // Regenerating both members of the pair from the same paths yields
    // identical pairs, and the contaminated copy differs from the clean one
    // only on its recorded rows.
    rng::Stream g1 = stream("pair-gen");
    rng::Stream g2 = stream("pair-gen");
    Dataset clean1 = synth::generate_baseline(60, GenParams{}, g1);
    Dataset clean2 = synth::generate_baseline(60, GenParams{}, g2);
    CHECK(clean1.y == clean2.y);

    rng::Stream c1 = stream("pair-cont");
    rng::Stream c2 = stream("pair-cont");
    Dataset cont1 = synth::contaminate(clean1, 0.1, c1);
    Dataset cont2 = synth::contaminate(clean2, 0.1, c2);
    CHECK(cont1.y == cont2.y);
    CHECK(cont1.contaminated_rows == cont2.contaminated_rows);
}
