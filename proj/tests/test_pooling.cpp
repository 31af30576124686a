#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "misim/imputers.hpp"
#include "misim/linmod.hpp"
#include "misim/pooling.hpp"
#include "misim/rngkit.hpp"
#include "misim/synthdata.hpp"

using namespace misim;
using pooling::PooledEstimate;
using pooling::SelectionOutcome;
using pooling::SelectionStage;

namespace {

rng::Stream stream(const char* tag, std::int64_t idx = 0) {
    return rng::derive_stream(rng::MasterSeed{}, rng::StreamPath{}.child(tag, idx));
}

Eigen::VectorXd vec3(double a, double b, double c) {
    Eigen::VectorXd v(3);
    v << a, b, c;
    return v;
}

}  // namespace

TEST_CASE("identical fits pool to the single-fit interval") {
    const Eigen::VectorXd q = vec3(1.0, 0.5, 1.5);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(3, 3) * 0.04;
    const PooledEstimate p = pooling::rubin_pool({q, q, q}, {cov, cov, cov}, 37);
    for (int k = 0; k < 3; ++k) {
        CHECK(p.qbar(k) == q(k));
        CHECK(p.b(k) == 0.0);
        CHECK(p.df(k) == doctest::Approx(37.0));
        CHECK(p.t_total(k) == doctest::Approx(0.04));
    }
    // Interval equals the single-fit t interval on nu_com df.
    const PooledEstimate single = pooling::rubin_pool({q}, {cov}, 37);
    for (int k = 0; k < 3; ++k) {
        CHECK(p.ci_lo(k) == doctest::Approx(single.ci_lo(k)).epsilon(1e-12));
        CHECK(p.ci_hi(k) == doctest::Approx(single.ci_hi(k)).epsilon(1e-12));
    }
}

TEST_CASE("two-fit worked example: forced arithmetic") {
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 3);
    const PooledEstimate p =
        pooling::rubin_pool({vec3(0, 1, 2), vec3(2, 3, 4)}, {zero, zero}, 100);
    for (int k = 0; k < 3; ++k) {
        CHECK(p.qbar(k) == doctest::Approx(1.0 + k));
        CHECK(p.b(k) == doctest::Approx(2.0));
        CHECK(p.t_total(k) == doctest::Approx(3.0));  // (1 + 1/2) * 2
    }
}

TEST_CASE("random pooling matches a direct mean and variance oracle") {
    rng::Stream s = stream("pool-random");
    std::vector<Eigen::VectorXd> qs;
    std::vector<Eigen::MatrixXd> covs;
    for (int m = 0; m < 5; ++m) {
        qs.push_back(vec3(s.next_normal(), s.next_normal(), s.next_normal()));
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, 3);
        for (int k = 0; k < 3; ++k) c(k, k) = 0.1 + s.next_uniform();
        covs.push_back(c);
    }
    const PooledEstimate p = pooling::rubin_pool(qs, covs, 50);
    for (int k = 0; k < 3; ++k) {
        double mean = 0, ub = 0;
        for (int m = 0; m < 5; ++m) {
            mean += qs[static_cast<std::size_t>(m)](k);
            ub += covs[static_cast<std::size_t>(m)](k, k);
        }
        mean /= 5;
        ub /= 5;
        double bvar = 0;
        for (int m = 0; m < 5; ++m)
            bvar += std::pow(qs[static_cast<std::size_t>(m)](k) - mean, 2);
        bvar /= 4;
        CHECK(p.qbar(k) == doctest::Approx(mean).epsilon(1e-12));
        CHECK(p.ubar(k) == doctest::Approx(ub).epsilon(1e-12));
        CHECK(p.b(k) == doctest::Approx(bvar).epsilon(1e-12));
        CHECK(p.t_total(k) == doctest::Approx(ub + 1.2 * bvar).epsilon(1e-12));
        CHECK(p.t_total(k) >= p.ubar(k));
    }
}

TEST_CASE("pooling rejects inconsistent dimensions") {
    const Eigen::MatrixXd cov2 = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd cov3 = Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(pooling::rubin_pool({vec3(1, 2, 3)}, {cov2}, 10), std::invalid_argument);
    CHECK_THROWS_AS(pooling::rubin_pool({}, {}, 10), std::invalid_argument);
    Eigen::VectorXd q2(2);
    q2 << 1, 2;
    CHECK_THROWS_AS(pooling::rubin_pool({vec3(1, 2, 3), q2}, {cov3, cov3}, 10),
                    std::invalid_argument);
}

TEST_CASE("support selection: threshold, boundary, and fallbacks") {
    // x1 in 3 of 5 fits, x2 in 1 of 5: keep x1 only.
    SelectionOutcome a = pooling::select_support({{1}, {1}, {1, 2}, {}, {}});
    CHECK(a.selected == std::vector<int>{1});
    CHECK(a.stage == SelectionStage::threshold);

    // Nothing selected anywhere: full fallback.
    SelectionOutcome b = pooling::select_support({{}, {}, {}});
    CHECK(b.selected == std::vector<int>{1, 2});
    CHECK(b.stage == SelectionStage::full_fallback);

    // 2 of 4 meets "at least 50%".
    SelectionOutcome c = pooling::select_support({{2}, {2}, {}, {}});
    CHECK(c.selected == std::vector<int>{2});
    CHECK(c.stage == SelectionStage::threshold);

    // Below threshold everywhere but nonempty union.
    SelectionOutcome d = pooling::select_support({{1}, {2}, {}, {}, {}});
    CHECK(d.selected == std::vector<int>{1, 2});
    CHECK(d.stage == SelectionStage::union_fallback);

    CHECK(pooling::stage_name(SelectionStage::threshold) == "threshold");
    CHECK(pooling::stage_name(SelectionStage::union_fallback) == "union-fallback");
    CHECK(pooling::stage_name(SelectionStage::full_fallback) == "full-fallback");
}

TEST_CASE("support selection is exhaustive over small patterns") {
    // Every pattern of M<=4 per-fit selections obeys the rule stated in the
    // contract; brute-force check against a direct recomputation.
    const std::vector<std::vector<int>> atoms = {{}, {1}, {2}, {1, 2}};
    for (int M = 1; M <= 4; ++M) {
        std::vector<std::size_t> idx(static_cast<std::size_t>(M), 0);
        while (true) {
            std::vector<std::vector<int>> sels;
            for (std::size_t i : idx) sels.push_back(atoms[i]);
            const SelectionOutcome out = pooling::select_support(sels);

            int c1 = 0, c2 = 0;
            for (const auto& s : sels) {
                c1 += std::count(s.begin(), s.end(), 1);
                c2 += std::count(s.begin(), s.end(), 2);
            }
            std::vector<int> expect;
            if (2 * c1 >= M) expect.push_back(1);
            if (2 * c2 >= M) expect.push_back(2);
            SelectionStage stage = SelectionStage::threshold;
            if (expect.empty()) {
                if (c1 > 0) expect.push_back(1);
                if (c2 > 0) expect.push_back(2);
                stage = SelectionStage::union_fallback;
            }
            if (expect.empty()) {
                expect = {1, 2};
                stage = SelectionStage::full_fallback;
            }
            CHECK(out.selected == expect);
            CHECK(out.stage == stage);

            std::size_t d = 0;
            while (d < idx.size() && ++idx[d] == atoms.size()) idx[d++] = 0;
            if (d == idx.size()) break;
        }
    }
}

TEST_CASE("post-selection pooling with the full set equals plain pooling") {
    synth::GenParams p;
    p.rho = 0.6;
    rng::Stream g = stream("psp-gen");
    synth::Dataset d = synth::generate_baseline(60, p, g);
    rng::Stream m = stream("psp-mask");
    d = synth::apply_mcar_mask(d, 0.2, m);
    const rng::Stream s = stream("psp-draw");
    const auto completions = imputers::impute(imputers::MethodId::T3, d, 5, s);

    SelectionOutcome full;
    full.selected = {1, 2};
    const PooledEstimate a = pooling::post_selection_pool(completions, full);

    std::vector<Eigen::VectorXd> qs;
    std::vector<Eigen::MatrixXd> covs;
    for (const auto& c : completions) {
        const linmod::OlsFit f = linmod::fit_ols(linmod::make_design(c.data));
        qs.push_back(f.coef);
        covs.push_back(f.cov);
    }
    const PooledEstimate b = pooling::rubin_pool(qs, covs, static_cast<int>(d.n()) - 3);
    for (int k = 0; k < 3; ++k) {
        CHECK(a.qbar(k) == doctest::Approx(b.qbar(k)).epsilon(1e-12));
        CHECK(a.ci_lo(k) == doctest::Approx(b.ci_lo(k)).epsilon(1e-12));
        CHECK(a.dropped[static_cast<std::size_t>(k)] == false);
    }
}

TEST_CASE("post-selection pooling drops excluded coefficients and stays unbiased") {
    // x2 is pure noise for y; selecting {x1} should recover beta1 and report
    // the dropped x2 slot as zero with a flag.
    synth::GenParams p;
    p.beta2 = 0.0;
    std::vector<double> b1s;
    bool within = false;
    rng::Stream g = stream("psp-drop-gen");
    synth::Dataset d = synth::generate_baseline(200, p, g);
    rng::Stream m = stream("psp-drop-mask");
    d = synth::apply_mcar_mask(d, 0.1, m);
    const rng::Stream s = stream("psp-drop-draw");
    const auto completions = imputers::impute(imputers::MethodId::T3, d, 5, s);

    SelectionOutcome sel;
    sel.selected = {1};
    const PooledEstimate est = pooling::post_selection_pool(completions, sel);
    REQUIRE(est.dim() == 3);
    CHECK(est.qbar(2) == 0.0);
    CHECK(est.dropped[2] == true);
    CHECK(est.dropped[1] == false);
    const double se1 = std::sqrt(est.t_total(1));
    CHECK(std::abs(est.qbar(1) - 0.5) < 3.0 * se1);
    (void)b1s;
    (void)within;
}

TEST_CASE("coefficient metrics: exact and two-point cases") {
    PooledEstimate exact;
    exact.qbar = vec3(1.0, 0.5, 1.5);
    exact.ci_lo = vec3(-10, -10, -10);
    exact.ci_hi = vec3(10, 10, 10);
    exact.dropped = {false, false, false};
    const pooling::CoefficientMetrics m0 = pooling::coefficient_metrics({exact, exact});
    for (int k = 0; k < 3; ++k) {
        CHECK(m0.bias[static_cast<std::size_t>(k)] == doctest::Approx(0.0));
        CHECK(m0.rmse[static_cast<std::size_t>(k)] == doctest::Approx(0.0));
        CHECK(m0.coverage[static_cast<std::size_t>(k)] == doctest::Approx(1.0));
    }

    PooledEstimate hi = exact, lo = exact;
    hi.qbar = vec3(2.0, 1.5, 2.5);
    lo.qbar = vec3(0.0, -0.5, 0.5);
    const pooling::CoefficientMetrics m1 = pooling::coefficient_metrics({hi, lo});
    for (int k = 0; k < 3; ++k) {
        CHECK(m1.bias[static_cast<std::size_t>(k)] == doctest::Approx(0.0));
        CHECK(m1.rmse[static_cast<std::size_t>(k)] == doctest::Approx(1.0));
        CHECK(m1.rmse[static_cast<std::size_t>(k)] >=
              std::abs(m1.bias[static_cast<std::size_t>(k)]));
    }
}

TEST_CASE("coverage counts interval hits") {
    std::vector<PooledEstimate> reps;
    for (int r = 0; r < 200; ++r) {
        PooledEstimate e;
        e.qbar = vec3(1.0, 0.5, 1.5);
        e.dropped = {false, false, false};
        const bool hit = r < 190;
        e.ci_lo = vec3(hit ? 0.9 : 1.1, 0.4, 1.4);
        e.ci_hi = vec3(hit ? 1.1 : 1.2, 0.6, 1.6);
        reps.push_back(e);
    }
    const pooling::CoefficientMetrics m = pooling::coefficient_metrics(reps);
    CHECK(m.coverage[0] == doctest::Approx(0.95));
    CHECK(m.coverage[1] == doctest::Approx(1.0));
}

TEST_CASE("dropped coefficients cover only a zero truth") {
    PooledEstimate e;
    e.qbar = vec3(1.0, 0.5, 0.0);
    e.ci_lo = vec3(0.9, 0.4, 0.0);
    e.ci_hi = vec3(1.1, 0.6, 0.0);
    e.dropped = {false, false, true};
    const pooling::CoefficientMetrics miss =
        pooling::coefficient_metrics({e}, {1.0, 0.5, 1.5});
    CHECK(miss.coverage[2] == doctest::Approx(0.0));
    const pooling::CoefficientMetrics hit = pooling::coefficient_metrics({e}, {1.0, 0.5, 0.0});
    CHECK(hit.coverage[2] == doctest::Approx(1.0));
}

TEST_CASE("cv-mse aggregation: constants and the quantile convention") {
    const pooling::CvMseSummary c = pooling::aggregate_cvmse({3.5, 3.5, 3.5, 3.5});
    CHECK(c.mean == doctest::Approx(3.5));
    CHECK(c.variance == doctest::Approx(0.0));
    CHECK(c.q025 == doctest::Approx(3.5));
    CHECK(c.q50 == doctest::Approx(3.5));
    CHECK(c.q975 == doctest::Approx(3.5));

    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    const pooling::CvMseSummary s = pooling::aggregate_cvmse(v);
    CHECK(s.q50 == doctest::Approx(50.5));
    CHECK(s.mean == doctest::Approx(50.5));
    CHECK(s.q025 <= s.q50);
    CHECK(s.q50 <= s.q975);

    const pooling::CvMseSummary one = pooling::aggregate_cvmse({2.0});
    CHECK(one.variance == 0.0);
    CHECK(one.variance_degenerate);
}

TEST_CASE("type-7 quantiles interpolate order statistics") {
    std::vector<double> v = {10, 20, 30, 40};
    CHECK(pooling::quantile_type7(v, 0.0) == doctest::Approx(10.0));
    CHECK(pooling::quantile_type7(v, 1.0) == doctest::Approx(40.0));
    CHECK(pooling::quantile_type7(v, 0.5) == doctest::Approx(25.0));
    CHECK(pooling::quantile_type7(v, 1.0 / 3.0) == doctest::Approx(20.0));
}

TEST_CASE("qq reduction: identity, shift, and scale") {
    rng::Stream s = stream("qq");
    std::vector<std::vector<double>> truths(4), same(4), shifted(4), scaled(4);
    for (int r = 0; r < 4; ++r) {
        for (int i = 0; i < 300; ++i) {
            const double t = s.next_normal() * 2.0 + 1.0;
            truths[static_cast<std::size_t>(r)].push_back(t);
            same[static_cast<std::size_t>(r)].push_back(t);
            shifted[static_cast<std::size_t>(r)].push_back(t + 1.0);
            scaled[static_cast<std::size_t>(r)].push_back(0.5 * t);
        }
    }

    const pooling::QqCurve ident = pooling::qq_reduce(same, truths);
    REQUIRE(ident.true_q.size() == 99);
    for (std::size_t i = 0; i < 99; ++i)
        CHECK(ident.pred_q[i] == doctest::Approx(ident.true_q[i]).epsilon(1e-12));

    const pooling::QqCurve shift = pooling::qq_reduce(shifted, truths);
    for (std::size_t i = 0; i < 99; ++i)
        CHECK(shift.pred_q[i] - shift.true_q[i] == doctest::Approx(1.0).epsilon(1e-12));

    const pooling::QqCurve scale = pooling::qq_reduce(scaled, truths);
    double sxy = 0, sxx = 0, mx = 0, my = 0;
    for (std::size_t i = 0; i < 99; ++i) {
        mx += scale.true_q[i];
        my += scale.pred_q[i];
    }
    mx /= 99;
    my /= 99;
    for (std::size_t i = 0; i < 99; ++i) {
        sxy += (scale.true_q[i] - mx) * (scale.pred_q[i] - my);
        sxx += (scale.true_q[i] - mx) * (scale.true_q[i] - mx);
    }
    CHECK(sxy / sxx == doctest::Approx(0.5).epsilon(0.01));
}
