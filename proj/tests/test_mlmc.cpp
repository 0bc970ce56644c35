#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "amlmc/experiments.hpp"
#include "amlmc/mlmc.hpp"

using namespace amlmc;

namespace {

double objective(const std::vector<double>& V, const std::vector<double>& M) {
    double s = 0.0;
    for (std::size_t l = 0; l < V.size(); ++l) s += V[l] / M[l];
    return s;
}

}  // namespace

TEST_CASE("level statistics against a two-pass computation") {
    std::mt19937 rng(1);
    std::normal_distribution<double> N(3.0, 2.0);
    std::vector<double> x(500), w(500, 2.0);
    for (double& v : x) v = N(rng);
    const auto s = level_stats(x, w);
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double v = 0.0;
    for (double y : x) v += (y - m) * (y - m);
    v /= x.size() - 1;
    CHECK(s.count == 500);
    CHECK(s.mean == doctest::Approx(m).epsilon(1e-12));
    CHECK(s.variance == doctest::Approx(v).epsilon(1e-12));
    CHECK(s.work == doctest::Approx(2.0));
    CHECK(s.mean_ci == doctest::Approx(1.96 * std::sqrt(v / 500)));
}

TEST_CASE("optimal counts meet the statistical constraint and beat random allocations") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int profile = 0; profile < 20; ++profile) {
        const int L = 2 + profile % 5;
        std::vector<double> V(L), W(L);
        for (int l = 0; l < L; ++l) {
            V[l] = std::pow(10.0, 2.0 - 3.0 * U(rng) - l);
            W[l] = std::pow(10.0, 1.0 + 2.0 * U(rng) + l);
        }
        const double theta = 0.5, cxi = 1.96, tol = 0.05;
        const auto M = optimal_counts_real(V, W, theta, cxi, tol);
        CHECK(objective(V, M) == doctest::Approx(std::pow(theta * tol / cxi, 2)).epsilon(1e-10));
        double budget = 0.0;
        for (int l = 0; l < L; ++l) budget += M[l] * W[l];
        // Numerical minimiser: projected descent on the simplex of work shares.
        std::vector<double> share(L, 1.0 / L);
        for (int it = 0; it < 20000; ++it) {
            std::vector<double> g(L);
            for (int l = 0; l < L; ++l) g[l] = -V[l] * W[l] / (budget * share[l] * share[l]);
            const double gm = std::accumulate(g.begin(), g.end(), 0.0) / L;
            for (int l = 0; l < L; ++l) share[l] = std::max(1e-12, share[l] - 1e-3 * share[l] * share[l] * (g[l] - gm) / std::abs(gm));
            const double s = std::accumulate(share.begin(), share.end(), 0.0);
            for (double& x : share) x /= s;
        }
        std::vector<double> Mn(L);
        for (int l = 0; l < L; ++l) Mn[l] = share[l] * budget / W[l];
        CHECK(objective(V, M) <= objective(V, Mn) * (1 + 1e-9));
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> r(L);
            for (double& x : r) x = U(rng) + 1e-9;
            const double s = std::accumulate(r.begin(), r.end(), 0.0);
            std::vector<double> Mr(L);
            for (int l = 0; l < L; ++l) Mr[l] = r[l] / s * budget / W[l];
            CHECK(objective(V, M) <= objective(V, Mr) * (1 + 1e-12));
        }
        const auto Mi = optimal_counts(V, W, theta, cxi, tol);
        for (int l = 0; l < L; ++l) {
            CHECK(Mi[l] >= 1);
            CHECK(Mi[l] >= M[l]);
            CHECK(Mi[l] < M[l] + 1.0);
        }
    }
    const std::vector<double> V{1.0, -1.0}, W{1.0, 1.0};
    CHECK_THROWS_AS(optimal_counts(V, W, 0.5, 1.96, 0.1), std::invalid_argument);
}

TEST_CASE("extrapolated bias") {
    CHECK(extrapolated_bias(0.4, 0.1) == doctest::Approx(0.1 / 3.0));
    CHECK(extrapolated_bias(0.2, 0.1) == doctest::Approx(0.1));
    CHECK(extrapolated_bias(10.0, 0.1) == doctest::Approx(0.1 / 3.0));
    CHECK(extrapolated_bias(0.1, 0.1) == doctest::Approx(0.1 / (std::sqrt(2.0) - 1.0)));
    CHECK(extrapolated_bias(1.0, 0.0) == 0.0);
}

TEST_CASE("deterministic field telescopes exactly") {
    auto cfg = RunConfig::defaults(0, 0.0);
    cfg.tols = {1.0 / 128};
    const auto model = make_model(cfg);
    auto h = adaptive_hierarchy(cfg, model);
    const auto r = run_estimator(cfg.estimator(cfg.tols.front(), 3), *h, model);
    REQUIRE(r.levels.size() >= 2);
    for (const auto& l : r.levels) CHECK(l.stats.variance == 0.0);
    const auto& last = r.levels.back().samples.front();
    CHECK(std::abs(r.estimate - last.q_fine) <= 1e-12);
    for (std::size_t l = 1; l < r.levels.size(); ++l)
        CHECK(r.levels[l].samples.front().q_coarse == r.levels[l - 1].samples.front().q_fine);
}

TEST_CASE("sample draws are reproducible and scheme-separated") {
    auto cfg = RunConfig::defaults(2, 1.0);
    const auto model = make_model(cfg);
    auto h = adaptive_hierarchy(cfg, model);
    auto e = cfg.estimator(0.1, 5);
    const double R = pilot_R(*h, model, 4, 5).R;
    const auto a = draw_sample(2, 7, e, *h, model, R);
    const auto b = draw_sample(2, 7, e, *h, model, R);
    CHECK(a.q_fine == b.q_fine);
    CHECK(a.q_coarse == b.q_coarse);
    CHECK(a.k_fine >= a.k_coarse);
    CHECK(a.work > 0.0);
    CHECK(draw_sample(2, 8, e, *h, model, R).key != a.key);
    CHECK_THROWS(pilot_R(*h, model, 1, 5));
    CHECK_NOTHROW(pilot_R(*h, model, 1, 5, true));
}

TEST_CASE("estimator refuses a hierarchy of the wrong kind") {
    auto cfg = RunConfig::defaults(1, 1.0);
    const auto model = make_model(cfg);
    auto uniform = uniform_hierarchy(cfg, 4, 1);
    CHECK_THROWS_AS(run_estimator(cfg.estimator(0.4, 1), *uniform, model), std::invalid_argument);
}

TEST_CASE("Example 1 estimator lands near the closed-form mean") {
    auto cfg = RunConfig::defaults(1, 1.0);
    const auto model = make_model(cfg);
    auto h = adaptive_hierarchy(cfg, model);
    const auto r = run_estimator(cfg.estimator(0.2, 11), *h, model);
    const double ref = constant_field_reference(1.0) * std::exp(0.5);
    CHECK(std::abs(r.estimate - ref) < 0.4);
    CHECK(r.bias_bound <= 0.5 * 0.2 + 1e-15);
    CHECK(r.stat_error <= 0.5 * 0.2 * 1.5);
    for (const auto& l : r.levels) CHECK(l.M >= cfg.warmup);
}
