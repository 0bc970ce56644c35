#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "amlmc/error_density.hpp"
#include "amlmc/solver.hpp"
#include "oracles.hpp"

using namespace amlmc;

namespace {

struct Probe {
    double dxx_err = 0.0, dyy_err = 0.0;
};

// Max error of the averaged quotients of w against (wxx, wyy).
Probe probe(const QuadMesh& m, const oracle::Fn& w, const oracle::Fn& wxx, const oracle::Fn& wyy) {
    const DensityPlan plan(m);
    std::vector<double> v(m.num_vertices());
    for (int i = 0; i < m.num_vertices(); ++i) v[i] = w(m.vertex_x(i), m.vertex_y(i));
    const auto q = plan.averaged(plan.quotients(v));
    Probe p;
    for (int i = 0; i < m.num_vertices(); ++i) {
        const double x = m.vertex_x(i), y = m.vertex_y(i);
        p.dxx_err = std::max(p.dxx_err, std::abs(q[0][i] - wxx(x, y)));
        p.dyy_err = std::max(p.dyy_err, std::abs(q[1][i] - wyy(x, y)));
    }
    return p;
}

}  // namespace

TEST_CASE("quotients reproduce quadratics on uniform and random meshes") {
    std::mt19937 rng(41);
    for (const auto& m : {problem_base_mesh(4), oracle::random_mesh(problem_base_mesh(2), 4, 0.3, rng)}) {
        const auto a = probe(m, [](double x, double) { return x * x; }, [](double, double) { return 2.0; },
                             [](double, double) { return 0.0; });
        const auto b = probe(m, [](double, double y) { return y * y; }, [](double, double) { return 0.0; },
                             [](double, double) { return 2.0; });
        const auto c = probe(m, [](double x, double y) { return x * y; }, [](double, double) { return 0.0; },
                             [](double, double) { return 0.0; });
        CHECK(std::max(a.dxx_err, a.dyy_err) < 1e-9);
        CHECK(std::max(b.dxx_err, b.dyy_err) < 1e-9);
        CHECK(std::max(c.dxx_err, c.dyy_err) < 1e-9);
    }
}

TEST_CASE("quotients of sin(pi x) converge at first order on random meshes") {
    const double pi = std::numbers::pi;
    std::mt19937 rng(43);
    std::vector<double> err;
    for (int n = 1; n <= 4; ++n) {
        const auto m = oracle::random_mesh(problem_base_mesh(2).refine_uniform(n), 2, 0.3, rng);
        err.push_back(probe(m, [&](double x, double) { return std::sin(pi * x); },
                            [&](double x, double) { return -pi * pi * std::sin(pi * x); },
                            [](double, double) { return 0.0; })
                          .dxx_err);
    }
    for (std::size_t k = 1; k < err.size(); ++k) CHECK(std::log2(err[k - 1] / err[k]) >= 0.8);
}

TEST_CASE("density of a separable product against the closed form") {
    // rho = a (u_xx phi_xx + u_yy phi_yy) / 12 with the vertex rule /48 over 4 corners.
    const auto m = problem_base_mesh(4).refine_uniform(2);
    const DensityPlan plan(m);
    std::vector<double> a(m.num_vertices(), 2.0), u(m.num_vertices()), phi(m.num_vertices());
    for (int v = 0; v < m.num_vertices(); ++v) {
        const double x = m.vertex_x(v), y = m.vertex_y(v);
        u[v] = x * x + 3.0 * y * y;
        phi[v] = 0.5 * x * x - y * y;
    }
    const auto rho = plan.cell_density(a, plan.averaged(plan.quotients(u)), plan.averaged(plan.quotients(phi)));
    const double expected = 2.0 * (2.0 * 1.0 + 6.0 * -2.0) / 12.0;
    for (double r : rho) CHECK(r == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("estimate pipeline invariants") {
    const Discretization disc(problem_base_mesh(4).refine_uniform());
    const DensityPlan plan(disc.mesh());
    const auto a = disc.evaluate_field(FieldSample::constant(std::exp(2.0)));
    const auto A = disc.assemble(a);
    const auto u = solve_reference(A, disc.primal_rhs()).x;
    const auto phi = solve_reference(A, disc.dual_rhs()).x;
    const auto d = estimate_density(plan, disc, a, u, phi, 1.0 / 32);
    const auto& m = disc.mesh();
    double sum = 0.0, l1 = 0.0;
    for (int c = 0; c < m.num_cells(); ++c) {
        const double h = m.cell_h(c);
        CHECK(d.indicators[c] == doctest::Approx(d.rho_bar[c] * h * h * h * h));
        CHECK(std::abs(d.rho_bar[c]) >= d.delta * 0.999999);
        sum += d.indicators[c];
        l1 += std::abs(d.rho_bar[c]) * h * h;
    }
    CHECK(d.e_est == doctest::Approx(sum));
    CHECK(d.e_est_abs >= std::abs(d.e_est));
    CHECK(d.l1 == doctest::Approx(l1));
    CHECK(d.lhalf > 0.0);
    CHECK(d.scaling_numerator > 0.0);
}

TEST_CASE("upper cap clips only when enabled") {
    const auto m = problem_base_mesh(1);
    REQUIRE(m.num_cells() == 2);
    DensityOptions off;
    DensityOptions on;
    on.upper_bound = true;
    double lo = 0.0, up = 0.0;
    const auto a = bound_density({1e-12, 1e6}, 1e-2, m, off, &lo, &up);
    const auto b = bound_density({1e-12, 1e6}, 1e-2, m, on, &lo, &up);
    CHECK(a[1] == doctest::Approx(1e6));
    CHECK(b[1] <= up * (1 + 1e-12));
    CHECK(a[0] >= lo);
    CHECK(bound_density({-1e-12, 1.0}, 1e-2, m, off)[0] < 0.0);
}
