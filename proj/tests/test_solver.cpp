#include <doctest.h>

#include <cmath>
#include <random>

#include "amlmc/solver.hpp"
#include "oracles.hpp"

using namespace amlmc;

TEST_CASE("reference CG agrees with dense LU") {
    std::mt19937 rng(31);
    const FieldModel model(2, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
        const Discretization disc(oracle::random_mesh(problem_base_mesh(1), 3, 0.3, rng));
        if (disc.num_dofs() > 200) continue;
        const auto A = disc.assemble(disc.evaluate_field(model.draw(trial)));
        const auto x = solve_reference(A, disc.primal_rhs(), 1e-13);
        const Eigen::VectorXd ref = oracle::to_dense(A).partialPivLu().solve(oracle::to_eigen(disc.primal_rhs()));
        CHECK((oracle::to_eigen(x.x) - ref).norm() <= 1e-10 * ref.norm());
        CHECK(x.relative_residual <= 1e-13);
        CHECK(x.work == doctest::Approx(static_cast<double>(x.iterations) * A.nnz()));
    }
}

TEST_CASE("goal-oriented stopping bounds both weighted residuals") {
    const Discretization disc(problem_base_mesh(4).refine_uniform(2));
    const auto A = disc.assemble(disc.evaluate_field(FieldSample::constant(1.0)));
    const auto exact = solve_reference(A, disc.primal_rhs(), 1e-13);
    const double q = disc.qoi(exact.x);
    double prev_err = 1e300;
    for (double tol : {1e-1, 1e-3, 1e-5}) {
        const auto r = solve_primal_dual(A, disc.primal_rhs(), A, disc.dual_rhs(), tol);
        CHECK(r.goal_residual_primal < tol);
        CHECK(r.goal_residual_dual < tol);
        CHECK(r.iterations_primal <= iteration_cap(A.n));
        // For the symmetric pair, Q(u) - Q(u_k) = (r_k, z) with z the exact dual.
        const double err = std::abs(disc.qoi(r.u) - q);
        CHECK(err <= prev_err * 1.0000001);
        prev_err = err;
    }
    CHECK(prev_err < 1e-4);
    CHECK_THROWS_AS(solve_primal_dual(A, disc.primal_rhs(), A, disc.dual_rhs(), 0.0), std::invalid_argument);
}

TEST_CASE("goal-oriented solve error tracks tol_iter on rough coefficients") {
    const FieldModel model(2, 4.0);
    const Discretization disc(problem_base_mesh(4).refine_uniform(3));
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto A = disc.assemble(disc.evaluate_field(model.draw(900 + trial)));
        const double q = disc.qoi(solve_reference(A, disc.primal_rhs(), 1e-13).x);
        for (double tol : {1e-1, 1e-2, 1e-3}) {
            const auto r = solve_primal_dual(A, disc.primal_rhs(), A, disc.dual_rhs(), tol);
            worst = std::max(worst, std::abs(disc.qoi(r.u) - q) / tol);
        }
    }
    CHECK(worst <= 5.0);
}

TEST_CASE("lockstep with a tiny tolerance matches reference solves") {
    const FieldModel model(2, 1.0);
    const Discretization disc(problem_base_mesh(2).refine_uniform(2));
    const auto A = disc.assemble(disc.evaluate_field(model.draw(4)));
    const auto u = solve_reference(A, disc.primal_rhs(), 1e-13).x;
    const auto phi = solve_reference(A, disc.dual_rhs(), 1e-13).x;
    const auto r = solve_primal_dual(A, disc.primal_rhs(), A, disc.dual_rhs(), 1e-14);
    CHECK((oracle::to_eigen(r.u) - oracle::to_eigen(u)).norm() <= 1e-10 * oracle::to_eigen(u).norm());
    CHECK((oracle::to_eigen(r.phi) - oracle::to_eigen(phi)).norm() <= 1e-10 * oracle::to_eigen(phi).norm());
}
