#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "amlmc/fem.hpp"
#include "amlmc/solver.hpp"
#include "oracles.hpp"

using namespace amlmc;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("sparse assembly matches dense brute force") {
    std::mt19937 rng(21);
    const FieldModel model(2, 4.0);
    int checked = 0;
    for (int trial = 0; trial < 12; ++trial) {
        const auto mesh = oracle::random_mesh(problem_base_mesh(1), 3, 0.3, rng);
        const Discretization disc(mesh);
        if (disc.num_dofs() > 200 || disc.num_dofs() < 5) continue;
        const auto field = model.draw(1000 + trial);
        const auto A = oracle::to_dense(disc.assemble(disc.evaluate_field(field)));
        const auto D = oracle::dense_stiffness(disc, [&](double x, double y) { return field(x, y); });
        CHECK(max_abs(A - D) <= 1e-10 * max_abs(D));
        CHECK(max_abs(A - A.transpose()) <= 1e-12 * max_abs(D));

        const auto b = oracle::dense_load(disc, [](double, double) { return Discretization::kSource; });
        CHECK((oracle::to_eigen(disc.primal_rhs()) - b).cwiseAbs().maxCoeff() <= 1e-10 * b.cwiseAbs().maxCoeff());
        const auto g = oracle::dense_load(disc, qoi_weight);
        CHECK((oracle::to_eigen(disc.dual_rhs()) - g).cwiseAbs().maxCoeff() <= 1e-10 * g.cwiseAbs().maxCoeff());
        ++checked;
    }
    CHECK(checked >= 5);
}

TEST_CASE("stiffness matrix is positive definite") {
    std::mt19937 rng(4);
    const auto mesh = oracle::random_mesh(problem_base_mesh(1), 2, 0.4, rng);
    const Discretization disc(mesh);
    const auto A = oracle::to_dense(disc.assemble(disc.evaluate_field(FieldSample::constant(2.0))));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("QoI weight integral against quadrature") {
    const QoIFunctional q;
    const Rect r{-0.3, -0.8, 0.7, -0.1};
    const double num = oracle::integrate([&](double x) { return q.weight(x, -0.5); }, r.x0, r.x1) *
                       oracle::integrate([&](double y) { return q.weight(0.375, y); }, r.y0, r.y1) /
                       q.weight(0.375, -0.5);
    CHECK(q.integral(r) == doctest::Approx(num).epsilon(1e-10));
    // The weight is a product of one-dimensional factors.
    CHECK(q.weight(0.1, -0.2) * q.weight(0.6, -0.7) == doctest::Approx(q.weight(0.1, -0.7) * q.weight(0.6, -0.2)));
    CHECK(q.weight(0.375, -0.375) > q.weight(0.9, -0.9));
}

TEST_CASE("QoI scales like 1/a for constant coefficients") {
    const Discretization disc(problem_base_mesh(4).refine_uniform());
    auto q_of = [&](double a) {
        const auto A = disc.assemble(disc.evaluate_field(FieldSample::constant(a)));
        return disc.qoi(solve_reference(A, disc.primal_rhs()).x);
    };
    CHECK(q_of(3.0) * 3.0 == doctest::Approx(q_of(1.0)).epsilon(1e-9));
}

TEST_CASE("manufactured solution converges at second order in the QoI") {
    // u = sin(pi x) sin(pi y) on [0,1]x[-1,0], zero on the whole boundary.
    const double pi = std::numbers::pi;
    const QoIFunctional qf;
    const double exact =
        oracle::integrate([&](double x) { return qf.weight(x, -0.375) * std::sin(pi * x); }, 0.0, 1.0, 400) *
        oracle::integrate([&](double y) { return qf.weight(0.375, y) * std::sin(pi * y); }, -1.0, 0.0, 400) /
        qf.weight(0.375, -0.375);
    std::vector<double> h, err;
    for (int n = 4; n <= 64; n *= 2) {
        const auto mesh = QuadMesh::base(Rect{0.0, -1.0, 1.0, 0.0}, n, n);
        const Discretization disc(mesh, qf, [&](double x, double y) {
            return 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
        });
        CHECK(disc.num_dofs() == (n - 1) * (n - 1));
        const auto A = disc.assemble(disc.evaluate_field(FieldSample::constant(1.0)));
        const auto u = solve_reference(A, disc.primal_rhs(), 1e-13);
        h.push_back(1.0 / n);
        err.push_back(std::abs(disc.qoi(u.x) - exact));
    }
    for (std::size_t k = 1; k < err.size(); ++k) {
        const double order = std::log(err[k - 1] / err[k]) / std::log(2.0);
        CHECK(order == doctest::Approx(2.0).epsilon(0.1));
    }
}

TEST_CASE("expand reproduces hanging interpolation") {
    std::mt19937 rng(9);
    const auto mesh = oracle::random_mesh(problem_base_mesh(2), 3, 0.3, rng);
    const Discretization disc(mesh);
    std::vector<double> u(disc.num_dofs());
    std::uniform_real_distribution<double> U(-1, 1);
    for (double& x : u) x = U(rng);
    const auto w = disc.expand(u);
    const auto P = oracle::prolongation(disc);
    CHECK((oracle::to_eigen(w) - P * oracle::to_eigen(u)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("assembly rejects nonpositive coefficients") {
    const Discretization disc(problem_base_mesh(2));
    std::vector<double> a(disc.eval_points().size(), 1.0);
    a[3] = -1.0;
    CHECK_THROWS_AS(disc.assemble(a), std::domain_error);
    CHECK_THROWS_AS(disc.assemble(std::vector<double>(3, 1.0)), std::invalid_argument);
}
