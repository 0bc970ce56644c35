#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "amlmc/adapt.hpp"

using namespace amlmc;

TEST_CASE("stopping and marking thresholds") {
    const std::vector<double> r{0.01, -0.2, 0.05};
    // N = 3, tol = 1: stop iff every |r| < C_S / 3, mark iff |r| >= C_R / 3.
    CHECK(stopping_satisfied(r, 1.0, 3.0, 3.0));
    CHECK_FALSE(stopping_satisfied(r, 1.0, 3.0, 0.6));
    CHECK(stopping_satisfied(r, 1.0, 3.0, 0.61));
    CHECK(mark_cells(r, 1.0, 3.0, 0.6) == std::vector<int>{1});
    CHECK(mark_cells(r, 1.0, 3.0, 0.03).size() == 3);
    CHECK(mark_cells(r, 1.0, 3.0, 2.5).empty());
}

TEST_CASE("parameter validation") {
    AdaptParams p;
    CHECK_NOTHROW(p.validate());
    p.C_S = 0.1;  // needs C_S > C_R / 16
    CHECK_THROWS(p.validate());
    p = AdaptParams{};
    p.ratio = 1.0;
    CHECK_THROWS(p.validate());
    CHECK(AdaptParams{}.tol(3) == doctest::Approx(1.0 / 256));
}

TEST_CASE("deterministic hierarchy refines towards the origin") {
    AdaptParams p;
    auto h = generate_hierarchy(6, problem_base_mesh(4), FieldSample::constant(std::exp(2.0)), p);
    REQUIRE(h->built() == 6);
    for (int k = 1; k < 6; ++k) {
        CHECK(h->level(k).tol == doctest::Approx(0.5 * h->level(k - 1).tol));
        CHECK(h->level(k).mesh().num_cells() >= h->level(k - 1).mesh().num_cells());
        CHECK(h->level(k).script_n >= p.c * h->level(k - 1).script_n * 0.999);
        CHECK(h->level(k).mesh().is_balanced());
    }
    const auto& m = h->level(5).mesh();
    int smallest = 0;
    for (int c = 1; c < m.num_cells(); ++c)
        if (m.cell_h(c) < m.cell_h(smallest)) smallest = c;
    const auto o = m.cell_origin(smallest);
    const double hs = m.cell_h(smallest);
    CHECK(std::hypot(o[0] + 0.5 * hs, o[1] + 0.5 * hs) < 4 * hs);
    CHECK(hs < 0.25 / 64);
}

TEST_CASE("hierarchy persistence round trip") {
    auto h = generate_hierarchy(4, problem_base_mesh(2), FieldSample::constant(1.0), [] {
        AdaptParams p;
        p.tol0 = 2.0;
        return p;
    }());
    const auto dir = (std::filesystem::temp_directory_path() / "amlmc_hierarchy_test").string();
    std::filesystem::remove_all(dir);
    h->save(dir, {{"note", "test"}});
    auto g = MeshHierarchy::load(dir, FieldSample::constant(1.0));
    REQUIRE(g->built() == 4);
    for (int k = 0; k < 4; ++k) {
        CHECK(g->level(k).mesh().cells() == h->level(k).mesh().cells());
        CHECK(g->level(k).tol == h->level(k).tol);
    }
    // Loaded hierarchies keep extending like the original.
    CHECK(g->level(4).mesh().cells() == h->level(4).mesh().cells());
    std::filesystem::remove_all(dir);
}

TEST_CASE("uniform hierarchy halves the mesh size") {
    auto h = MeshHierarchy::uniform(problem_base_mesh(4), 3, 1.0);
    CHECK(h->is_uniform());
    for (int k = 0; k < 4; ++k) CHECK(h->level(k).mesh().smallest_cell_size() == doctest::Approx(0.25 / (1 << k)));
}

TEST_CASE("coarse tolerance keeps the base mesh") {
    AdaptParams p;
    p.tol0 = 2.0;
    auto h = generate_hierarchy(1, problem_base_mesh(2), FieldSample::constant(1.0), p);
    CHECK(h->level(0).mesh().num_cells() == 8);
    CHECK(h->level(0).disc.num_dofs() == 4);
}
