#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "amlmc/mesh.hpp"
#include "oracles.hpp"

using namespace amlmc;

TEST_CASE("base mesh of the model domain") {
    const auto m = problem_base_mesh(4);
    CHECK(m.num_cells() == 32);
    CHECK(m.num_vertices() == 45);
    CHECK(m.smallest_cell_size() == doctest::Approx(0.25));
    CHECK(m.hanging().empty());
    CHECK(m.is_balanced());
    int free_top = 0;
    for (int v = 0; v < m.num_vertices(); ++v) {
        const double x = m.vertex_x(v), y = m.vertex_y(v);
        if (y == 0.0 && x > -1.0 && x < 0.0) {
            CHECK_FALSE(m.is_dirichlet(v));
            ++free_top;
        }
        if (x == 0.0 && y == 0.0) CHECK(m.is_dirichlet(v));
        if (x == 1.0 || x == -1.0 || y == -1.0) CHECK(m.is_dirichlet(v));
    }
    CHECK(free_top == 3);
}

TEST_CASE("uniform refinement quadruples the cells") {
    auto m = problem_base_mesh(2);
    for (int k = 0; k < 3; ++k) {
        const auto f = m.refine_uniform();
        CHECK(f.num_cells() == 4 * m.num_cells());
        CHECK(f.smallest_cell_size() == doctest::Approx(0.5 * m.smallest_cell_size()));
        m = f;
    }
    CHECK(m.num_vertices() == 33 * 17);
}

TEST_CASE("random refinement stays balanced with two-master constraints") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = oracle::random_mesh(problem_base_mesh(1), 5, 0.25, rng);
        REQUIRE(m.is_balanced());
        for (const auto& c : hanging_constraints(m)) {
            CHECK(c.weights[0] == 0.5);
            CHECK(c.weights[1] == 0.5);
            CHECK_FALSE(m.is_hanging(c.masters[0]));
            CHECK_FALSE(m.is_hanging(c.masters[1]));
            CHECK(m.vertex_x(c.vertex) == doctest::Approx(0.5 * (m.vertex_x(c.masters[0]) + m.vertex_x(c.masters[1]))));
            CHECK(m.vertex_y(c.vertex) == doctest::Approx(0.5 * (m.vertex_y(c.masters[0]) + m.vertex_y(c.masters[1]))));
        }
        double area = 0.0;
        for (int c = 0; c < m.num_cells(); ++c) area += m.cell_h(c) * m.cell_h(c);
        CHECK(area == doctest::Approx(2.0));
    }
}

TEST_CASE("refinement only splits marked cells and their balance closure") {
    const auto m = problem_base_mesh(4);
    const int corner = m.find_cell(CellKey{0, 4, 3});  // cell touching the origin from below right
    REQUIRE(corner >= 0);
    const auto f = m.refine({corner});
    CHECK(f.num_cells() == m.num_cells() + 3);
    const auto g = f.refine({f.num_cells() - 1, 0});
    CHECK(g.is_balanced());
    CHECK(g.num_cells() > f.num_cells());
}

TEST_CASE("mesh text round trip") {
    std::mt19937 rng(5);
    const auto m = oracle::random_mesh(problem_base_mesh(2), 3, 0.3, rng);
    std::stringstream ss;
    m.write(ss);
    const auto r = QuadMesh::read(ss);
    CHECK(r.cells() == m.cells());
    CHECK(r.num_vertices() == m.num_vertices());
    CHECK(r.neumann().size() == m.neumann().size());
    const auto path = (std::filesystem::temp_directory_path() / "amlmc_mesh_roundtrip.mesh").string();
    m.save(path);
    CHECK(QuadMesh::load(path).cells() == m.cells());
    std::filesystem::remove(path);
}

TEST_CASE("coordinate lines follow cell edges") {
    std::mt19937 rng(8);
    const auto m = oracle::random_mesh(problem_base_mesh(2), 4, 0.3, rng);
    const auto ls = assemble_lines(m);
    std::multiset<int> seen_y, seen_x;
    // Consecutive line vertices lie on one cell edge (possibly a coarse one).
    auto on_edge = [&](int a, int b, bool horizontal) {
        for (int c = 0; c < m.num_cells(); ++c) {
            const auto& v = m.cell_vertices(c);
            for (auto [p, q] : horizontal ? std::array{std::pair{v[0], v[1]}, std::pair{v[2], v[3]}}
                                          : std::array{std::pair{v[0], v[2]}, std::pair{v[1], v[3]}}) {
                const bool same = horizontal ? m.vertex_iy(p) == m.vertex_iy(a) : m.vertex_ix(p) == m.vertex_ix(a);
                if (!same) continue;
                const auto lo = horizontal ? m.vertex_ix(p) : m.vertex_iy(p);
                const auto hi = horizontal ? m.vertex_ix(q) : m.vertex_iy(q);
                const auto s = horizontal ? m.vertex_ix(a) : m.vertex_iy(a);
                const auto t = horizontal ? m.vertex_ix(b) : m.vertex_iy(b);
                if (lo <= s && t <= hi) return true;
            }
        }
        return false;
    };
    for (const auto& line : ls.y_lines) {
        for (std::size_t k = 0; k < line.size(); ++k) {
            seen_y.insert(line[k]);
            if (k > 0) {
                CHECK(m.vertex_iy(line[k]) == m.vertex_iy(line[k - 1]));
                CHECK(m.vertex_ix(line[k]) > m.vertex_ix(line[k - 1]));
                CHECK(on_edge(line[k - 1], line[k], true));
            }
        }
    }
    for (const auto& line : ls.x_lines)
        for (std::size_t k = 0; k < line.size(); ++k) {
            seen_x.insert(line[k]);
            if (k > 0) CHECK(on_edge(line[k - 1], line[k], false));
        }
    CHECK(static_cast<int>(seen_y.size()) == m.num_vertices());
    CHECK(static_cast<int>(seen_x.size()) == m.num_vertices());
    CHECK(std::set<int>(seen_y.begin(), seen_y.end()).size() == seen_y.size());
}
