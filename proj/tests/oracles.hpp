#pragma once

// Brute-force dense reference computations shared by the unit tests and the
// acceptance binary. Nothing here reuses the library's element tables.

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "amlmc/fem.hpp"
#include "amlmc/mesh.hpp"

namespace oracle {

using Fn = std::function<double(double, double)>;

// Bilinear shape functions on [0,1]^2, corners (0,0), (1,0), (0,1), (1,1).
inline double shape(int i, double s, double t) {
    const double a = (i & 1) ? s : 1.0 - s;
    const double b = (i & 2) ? t : 1.0 - t;
    return a * b;
}

inline std::array<double, 2> shape_grad(int i, double s, double t) {
    const double a = (i & 1) ? s : 1.0 - s, da = (i & 1) ? 1.0 : -1.0;
    const double b = (i & 2) ? t : 1.0 - t, db = (i & 2) ? 1.0 : -1.0;
    return {da * b, a * db};
}

// Vertex values = P * DoF values.
inline Eigen::MatrixXd prolongation(const amlmc::Discretization& disc) {
    const auto& m = disc.mesh();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m.num_vertices(), disc.num_dofs());
    for (int v = 0; v < m.num_vertices(); ++v)
        if (disc.dof(v) >= 0) P(v, disc.dof(v)) = 1.0;
    for (const auto& h : m.hanging())
        for (int master : {h.master0, h.master1})
            if (disc.dof(master) >= 0) P(h.vertex, disc.dof(master)) += 0.5;
    return P;
}

inline void for_each_gauss(const amlmc::QuadMesh& m, int c, const std::function<void(double, double, double, double, double)>& f) {
    const double g = 0.5 / std::sqrt(3.0);
    const double h = m.cell_h(c);
    const auto o = m.cell_origin(c);
    for (double s : {0.5 - g, 0.5 + g})
        for (double t : {0.5 - g, 0.5 + g}) f(s, t, o[0] + s * h, o[1] + t * h, 0.25 * h * h);
}

// Full vertex stiffness with 2x2 Gauss, condensed as P^T K P.
inline Eigen::MatrixXd dense_stiffness(const amlmc::Discretization& disc, const Fn& a) {
    const auto& m = disc.mesh();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m.num_vertices(), m.num_vertices());
    for (int c = 0; c < m.num_cells(); ++c) {
        const auto& cv = m.cell_vertices(c);
        const double h = m.cell_h(c);
        for_each_gauss(m, c, [&](double s, double t, double x, double y, double w) {
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    const auto gi = shape_grad(i, s, t), gj = shape_grad(j, s, t);
                    K(cv[i], cv[j]) += w * a(x, y) * (gi[0] * gj[0] + gi[1] * gj[1]) / (h * h);
                }
        });
    }
    const auto P = prolongation(disc);
    return P.transpose() * K * P;
}

inline Eigen::VectorXd dense_load(const amlmc::Discretization& disc, const Fn& f) {
    const auto& m = disc.mesh();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m.num_vertices());
    for (int c = 0; c < m.num_cells(); ++c) {
        const auto& cv = m.cell_vertices(c);
        for_each_gauss(m, c, [&](double s, double t, double x, double y, double w) {
            for (int i = 0; i < 4; ++i) b(cv[i]) += w * f(x, y) * shape(i, s, t);
        });
    }
    return prolongation(disc).transpose() * b;
}

inline Eigen::MatrixXd to_dense(const amlmc::CsrMatrix& A) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(A.n, A.n);
    for (int r = 0; r < A.n; ++r)
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) D(r, A.col[k]) += A.val[k];
    return D;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Balanced mesh from `rounds` passes of random marking.
inline amlmc::QuadMesh random_mesh(amlmc::QuadMesh m, int rounds, double p, std::mt19937& rng) {
    std::bernoulli_distribution mark(p);
    for (int r = 0; r < rounds; ++r) {
        std::vector<int> cells;
        for (int c = 0; c < m.num_cells(); ++c)
            if (mark(rng)) cells.push_back(c);
        if (cells.empty()) cells.push_back(0);
        m = m.refine(cells);
    }
    return m;
}

// Composite Gauss-Legendre (5 points per panel) on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, int panels = 200) {
    static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                0.9061798459386640};
    static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                0.2369268850561891};
    const double h = (b - a) / panels;
    double s = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h;
        for (int q = 0; q < 5; ++q) s += w[q] * f(c + 0.5 * h * x[q]);
    }
    return 0.5 * h * s;
}

}  // namespace oracle
