#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "amlmc/mesh.hpp"
#include "amlmc/random_field.hpp"

namespace amlmc {

struct CsrMatrix {
    int n = 0;
    std::vector<int> row_ptr, col;
    std::vector<double> val;

    std::size_t nnz() const { return val.size(); }
    void multiply(const double* x, double* y) const;
    std::vector<double> diagonal() const;
};

struct SparseSystem {
    CsrMatrix matrix;
    std::vector<double> rhs;
};

// Q(u) = (g * 1_{D0}, u) with a Gaussian kernel of covariance (1/16) I.
struct QoIFunctional {
    Rect region{0.25, -0.5, 0.5, -0.25};
    double sigma = 0.25;

    double weight(double x, double y) const;
    // Exact integral of the weight over a rectangle.
    double integral(const Rect& r) const;
};

double qoi_weight(double x, double y);

// Q1 discretisation of -div(a grad u) = f on a quadtree mesh. Hanging
// vertices are condensed onto their masters, Dirichlet vertices removed.
// Everything that does not depend on a is precomputed here.
class Discretization {
public:
    static constexpr double kSource = 1000.0;
    using Source = std::function<double(double, double)>;

    // An empty source means the constant kSource.
    explicit Discretization(QuadMesh mesh, QoIFunctional qoi = {}, Source source = {});

    const QuadMesh& mesh() const { return mesh_; }
    const QoIFunctional& qoi_functional() const { return qoi_; }
    int num_dofs() const { return ndof_; }
    // DoF of a vertex, or -1 for Dirichlet and hanging vertices.
    int dof(int vertex) const { return dof_[vertex]; }
    const std::vector<int>& dof_vertices() const { return dof_vertex_; }

    // 4 Gauss points per cell (cell-major), followed by every vertex.
    const PointSet& eval_points() const { return points_; }
    std::size_t vertex_point(int v) const { return 4 * static_cast<std::size_t>(mesh_.num_cells()) + v; }

    // Coefficient values given at eval_points().
    CsrMatrix assemble(const std::vector<double>& a_values) const;
    std::vector<double> evaluate_field(const FieldSample& field) const;

    const std::vector<double>& primal_rhs() const { return primal_rhs_; }
    const std::vector<double>& dual_rhs() const { return dual_rhs_; }
    std::size_t matrix_nnz() const { return col_.size(); }

    // Vertex values from DoF values (Dirichlet 0, hanging interpolated).
    std::vector<double> expand(const std::vector<double>& u) const;
    double qoi(const std::vector<double>& u) const;

private:
    QuadMesh mesh_;
    QoIFunctional qoi_;
    int ndof_ = 0;
    std::vector<int> dof_, dof_vertex_;
    PointSet points_;
    std::vector<int> row_ptr_, col_;
    // Assembly plan: value[pos] += weight * K_cell[ij]; entries grouped by cell.
    std::vector<int> plan_pos_, plan_cell_start_;
    std::vector<std::uint8_t> plan_ij_;
    std::vector<double> plan_w_;
    std::vector<double> primal_rhs_, dual_rhs_;
};

// Reference element matrices: K_cell = sum_q a(x_q) B[q] on any square.
const std::array<std::array<double, 16>, 4>& q1_gradient_products();
// Gauss points of a cell as (x, y).
std::array<std::array<double, 2>, 4> gauss_points(const QuadMesh& mesh, int cell);

SparseSystem assemble_system(const Discretization& disc, const FieldSample& field);
std::vector<double> assemble_primal_rhs(const Discretization& disc);
std::vector<double> assemble_dual_rhs(const Discretization& disc);
double evaluate_qoi(const Discretization& disc, const std::vector<double>& u);

}  // namespace amlmc
