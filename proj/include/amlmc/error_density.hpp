#pragma once

#include <array>
#include <string>
#include <vector>

#include "amlmc/fem.hpp"
#include "amlmc/mesh.hpp"

namespace amlmc {

using VertexQuotients = std::array<std::vector<double>, 2>;  // (D1^2 w, D2^2 w)

struct DensityOptions {
    // Optional cap |rho_bar| <= ||rho~||_{1/2} / |D|^2 * TOL^{-upper_exponent}.
    // Off by default: it clips the corner singularity.
    bool upper_bound = false;
    double upper_exponent = 0.5;
};

struct DensityField {
    std::vector<double> rho_tilde, rho_bar, indicators;
    double delta = 0.0, delta_up = 0.0;
    double e_est = 0.0, e_est_abs = 0.0;
    double l1 = 0.0, lhalf = 0.0;  // norms of rho_bar
    double scaling_numerator = 0.0;
};

// Precomputed stencils for the averaged second difference quotients of a
// mesh. Quotients use the conforming vertices of each line; hanging vertices
// and vertices on lines too short for a three-point stencil are filled from
// neighbouring values afterwards.
class DensityPlan {
public:
    explicit DensityPlan(const QuadMesh& mesh);

    VertexQuotients quotients(const std::vector<double>& w) const;
    VertexQuotients averaged(const VertexQuotients& raw) const;
    std::vector<double> cell_density(const std::vector<double>& a_vertex,
                                     const VertexQuotients& du,
                                     const VertexQuotients& dphi) const;

    const LineStructure& lines() const { return lines_; }

private:
    struct Stencil {
        int v;
        std::array<int, 3> idx;
        std::array<double, 3> c;
    };
    struct Fill {
        int v;
        std::vector<int> from;
    };
    LineStructure lines_;
    std::array<std::vector<Stencil>, 2> stencils_;
    std::array<std::vector<Fill>, 2> fills_;
    std::vector<std::array<int, 4>> cell_vertices_;
    int nv_ = 0;
};

VertexQuotients difference_quotients(const QuadMesh& mesh, const std::vector<double>& w);
VertexQuotients averaged_quotients(const QuadMesh& mesh, const VertexQuotients& raw);
std::vector<double> density_cells(const QuadMesh& mesh, const FieldSample& field,
                                  const std::vector<double>& u, const std::vector<double>& phi);

std::vector<double> bound_density(const std::vector<double>& rho_tilde, double tol,
                                  const QuadMesh& mesh, const DensityOptions& opt = {},
                                  double* delta = nullptr, double* delta_up = nullptr);

struct Estimate {
    std::vector<double> indicators;
    double e_est = 0.0, e_est_abs = 0.0;
};
Estimate indicators_and_estimate(const std::vector<double>& rho_bar, const QuadMesh& mesh);

struct Norms {
    double l1 = 0.0, lhalf = 0.0;
};
Norms density_norms(const std::vector<double>& rho, const QuadMesh& mesh);
double scaling_numerator(const std::vector<double>& rho_bar, const QuadMesh& mesh);

// Full pipeline from DoF solutions to the bounded density and estimate.
DensityField estimate_density(const DensityPlan& plan, const Discretization& disc,
                              const std::vector<double>& a_values, const std::vector<double>& u,
                              const std::vector<double>& phi, double tol,
                              const DensityOptions& opt = {});

// Per-cell CSV: id, centre, h, rho~, rho_bar, r.
void write_density_csv(const std::string& path, const QuadMesh& mesh, const DensityField& d,
                       const std::string& header_comment = {});

}  // namespace amlmc
