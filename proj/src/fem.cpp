#include "amlmc/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace amlmc {

namespace {

const double kGauss[2] = {0.5 - 0.5 / std::numbers::sqrt3, 0.5 + 0.5 / std::numbers::sqrt3};

double phi_std(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Antiderivative of the standard normal CDF.
double phi_int(double t) {
    return t * phi_std(t) + std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

double shape(int i, double s, double t) {
    const double fs = (i & 1) ? s : 1.0 - s;
    const double ft = (i & 2) ? t : 1.0 - t;
    return fs * ft;
}

std::array<double, 2> shape_grad(int i, double s, double t) {
    const double fs = (i & 1) ? s : 1.0 - s, ds = (i & 1) ? 1.0 : -1.0;
    const double ft = (i & 2) ? t : 1.0 - t, dt = (i & 2) ? 1.0 : -1.0;
    return {ds * ft, fs * dt};
}

std::array<double, 2> gauss_st(int q) { return {kGauss[q & 1], kGauss[(q >> 1) & 1]}; }

}  // namespace

void CsrMatrix::multiply(const double* x, double* y) const {
    for (int r = 0; r < n; ++r) {
        double s = 0.0;
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k] * x[col[k]];
        y[r] = s;
    }
}

std::vector<double> CsrMatrix::diagonal() const {
    std::vector<double> d(n, 0.0);
    for (int r = 0; r < n; ++r)
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
            if (col[k] == r) d[r] = val[k];
    return d;
}

double QoIFunctional::weight(double x, double y) const {
    const double wx = phi_std((region.x1 - x) / sigma) - phi_std((region.x0 - x) / sigma);
    const double wy = phi_std((region.y1 - y) / sigma) - phi_std((region.y0 - y) / sigma);
    return wx * wy;
}

double QoIFunctional::integral(const Rect& r) const {
    auto axis = [&](double a, double b, double c, double d) {
        const double s = sigma;
        return s * (phi_int((b - c) / s) - phi_int((b - d) / s)) -
               s * (phi_int((a - c) / s) - phi_int((a - d) / s));
    };
    return axis(region.x0, region.x1, r.x0, r.x1) * axis(region.y0, region.y1, r.y0, r.y1);
}

double qoi_weight(double x, double y) { return QoIFunctional{}.weight(x, y); }

const std::array<std::array<double, 16>, 4>& q1_gradient_products() {
    static const auto table = [] {
        std::array<std::array<double, 16>, 4> b{};
        for (int q = 0; q < 4; ++q) {
            const auto st = gauss_st(q);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    const auto gi = shape_grad(i, st[0], st[1]);
                    const auto gj = shape_grad(j, st[0], st[1]);
                    b[q][i * 4 + j] = 0.25 * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
        }
        return b;
    }();
    return table;
}

std::array<std::array<double, 2>, 4> gauss_points(const QuadMesh& mesh, int cell) {
    const auto o = mesh.cell_origin(cell);
    const double h = mesh.cell_h(cell);
    std::array<std::array<double, 2>, 4> p{};
    for (int q = 0; q < 4; ++q) {
        const auto st = gauss_st(q);
        p[q] = {o[0] + st[0] * h, o[1] + st[1] * h};
    }
    return p;
}

Discretization::Discretization(QuadMesh mesh, QoIFunctional qoi, Source source)
    : mesh_(std::move(mesh)), qoi_(qoi) {
    const int nv = mesh_.num_vertices(), nc = mesh_.num_cells();
    dof_.assign(nv, -1);
    for (int v = 0; v < nv; ++v)
        if (!mesh_.is_dirichlet(v) && !mesh_.is_hanging(v)) {
            dof_[v] = ndof_++;
            dof_vertex_.push_back(v);
        }

    struct Link {
        int dof;
        double w;
    };
    std::vector<std::vector<Link>> vlinks(nv);
    for (const auto& c : mesh_.hanging()) {
        for (int m : {c.master0, c.master1})
            if (dof_[m] >= 0) vlinks[c.vertex].push_back({dof_[m], 0.5});
    }
    for (int v = 0; v < nv; ++v)
        if (dof_[v] >= 0) vlinks[v].push_back({dof_[v], 1.0});

    std::vector<std::array<double, 2>> pts;
    pts.reserve(4 * static_cast<std::size_t>(nc) + nv);
    for (int c = 0; c < nc; ++c)
        for (const auto& p : gauss_points(mesh_, c)) pts.push_back(p);
    for (int v = 0; v < nv; ++v) pts.push_back({mesh_.vertex_x(v), mesh_.vertex_y(v)});
    points_ = PointSet::from_points(pts);

    // Sparsity pattern.
    std::vector<std::vector<int>> rows(ndof_);
    for (int c = 0; c < nc; ++c) {
        const auto& cv = mesh_.cell_vertices(c);
        for (int i = 0; i < 4; ++i)
            for (const auto& a : vlinks[cv[i]])
                for (int j = 0; j < 4; ++j)
                    for (const auto& b : vlinks[cv[j]]) rows[a.dof].push_back(b.dof);
    }
    row_ptr_.assign(ndof_ + 1, 0);
    for (int r = 0; r < ndof_; ++r) {
        auto& row = rows[r];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        row_ptr_[r + 1] = row_ptr_[r] + static_cast<int>(row.size());
    }
    col_.reserve(row_ptr_[ndof_]);
    for (auto& row : rows) col_.insert(col_.end(), row.begin(), row.end());

    auto position = [&](int r, int cidx) {
        auto first = col_.begin() + row_ptr_[r], last = col_.begin() + row_ptr_[r + 1];
        return static_cast<int>(std::lower_bound(first, last, cidx) - col_.begin());
    };
    plan_cell_start_.assign(nc + 1, 0);
    primal_rhs_.assign(ndof_, 0.0);
    dual_rhs_.assign(ndof_, 0.0);
    for (int c = 0; c < nc; ++c) {
        const auto& cv = mesh_.cell_vertices(c);
        for (int i = 0; i < 4; ++i)
            for (const auto& a : vlinks[cv[i]])
                for (int j = 0; j < 4; ++j)
                    for (const auto& b : vlinks[cv[j]]) {
                        plan_pos_.push_back(position(a.dof, b.dof));
                        plan_ij_.push_back(static_cast<std::uint8_t>(i * 4 + j));
                        plan_w_.push_back(a.w * b.w);
                    }
        plan_cell_start_[c + 1] = static_cast<int>(plan_pos_.size());

        const double h = mesh_.cell_h(c), wq = 0.25 * h * h;
        const auto gp = gauss_points(mesh_, c);
        for (int q = 0; q < 4; ++q) {
            const auto st = gauss_st(q);
            const double g = qoi_.weight(gp[q][0], gp[q][1]);
            const double f = source ? source(gp[q][0], gp[q][1]) : kSource;
            for (int i = 0; i < 4; ++i) {
                const double phi = shape(i, st[0], st[1]);
                for (const auto& a : vlinks[cv[i]]) {
                    primal_rhs_[a.dof] += a.w * wq * f * phi;
                    dual_rhs_[a.dof] += a.w * wq * g * phi;
                }
            }
        }
    }
}

CsrMatrix Discretization::assemble(const std::vector<double>& a) const {
    const int nc = mesh_.num_cells();
    if (a.size() < 4 * static_cast<std::size_t>(nc))
        throw std::invalid_argument("assemble: coefficient vector too short");
    for (std::size_t k = 0; k < 4 * static_cast<std::size_t>(nc); ++k)
        if (!(a[k] > 0.0) || !std::isfinite(a[k]))
            throw std::domain_error("assemble: coefficient not positive and finite at a quadrature point");
    const auto& B = q1_gradient_products();
    CsrMatrix m;
    m.n = ndof_;
    m.row_ptr = row_ptr_;
    m.col = col_;
    m.val.assign(col_.size(), 0.0);
    std::array<double, 16> K;
    for (int c = 0; c < nc; ++c) {
        const double* ac = &a[4 * static_cast<std::size_t>(c)];
        for (int ij = 0; ij < 16; ++ij)
            K[ij] = ac[0] * B[0][ij] + ac[1] * B[1][ij] + ac[2] * B[2][ij] + ac[3] * B[3][ij];
        for (int e = plan_cell_start_[c]; e < plan_cell_start_[c + 1]; ++e)
            m.val[plan_pos_[e]] += plan_w_[e] * K[plan_ij_[e]];
    }
    return m;
}

std::vector<double> Discretization::evaluate_field(const FieldSample& field) const {
    std::vector<double> a(points_.size());
    field.evaluate(points_, a);
    return a;
}

std::vector<double> Discretization::expand(const std::vector<double>& u) const {
    if (static_cast<int>(u.size()) != ndof_) throw std::invalid_argument("expand: size mismatch");
    std::vector<double> w(mesh_.num_vertices(), 0.0);
    for (int d = 0; d < ndof_; ++d) w[dof_vertex_[d]] = u[d];
    for (const auto& h : mesh_.hanging()) w[h.vertex] = 0.5 * (w[h.master0] + w[h.master1]);
    return w;
}

double Discretization::qoi(const std::vector<double>& u) const {
    if (static_cast<int>(u.size()) != ndof_) throw std::invalid_argument("qoi: size mismatch");
    double s = 0.0;
    for (int d = 0; d < ndof_; ++d) s += dual_rhs_[d] * u[d];
    return s;
}

SparseSystem assemble_system(const Discretization& disc, const FieldSample& field) {
    return {disc.assemble(disc.evaluate_field(field)), disc.primal_rhs()};
}

std::vector<double> assemble_primal_rhs(const Discretization& disc) { return disc.primal_rhs(); }

std::vector<double> assemble_dual_rhs(const Discretization& disc) { return disc.dual_rhs(); }

double evaluate_qoi(const Discretization& disc, const std::vector<double>& u) { return disc.qoi(u); }

}  // namespace amlmc
