#include "amlmc/error_density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace amlmc {

DensityPlan::DensityPlan(const QuadMesh& mesh) : lines_(assemble_lines(mesh)) {
    nv_ = mesh.num_vertices();
    cell_vertices_.resize(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) cell_vertices_[c] = mesh.cell_vertices(c);

    // Immediate neighbours along both lines through each vertex.
    std::vector<std::vector<int>> nbr(nv_);
    for (const auto* family : {&lines_.y_lines, &lines_.x_lines})
        for (const auto& line : *family)
            for (std::size_t k = 0; k < line.size(); ++k) {
                if (k > 0) nbr[line[k]].push_back(line[k - 1]);
                if (k + 1 < line.size()) nbr[line[k]].push_back(line[k + 1]);
            }

    for (int d = 0; d < 2; ++d) {
        const auto& family = d == 0 ? lines_.y_lines : lines_.x_lines;
        auto coord = [&](int v) { return d == 0 ? mesh.vertex_x(v) : mesh.vertex_y(v); };
        std::vector<char> known(nv_, 0);
        for (const auto& line : family) {
            std::vector<int> s;
            for (int v : line)
                if (!mesh.is_hanging(v)) s.push_back(v);
            if (s.size() < 3) continue;
            auto stencil_at = [&](std::size_t k) {
                const double h1 = coord(s[k]) - coord(s[k - 1]);
                const double h2 = coord(s[k + 1]) - coord(s[k]);
                return std::array<double, 3>{2.0 / (h1 * (h1 + h2)), -2.0 / (h1 * h2),
                                             2.0 / (h2 * (h1 + h2))};
            };
            for (std::size_t k = 0; k < s.size(); ++k) {
                const std::size_t m = std::clamp<std::size_t>(k, 1, s.size() - 2);
                stencils_[d].push_back({s[k], {s[m - 1], s[m], s[m + 1]}, stencil_at(m)});
                known[s[k]] = 1;
            }
        }
        // Fill order: hanging vertices from their edge end points, the rest
        // from whichever line neighbours are already known.
        std::vector<int> hang_of(nv_, -1);
        for (std::size_t h = 0; h < mesh.hanging().size(); ++h) hang_of[mesh.hanging()[h].vertex] = static_cast<int>(h);
        bool progress = true;
        while (progress) {
            progress = false;
            std::vector<Fill> batch;
            for (int v = 0; v < nv_; ++v) {
                if (known[v]) continue;
                Fill f{v, {}};
                if (hang_of[v] >= 0) {
                    const auto& hv = mesh.hanging()[hang_of[v]];
                    if (known[hv.master0] && known[hv.master1]) f.from = {hv.master0, hv.master1};
                } else {
                    for (int u : nbr[v])
                        if (known[u]) f.from.push_back(u);
                }
                if (!f.from.empty()) batch.push_back(std::move(f));
            }
            for (auto& f : batch) known[f.v] = 1;
            progress = !batch.empty();
            for (auto& f : batch) fills_[d].push_back(std::move(f));
        }
        // Isolated vertices (cannot occur on balanced meshes with >= 2x2
        // base cells) keep a zero quotient.
    }
}

VertexQuotients DensityPlan::quotients(const std::vector<double>& w) const {
    if (static_cast<int>(w.size()) != nv_) throw std::invalid_argument("quotients: size mismatch");
    VertexQuotients q{std::vector<double>(nv_, 0.0), std::vector<double>(nv_, 0.0)};
    for (int d = 0; d < 2; ++d) {
        auto& out = q[d];
        for (const auto& s : stencils_[d])
            out[s.v] = s.c[0] * w[s.idx[0]] + s.c[1] * w[s.idx[1]] + s.c[2] * w[s.idx[2]];
        for (const auto& f : fills_[d]) {
            double sum = 0.0;
            for (int u : f.from) sum += out[u];
            out[f.v] = sum / static_cast<double>(f.from.size());
        }
    }
    return q;
}

VertexQuotients DensityPlan::averaged(const VertexQuotients& raw) const {
    VertexQuotients out{std::vector<double>(nv_, 0.0), std::vector<double>(nv_, 0.0)};
    for (int d = 0; d < 2; ++d) {
        const auto& family = d == 0 ? lines_.y_lines : lines_.x_lines;
        for (const auto& line : family) {
            const std::size_t n = line.size();
            for (std::size_t k = 0; k < n; ++k) {
                double s = raw[d][line[k]];
                int cnt = 1;
                if (k > 0) s += raw[d][line[k - 1]], ++cnt;
                if (k + 1 < n) s += raw[d][line[k + 1]], ++cnt;
                out[d][line[k]] = s / cnt;
            }
        }
    }
    return out;
}

std::vector<double> DensityPlan::cell_density(const std::vector<double>& a,
                                              const VertexQuotients& du,
                                              const VertexQuotients& dp) const {
    std::vector<double> rho(cell_vertices_.size());
    for (std::size_t c = 0; c < cell_vertices_.size(); ++c) {
        double s = 0.0;
        for (int v : cell_vertices_[c]) s += a[v] * (du[0][v] * dp[0][v] + du[1][v] * dp[1][v]);
        rho[c] = s / 48.0;
    }
    return rho;
}

VertexQuotients difference_quotients(const QuadMesh& mesh, const std::vector<double>& w) {
    return DensityPlan(mesh).quotients(w);
}

VertexQuotients averaged_quotients(const QuadMesh& mesh, const VertexQuotients& raw) {
    return DensityPlan(mesh).averaged(raw);
}

std::vector<double> density_cells(const QuadMesh& mesh, const FieldSample& field,
                                  const std::vector<double>& u, const std::vector<double>& phi) {
    DensityPlan plan(mesh);
    std::vector<double> a(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) a[v] = field(mesh.vertex_x(v), mesh.vertex_y(v));
    return plan.cell_density(a, plan.averaged(plan.quotients(u)), plan.averaged(plan.quotients(phi)));
}

Norms density_norms(const std::vector<double>& rho, const QuadMesh& mesh) {
    Norms n;
    double half = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const double h = mesh.cell_h(c), a = h * h, r = std::abs(rho[c]);
        n.l1 += r * a;
        half += std::sqrt(r) * a;
    }
    n.lhalf = half * half;
    return n;
}

double scaling_numerator(const std::vector<double>& rho_bar, const QuadMesh& mesh) {
    double s = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const double h = mesh.cell_h(c);
        s += std::sqrt(std::abs(rho_bar[c])) * h * h;
    }
    return s;
}

std::vector<double> bound_density(const std::vector<double>& rho_tilde, double tol,
                                  const QuadMesh& mesh, const DensityOptions& opt, double* delta,
                                  double* delta_up) {
    if (!(tol > 0.0)) throw std::invalid_argument("bound_density: tol must be positive");
    const double area = mesh.domain().area();
    const double scale = density_norms(rho_tilde, mesh).lhalf / (area * area);
    const double lo = scale * std::sqrt(tol);
    const double hi = opt.upper_bound ? scale * std::pow(tol, -opt.upper_exponent)
                                      : std::numeric_limits<double>::infinity();
    if (delta) *delta = lo;
    if (delta_up) *delta_up = hi;
    std::vector<double> out(rho_tilde.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        const double r = rho_tilde[c];
        const double mag = std::min(std::max(std::abs(r), lo), std::max(hi, lo));
        out[c] = r < 0.0 ? -mag : mag;
    }
    return out;
}

Estimate indicators_and_estimate(const std::vector<double>& rho_bar, const QuadMesh& mesh) {
    Estimate e;
    e.indicators.resize(rho_bar.size());
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const double h = mesh.cell_h(c), h2 = h * h;
        const double r = rho_bar[c] * h2 * h2;
        e.indicators[c] = r;
        e.e_est += r;
        e.e_est_abs += std::abs(r);
    }
    return e;
}

DensityField estimate_density(const DensityPlan& plan, const Discretization& disc,
                              const std::vector<double>& a_values, const std::vector<double>& u,
                              const std::vector<double>& phi, double tol,
                              const DensityOptions& opt) {
    const QuadMesh& mesh = disc.mesh();
    const int nv = mesh.num_vertices();
    std::vector<double> a(nv);
    for (int v = 0; v < nv; ++v) a[v] = a_values[disc.vertex_point(v)];
    const auto du = plan.averaged(plan.quotients(disc.expand(u)));
    const auto dp = plan.averaged(plan.quotients(disc.expand(phi)));
    DensityField d;
    d.rho_tilde = plan.cell_density(a, du, dp);
    d.rho_bar = bound_density(d.rho_tilde, tol, mesh, opt, &d.delta, &d.delta_up);
    auto est = indicators_and_estimate(d.rho_bar, mesh);
    d.indicators = std::move(est.indicators);
    d.e_est = est.e_est;
    d.e_est_abs = est.e_est_abs;
    const auto n = density_norms(d.rho_bar, mesh);
    d.l1 = n.l1;
    d.lhalf = n.lhalf;
    d.scaling_numerator = scaling_numerator(d.rho_bar, mesh);
    return d;
}

void write_density_csv(const std::string& path, const QuadMesh& mesh, const DensityField& d,
                       const std::string& header_comment) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "cell,x,y,h,rho_tilde,rho_bar,r\n" << std::setprecision(12);
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto ctr = mesh.cell_center(c);
        os << c << ',' << ctr[0] << ',' << ctr[1] << ',' << mesh.cell_h(c) << ',' << d.rho_tilde[c]
           << ',' << d.rho_bar[c] << ',' << d.indicators[c] << '\n';
    }
}

}  // namespace amlmc
