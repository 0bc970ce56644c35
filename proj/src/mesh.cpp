#include "amlmc/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace amlmc {

namespace {

constexpr std::int64_t unit_size(int level) {
    return std::int64_t{1} << (QuadMesh::kMaxLevel - level);
}

std::array<CellKey, 4> children(const CellKey& k) {
    const int l = k.level + 1;
    return {CellKey{l, 2 * k.i, 2 * k.j}, CellKey{l, 2 * k.i + 1, 2 * k.j},
            CellKey{l, 2 * k.i, 2 * k.j + 1}, CellKey{l, 2 * k.i + 1, 2 * k.j + 1}};
}

// Leaf of `leaves` containing the level-l cell (l, i, j), searching ancestors
// only. Returns false when the region is covered by finer leaves.
bool find_covering(const std::set<CellKey>& leaves, int l, std::int64_t i, std::int64_t j,
                   CellKey& out) {
    for (int m = l; m >= 0; --m) {
        const int s = l - m;
        CellKey k{m, i >> s, j >> s};
        if (leaves.count(k)) {
            out = k;
            return true;
        }
    }
    return false;
}

const int kDirs[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

void check_domain(const Rect& d, int nx, int ny) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("mesh: nx and ny must be >= 1");
    if (!(d.width() > 0.0) || !(d.height() > 0.0))
        throw std::invalid_argument("mesh: domain must have positive area");
    const double hx = d.width() / nx, hy = d.height() / ny;
    if (std::abs(hx - hy) > 1e-12 * std::max(hx, hy))
        throw std::invalid_argument("mesh: base cells must be squares");
}

}  // namespace

QuadMesh QuadMesh::base(const Rect& domain, int nx, int ny, std::vector<Segment> neumann) {
    check_domain(domain, nx, ny);
    std::vector<CellKey> leaves;
    leaves.reserve(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) leaves.push_back({0, i, j});
    return from_leaves(domain, nx, ny, std::move(neumann), std::move(leaves));
}

QuadMesh QuadMesh::from_leaves(const Rect& domain, int nx, int ny, std::vector<Segment> neumann,
                               std::vector<CellKey> leaves) {
    check_domain(domain, nx, ny);
    QuadMesh m;
    m.domain_ = domain;
    m.nx_ = nx;
    m.ny_ = ny;
    m.h0_ = domain.width() / nx;
    m.neumann_ = std::move(neumann);
    m.cells_ = std::move(leaves);
    m.build();
    return m;
}

void QuadMesh::build() {
    std::sort(cells_.begin(), cells_.end());
    if (std::adjacent_find(cells_.begin(), cells_.end()) != cells_.end())
        throw std::invalid_argument("mesh: duplicate leaf cell");
    cell_index_.clear();
    for (int c = 0; c < num_cells(); ++c) {
        const auto& k = cells_[c];
        if (k.level < 0 || k.level >= kMaxLevel) throw std::invalid_argument("mesh: bad level");
        if (k.i < 0 || k.j < 0 || k.i >= (std::int64_t{nx_} << k.level) ||
            k.j >= (std::int64_t{ny_} << k.level))
            throw std::invalid_argument("mesh: cell outside domain");
        cell_index_.emplace(k, c);
    }

    // Vertices are numbered lexicographically by (y, x).
    std::vector<std::pair<std::int64_t, std::int64_t>> pts;
    pts.reserve(4 * cells_.size());
    for (const auto& k : cells_) {
        const std::int64_t s = unit_size(k.level), X = k.i * s, Y = k.j * s;
        pts.emplace_back(Y, X);
        pts.emplace_back(Y, X + s);
        pts.emplace_back(Y + s, X);
        pts.emplace_back(Y + s, X + s);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const int nv = static_cast<int>(pts.size());
    vx_.resize(nv);
    vy_.resize(nv);
    for (int v = 0; v < nv; ++v) {
        vy_[v] = pts[v].first;
        vx_[v] = pts[v].second;
    }
    auto lookup = [&](std::int64_t X, std::int64_t Y) -> int {
        auto it = std::lower_bound(pts.begin(), pts.end(), std::make_pair(Y, X));
        if (it == pts.end() || *it != std::make_pair(Y, X)) return -1;
        return static_cast<int>(it - pts.begin());
    };

    cell_vertices_.resize(cells_.size());
    hanging_index_.assign(nv, -1);
    hanging_.clear();
    for (int c = 0; c < num_cells(); ++c) {
        const auto& k = cells_[c];
        const std::int64_t s = unit_size(k.level), X = k.i * s, Y = k.j * s;
        cell_vertices_[c] = {lookup(X, Y), lookup(X + s, Y), lookup(X, Y + s),
                             lookup(X + s, Y + s)};
        const auto& cv = cell_vertices_[c];
        const std::int64_t hs = s / 2;
        const std::array<std::array<std::int64_t, 2>, 4> mids = {
            {{X + hs, Y}, {X + hs, Y + s}, {X, Y + hs}, {X + s, Y + hs}}};
        const std::array<std::array<int, 2>, 4> ends = {{{cv[0], cv[1]}, {cv[2], cv[3]},
                                                         {cv[0], cv[2]}, {cv[1], cv[3]}}};
        for (int e = 0; e < 4; ++e) {
            const int v = lookup(mids[e][0], mids[e][1]);
            if (v < 0) continue;
            if (hanging_index_[v] >= 0)
                throw std::logic_error("mesh: vertex hanging on two edges");
            hanging_index_[v] = static_cast<int>(hanging_.size());
            hanging_.push_back({v, ends[e][0], ends[e][1]});
        }
    }
    std::sort(hanging_.begin(), hanging_.end(),
              [](const HangingVertex& a, const HangingVertex& b) { return a.vertex < b.vertex; });
    for (int h = 0; h < static_cast<int>(hanging_.size()); ++h) hanging_index_[hanging_[h].vertex] = h;

    dirichlet_.assign(nv, 0);
    for (int v = 0; v < nv; ++v) {
        const double x = vertex_x(v), y = vertex_y(v);
        dirichlet_[v] = on_boundary(x, y) && !in_neumann(x, y);
    }
}

bool QuadMesh::on_boundary(double x, double y) const {
    return x == domain_.x0 || x == domain_.x1 || y == domain_.y0 || y == domain_.y1;
}

bool QuadMesh::in_neumann(double x, double y) const {
    // Relative interior of a segment; its end points stay Dirichlet.
    for (const auto& s : neumann_) {
        if (s.y0 == s.y1 && y == s.y0) {
            if (x > std::min(s.x0, s.x1) && x < std::max(s.x0, s.x1)) return true;
        } else if (s.x0 == s.x1 && x == s.x0) {
            if (y > std::min(s.y0, s.y1) && y < std::max(s.y0, s.y1)) return true;
        }
    }
    return false;
}

double QuadMesh::cell_h(int c) const { return std::ldexp(h0_, -cells_[c].level); }

std::array<double, 2> QuadMesh::cell_origin(int c) const {
    const double h = cell_h(c);
    return {domain_.x0 + cells_[c].i * h, domain_.y0 + cells_[c].j * h};
}

std::array<double, 2> QuadMesh::cell_center(int c) const {
    const double h = cell_h(c);
    auto o = cell_origin(c);
    return {o[0] + 0.5 * h, o[1] + 0.5 * h};
}

double QuadMesh::vertex_x(int v) const {
    return domain_.x0 + std::ldexp(h0_, -kMaxLevel) * static_cast<double>(vx_[v]);
}

double QuadMesh::vertex_y(int v) const {
    return domain_.y0 + std::ldexp(h0_, -kMaxLevel) * static_cast<double>(vy_[v]);
}

double QuadMesh::smallest_cell_size() const { return std::ldexp(h0_, -max_level()); }

double QuadMesh::largest_cell_size() const {
    int lmin = kMaxLevel;
    for (const auto& k : cells_) lmin = std::min(lmin, k.level);
    return std::ldexp(h0_, -lmin);
}

int QuadMesh::max_level() const {
    int l = 0;
    for (const auto& k : cells_) l = std::max(l, k.level);
    return l;
}

int QuadMesh::find_cell(const CellKey& key) const {
    auto it = cell_index_.find(key);
    return it == cell_index_.end() ? -1 : it->second;
}

QuadMesh QuadMesh::refine(const std::vector<int>& marked) const {
    std::set<CellKey> leaves(cells_.begin(), cells_.end());
    std::deque<CellKey> queue;
    auto split = [&](const CellKey& k) {
        if (k.level + 1 >= kMaxLevel) throw std::runtime_error("mesh: maximum refinement depth");
        leaves.erase(k);
        for (const auto& ch : children(k)) {
            leaves.insert(ch);
            queue.push_back(ch);
        }
    };
    for (int c : marked) {
        if (c < 0 || c >= num_cells()) throw std::out_of_range("mesh: marked cell index");
        if (leaves.count(cells_[c])) split(cells_[c]);
    }
    // Balance closure: any leaf more than one level coarser than an edge
    // neighbour is split, and its children are checked in turn.
    while (!queue.empty()) {
        const CellKey k = queue.front();
        queue.pop_front();
        if (!leaves.count(k)) continue;
        const std::int64_t ni = std::int64_t{nx_} << k.level, nj = std::int64_t{ny_} << k.level;
        for (const auto& d : kDirs) {
            const std::int64_t i = k.i + d[0], j = k.j + d[1];
            if (i < 0 || j < 0 || i >= ni || j >= nj) continue;
            CellKey cover;
            if (find_covering(leaves, k.level, i, j, cover) && cover.level < k.level - 1)
                split(cover);
        }
    }
    return from_leaves(domain_, nx_, ny_, neumann_, {leaves.begin(), leaves.end()});
}

QuadMesh QuadMesh::refine_uniform(int times) const {
    QuadMesh m = *this;
    for (int t = 0; t < times; ++t) {
        std::vector<int> all(m.num_cells());
        for (int c = 0; c < m.num_cells(); ++c) all[c] = c;
        m = m.refine(all);
    }
    return m;
}

bool QuadMesh::is_balanced() const {
    std::set<CellKey> leaves(cells_.begin(), cells_.end());
    for (const auto& k : cells_) {
        const std::int64_t ni = std::int64_t{nx_} << k.level, nj = std::int64_t{ny_} << k.level;
        for (const auto& d : kDirs) {
            const std::int64_t i = k.i + d[0], j = k.j + d[1];
            if (i < 0 || j < 0 || i >= ni || j >= nj) continue;
            CellKey cover;
            if (find_covering(leaves, k.level, i, j, cover) && cover.level < k.level - 1)
                return false;
        }
    }
    return true;
}

void QuadMesh::write(std::ostream& os) const {
    os << "quadmesh 1\n" << std::setprecision(17);
    os << "domain " << domain_.x0 << ' ' << domain_.y0 << ' ' << domain_.x1 << ' ' << domain_.y1
       << '\n';
    os << "base " << nx_ << ' ' << ny_ << '\n';
    os << "neumann " << neumann_.size() << '\n';
    for (const auto& s : neumann_) os << s.x0 << ' ' << s.y0 << ' ' << s.x1 << ' ' << s.y1 << '\n';
    os << "cells " << cells_.size() << '\n';
    for (const auto& k : cells_) os << k.level << ' ' << k.i << ' ' << k.j << '\n';
}

QuadMesh QuadMesh::read(std::istream& is) {
    auto expect = [&](const char* word) {
        std::string w;
        if (!(is >> w) || w != word)
            throw std::runtime_error(std::string("mesh file: expected '") + word + "'");
    };
    int version = 0;
    expect("quadmesh");
    is >> version;
    if (version != 1) throw std::runtime_error("mesh file: unsupported version");
    Rect d{};
    expect("domain");
    is >> d.x0 >> d.y0 >> d.x1 >> d.y1;
    int nx = 0, ny = 0;
    expect("base");
    is >> nx >> ny;
    std::size_t ns = 0;
    expect("neumann");
    is >> ns;
    std::vector<Segment> segs(ns);
    for (auto& s : segs) is >> s.x0 >> s.y0 >> s.x1 >> s.y1;
    std::size_t nc = 0;
    expect("cells");
    is >> nc;
    std::vector<CellKey> leaves(nc);
    for (auto& k : leaves) is >> k.level >> k.i >> k.j;
    if (!is) throw std::runtime_error("mesh file: truncated");
    return from_leaves(d, nx, ny, std::move(segs), std::move(leaves));
}

void QuadMesh::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write(os);
}

QuadMesh QuadMesh::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read(is);
}

LineStructure assemble_lines(const QuadMesh& mesh) {
    const int nv = mesh.num_vertices();
    // Vertex numbering is already (y, x)-lexicographic, so y-lines are runs.
    std::vector<std::vector<int>> rows, cols;
    for (int v = 0; v < nv; ++v) {
        if (v == 0 || mesh.vertex_iy(v) != mesh.vertex_iy(v - 1)) rows.emplace_back();
        rows.back().push_back(v);
    }
    std::vector<int> order(nv);
    for (int v = 0; v < nv; ++v) order[v] = v;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (mesh.vertex_ix(a) != mesh.vertex_ix(b)) return mesh.vertex_ix(a) < mesh.vertex_ix(b);
        return mesh.vertex_iy(a) < mesh.vertex_iy(b);
    });
    for (int n = 0; n < nv; ++n) {
        if (n == 0 || mesh.vertex_ix(order[n]) != mesh.vertex_ix(order[n - 1])) cols.emplace_back();
        cols.back().push_back(order[n]);
    }

    // Split each line where consecutive vertices share no cell edge.
    auto split = [&](const std::vector<std::vector<int>>& raw, int lo0, int hi0, int lo1, int hi1, bool by_y,
                     std::vector<double>& keys, std::vector<std::vector<int>>& out) {
        std::vector<int> pos(nv), which(nv);
        for (std::size_t l = 0; l < raw.size(); ++l)
            for (std::size_t k = 0; k < raw[l].size(); ++k) {
                pos[raw[l][k]] = static_cast<int>(k);
                which[raw[l][k]] = static_cast<int>(l);
            }
        std::vector<char> linked(nv, 0);  // joined to the next vertex of its line
        for (int c = 0; c < mesh.num_cells(); ++c) {
            const auto& cv = mesh.cell_vertices(c);
            for (auto [a, b] : {std::pair{cv[lo0], cv[hi0]}, std::pair{cv[lo1], cv[hi1]}}) {
                const auto& line = raw[which[a]];
                for (int k = pos[a]; k < pos[b]; ++k) linked[line[k]] = 1;
            }
        }
        for (const auto& line : raw)
            for (std::size_t k = 0; k < line.size(); ++k) {
                if (k == 0 || !linked[line[k - 1]]) {
                    keys.push_back(by_y ? mesh.vertex_y(line[k]) : mesh.vertex_x(line[k]));
                    out.emplace_back();
                }
                out.back().push_back(line[k]);
            }
    };
    LineStructure ls;
    split(rows, 0, 1, 2, 3, true, ls.y_keys, ls.y_lines);
    split(cols, 0, 2, 1, 3, false, ls.x_keys, ls.x_lines);
    return ls;
}

std::vector<ConstraintEntry> hanging_constraints(const QuadMesh& mesh) {
    std::vector<ConstraintEntry> out;
    out.reserve(mesh.hanging().size());
    for (const auto& h : mesh.hanging())
        out.push_back({h.vertex, {h.master0, h.master1}, {0.5, 0.5}});
    return out;
}

Rect problem_domain() { return {-1.0, -1.0, 1.0, 0.0}; }

std::vector<Segment> problem_neumann() { return {{-1.0, 0.0, 0.0, 0.0}}; }

QuadMesh problem_base_mesh(int cells_per_unit) {
    return QuadMesh::base(problem_domain(), 2 * cells_per_unit, cells_per_unit, problem_neumann());
}

}  // namespace amlmc
