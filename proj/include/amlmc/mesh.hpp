#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace amlmc {

struct Rect {
    double x0, y0, x1, y1;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
};

// Axis-aligned boundary piece carrying a natural (Neumann) condition.
// Every other boundary vertex is Dirichlet.
struct Segment {
    double x0, y0, x1, y1;
};

struct CellKey {
    int level;
    std::int64_t i, j;
    friend bool operator==(const CellKey&, const CellKey&) = default;
    friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct HangingVertex {
    int vertex;
    int master0, master1;
};

// Leaf cells of a forest of quadtrees rooted in an nx x ny grid of squares.
// Immutable once built; refinement returns a new mesh.
class QuadMesh {
public:
    // Integer vertex coordinates are measured in units of h0 / 2^kMaxLevel.
    static constexpr int kMaxLevel = 30;

    QuadMesh() = default;

    static QuadMesh base(const Rect& domain, int nx, int ny,
                         std::vector<Segment> neumann = {});
    static QuadMesh from_leaves(const Rect& domain, int nx, int ny,
                                std::vector<Segment> neumann,
                                std::vector<CellKey> leaves);

    int num_cells() const { return static_cast<int>(cells_.size()); }
    int num_vertices() const { return static_cast<int>(vx_.size()); }

    const Rect& domain() const { return domain_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double base_h() const { return h0_; }
    const std::vector<Segment>& neumann() const { return neumann_; }

    const std::vector<CellKey>& cells() const { return cells_; }
    const CellKey& cell(int c) const { return cells_[c]; }
    double cell_h(int c) const;
    std::array<double, 2> cell_origin(int c) const;
    std::array<double, 2> cell_center(int c) const;
    // Corner vertices ordered (x0,y0), (x1,y0), (x0,y1), (x1,y1).
    const std::array<int, 4>& cell_vertices(int c) const { return cell_vertices_[c]; }

    double vertex_x(int v) const;
    double vertex_y(int v) const;
    std::int64_t vertex_ix(int v) const { return vx_[v]; }
    std::int64_t vertex_iy(int v) const { return vy_[v]; }
    bool is_dirichlet(int v) const { return dirichlet_[v]; }
    bool is_hanging(int v) const { return hanging_index_[v] >= 0; }
    const std::vector<HangingVertex>& hanging() const { return hanging_; }

    double smallest_cell_size() const;
    double largest_cell_size() const;
    int max_level() const;

    // Leaf-cell index lookup; -1 if the key is not a leaf.
    int find_cell(const CellKey& key) const;

    QuadMesh refine(const std::vector<int>& marked) const;
    QuadMesh refine_uniform(int times = 1) const;

    // Exhaustive edge-neighbour inspection; true when every pair of
    // edge-adjacent leaves differs by at most one level.
    bool is_balanced() const;

    void write(std::ostream& os) const;
    static QuadMesh read(std::istream& is);
    void save(const std::string& path) const;
    static QuadMesh load(const std::string& path);

private:
    void build();
    bool on_boundary(double x, double y) const;
    bool in_neumann(double x, double y) const;

    Rect domain_{};
    int nx_ = 0, ny_ = 0;
    double h0_ = 0.0;
    std::vector<Segment> neumann_;

    std::vector<CellKey> cells_;
    std::map<CellKey, int> cell_index_;
    std::vector<std::array<int, 4>> cell_vertices_;
    std::vector<std::int64_t> vx_, vy_;
    std::vector<char> dirichlet_;
    std::vector<int> hanging_index_;
    std::vector<HangingVertex> hanging_;
};

// Vertices grouped by shared coordinate. y_lines[k] holds vertices with a
// common y, sorted by x, joined by cell edges; x_lines likewise with the
// roles swapped. A coordinate crossing a coarse cell yields several lines.
struct LineStructure {
    std::vector<double> y_keys;
    std::vector<std::vector<int>> y_lines;
    std::vector<double> x_keys;
    std::vector<std::vector<int>> x_lines;
};

LineStructure assemble_lines(const QuadMesh& mesh);

struct ConstraintEntry {
    int vertex;
    std::array<int, 2> masters;
    std::array<double, 2> weights;
};

std::vector<ConstraintEntry> hanging_constraints(const QuadMesh& mesh);

// Model problem geometry: [-1,1]x[-1,0] with a natural condition on
// [-1,0]x{0}; the change of boundary type at the origin is singular.
Rect problem_domain();
std::vector<Segment> problem_neumann();
QuadMesh problem_base_mesh(int cells_per_unit);

}  // namespace amlmc
