#include "amlmc/adapt.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "amlmc/solver.hpp"

namespace amlmc {

double AdaptParams::tol(int k) const { return tol0 * std::pow(ratio, k); }

void AdaptParams::validate() const {
    if (!(c > 1.0)) throw std::invalid_argument("adapt: c must exceed 1");
    if (!(C_R > 0.0) || !(C_S > C_R / 16.0)) throw std::invalid_argument("adapt: need C_S > C_R / 2^(p+d)");
    if (!(tol0 > 0.0) || !(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("adapt: tolerances must be positive and strictly decreasing");
}

bool stopping_satisfied(const std::vector<double>& r, double tol, double script_n, double C_S) {
    if (!(script_n > 0.0)) throw std::invalid_argument("stopping: script N must be positive");
    const double bound = C_S * tol / script_n;
    for (double v : r)
        if (!(std::abs(v) < bound)) return false;
    return true;
}

std::vector<int> mark_cells(const std::vector<double>& r, double tol, double script_n, double C_R) {
    if (!(script_n > 0.0)) throw std::invalid_argument("marking: script N must be positive");
    const double bound = C_R * tol / script_n;
    std::vector<int> out;
    for (int c = 0; c < static_cast<int>(r.size()); ++c)
        if (std::abs(r[c]) >= bound) out.push_back(c);
    return out;
}

HierarchyLevel::HierarchyLevel(QuadMesh mesh, double tol_, double script_n_)
    : disc(std::move(mesh)), plan(disc.mesh()), tol(tol_), script_n(script_n_) {}

MeshHierarchy::MeshHierarchy(QuadMesh base, FieldSample field, AdaptParams params)
    : base_(std::move(base)), field_(std::move(field)), params_(params) {
    params_.validate();
    current_ = base_;
    script_n_ = base_.num_cells();
}

std::shared_ptr<MeshHierarchy> MeshHierarchy::uniform(const QuadMesh& base, int levels,
                                                      double tol_for_density) {
    auto h = std::make_shared<MeshHierarchy>(base, FieldSample::constant(1.0), AdaptParams{});
    h->uniform_ = true;
    h->uniform_tol_ = tol_for_density;
    h->params_.max_depth = std::max(levels, 12);
    QuadMesh m = base;
    for (int l = 0; l < levels; ++l) {
        if (l > 0) m = m.refine_uniform();
        h->levels_.push_back(std::make_unique<HierarchyLevel>(m, tol_for_density, m.num_cells()));
    }
    h->current_ = m;
    return h;
}

int MeshHierarchy::built() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return static_cast<int>(levels_.size());
}

const HierarchyLevel& MeshHierarchy::level(int k) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (k < 0) throw std::out_of_range("hierarchy: negative level");
    while (static_cast<int>(levels_.size()) <= k) {
        if (static_cast<int>(levels_.size()) >= params_.max_depth)
            throw std::runtime_error("hierarchy: maximum depth " + std::to_string(params_.max_depth) +
                                     " exhausted");
        extend();
    }
    return *levels_[k];
}

void MeshHierarchy::extend() {
    if (uniform_) {
        QuadMesh m = current_.refine_uniform();
        levels_.push_back(std::make_unique<HierarchyLevel>(m, uniform_tol_, m.num_cells()));
        current_ = std::move(m);
        return;
    }
    const int k = static_cast<int>(levels_.size());
    const double tol = params_.tol(k);
    double script_n = params_.c * script_n_;
    QuadMesh mesh = current_;
    for (;;) {
        auto lvl = std::make_unique<HierarchyLevel>(mesh, tol, script_n);
        const auto a = lvl->disc.evaluate_field(field_);
        const auto A = lvl->disc.assemble(a);
        const auto sol = solve_primal_dual(A, lvl->disc.primal_rhs(), A, lvl->disc.dual_rhs(), tol / 10.0);
        ++stats_.solves;
        stats_.work += sol.work;
        const auto dens = estimate_density(lvl->plan, lvl->disc, a, sol.u, sol.phi, tol, params_.density);
        if (stopping_satisfied(dens.indicators, tol, script_n, params_.C_S)) {
            lvl->script_n = script_n;
            levels_.push_back(std::move(lvl));
            break;
        }
        auto marks = mark_cells(dens.indicators, tol, script_n, params_.C_R);
        if (marks.empty()) {
            const auto it = std::max_element(dens.indicators.begin(), dens.indicators.end(),
                                             [](double x, double y) { return std::abs(x) < std::abs(y); });
            marks.push_back(static_cast<int>(it - dens.indicators.begin()));
        }
        mesh = mesh.refine(marks);
        script_n = std::max(script_n, static_cast<double>(mesh.num_cells()));
    }
    current_ = mesh;
    script_n_ = script_n;
}

void MeshHierarchy::save(const std::string& dir, const nlohmann::json& extra) const {
    std::lock_guard<std::mutex> lock(mutex_);
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json j;
    j["format"] = "amlmc-hierarchy-1";
    j["uniform"] = uniform_;
    j["params"] = {{"C_R", params_.C_R},   {"C_S", params_.C_S},           {"c", params_.c},
                   {"tol0", params_.tol0}, {"ratio", params_.ratio},       {"max_depth", params_.max_depth},
                   {"upper_bound", params_.density.upper_bound},
                   {"upper_exponent", params_.density.upper_exponent}};
    j["levels"] = nlohmann::json::array();
    for (std::size_t k = 0; k < levels_.size(); ++k) {
        std::ostringstream name;
        name << "level_" << std::setw(2) << std::setfill('0') << k << ".mesh";
        levels_[k]->mesh().save((fs::path(dir) / name.str()).string());
        j["levels"].push_back({{"file", name.str()},
                               {"tol", levels_[k]->tol},
                               {"script_n", levels_[k]->script_n},
                               {"cells", levels_[k]->mesh().num_cells()},
                               {"vertices", levels_[k]->mesh().num_vertices()}});
    }
    if (extra.is_object())
        for (const auto& [key, value] : extra.items()) j[key] = value;
    base_.save((fs::path(dir) / "base.mesh").string());
    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw std::runtime_error("cannot write hierarchy manifest in " + dir);
    os << j.dump(2) << '\n';
}

std::shared_ptr<MeshHierarchy> MeshHierarchy::load(const std::string& dir, FieldSample field) {
    namespace fs = std::filesystem;
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw std::runtime_error("cannot read hierarchy manifest in " + dir);
    nlohmann::json j;
    is >> j;
    AdaptParams p;
    const auto& jp = j.at("params");
    p.C_R = jp.at("C_R");
    p.C_S = jp.at("C_S");
    p.c = jp.at("c");
    p.tol0 = jp.at("tol0");
    p.ratio = jp.at("ratio");
    p.max_depth = jp.at("max_depth");
    p.density.upper_bound = jp.at("upper_bound");
    p.density.upper_exponent = jp.at("upper_exponent");
    auto h = std::make_shared<MeshHierarchy>(QuadMesh::load((fs::path(dir) / "base.mesh").string()),
                                             std::move(field), p);
    h->uniform_ = j.at("uniform");
    for (const auto& lv : j.at("levels")) {
        QuadMesh m = QuadMesh::load((fs::path(dir) / lv.at("file").get<std::string>()).string());
        h->current_ = m;
        h->script_n_ = lv.at("script_n");
        if (h->uniform_) h->uniform_tol_ = lv.at("tol");
        h->levels_.push_back(std::make_unique<HierarchyLevel>(std::move(m), lv.at("tol"), lv.at("script_n")));
    }
    return h;
}

std::shared_ptr<MeshHierarchy> generate_hierarchy(int levels, const QuadMesh& base,
                                                  const FieldSample& field,
                                                  const AdaptParams& params) {
    auto h = std::make_shared<MeshHierarchy>(base, field, params);
    if (levels > 0) h->level(levels - 1);
    return h;
}

}  // namespace amlmc
