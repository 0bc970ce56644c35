#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "amlmc/error_density.hpp"
#include "amlmc/fem.hpp"
#include "amlmc/random_field.hpp"

namespace amlmc {

struct AdaptParams {
    double C_R = 2.5;
    double C_S = 3.0;
    double c = 2.0;
    // TOL_k = tol0 * ratio^k
    double tol0 = 1.0 / 32.0;
    double ratio = 0.5;
    int max_depth = 24;
    DensityOptions density;

    double tol(int k) const;
    void validate() const;
};

bool stopping_satisfied(const std::vector<double>& r, double tol, double script_n, double C_S);
std::vector<int> mark_cells(const std::vector<double>& r, double tol, double script_n, double C_R);

// One mesh of an auxiliary hierarchy with everything a sampler needs.
struct HierarchyLevel {
    HierarchyLevel(QuadMesh mesh, double tol, double script_n);
    HierarchyLevel(const HierarchyLevel&) = delete;
    HierarchyLevel& operator=(const HierarchyLevel&) = delete;

    Discretization disc;
    DensityPlan plan;
    double tol;
    double script_n;

    const QuadMesh& mesh() const { return disc.mesh(); }
};

struct AdaptStats {
    int solves = 0;
    double work = 0.0;
};

// Ordered adaptive meshes H_0, H_1, ... generated from a deterministic
// coefficient. Levels beyond those already built are generated on demand.
class MeshHierarchy {
public:
    MeshHierarchy(QuadMesh base, FieldSample field, AdaptParams params);
    // Uniform refinements base, base/2, ...; no adaptivity.
    static std::shared_ptr<MeshHierarchy> uniform(const QuadMesh& base, int levels,
                                                  double tol_for_density);

    const HierarchyLevel& level(int k);
    int built() const;
    const AdaptParams& params() const { return params_; }
    const QuadMesh& base() const { return base_; }
    const FieldSample& field() const { return field_; }
    bool is_uniform() const { return uniform_; }
    const AdaptStats& stats() const { return stats_; }

    // `extra` entries (field description, config hash, ...) go into the manifest.
    void save(const std::string& dir, const nlohmann::json& extra = {}) const;
    static std::shared_ptr<MeshHierarchy> load(const std::string& dir, FieldSample field);

private:
    void extend();

    QuadMesh base_;
    FieldSample field_;
    AdaptParams params_;
    bool uniform_ = false;
    double uniform_tol_ = 0.0;
    std::deque<std::unique_ptr<HierarchyLevel>> levels_;
    QuadMesh current_;
    double script_n_ = 0.0;
    AdaptStats stats_;
    mutable std::mutex mutex_;
};

std::shared_ptr<MeshHierarchy> generate_hierarchy(int levels, const QuadMesh& base,
                                                  const FieldSample& field,
                                                  const AdaptParams& params);

}  // namespace amlmc
