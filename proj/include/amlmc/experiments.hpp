#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "amlmc/analysis.hpp"
#include "amlmc/config.hpp"
#include "amlmc/mlmc.hpp"

namespace amlmc {

FieldModel make_model(const RunConfig& cfg);
// Field description and, for the Matern field, every retained mode.
nlohmann::json field_manifest(const FieldModel& model);

// Adaptive hierarchy from the median field, or uniform levels for SMLMC.
std::shared_ptr<MeshHierarchy> adaptive_hierarchy(const RunConfig& cfg, const FieldModel& model);
std::shared_ptr<MeshHierarchy> uniform_hierarchy(const RunConfig& cfg, int base_cells, int levels);
std::shared_ptr<MeshHierarchy> scheme_hierarchy(const RunConfig& cfg, const FieldModel& model);

struct MeshSolve {
    int vertices = 0, dofs = 0, cells = 0;
    double h_s = 0.0;
    double q = 0.0;
    DensityField density;
};

// Reference primal and dual solves plus the error density on one mesh.
MeshSolve solve_on(const HierarchyLevel& lvl, const FieldSample& field, const DensityOptions& opt);

// Q + e_est on a deep adaptive mesh for a constant coefficient a.
double constant_field_reference(double a, int levels = 9);
// Configured reference, else the closed form for Examples 0 and 1.
std::optional<double> reference_value(const RunConfig& cfg);

struct ConvergenceRow {
    std::string kind;  // adaptive | uniform
    int index = 0;
    int vertices = 0, dofs = 0, cells = 0;
    double h_s = 0.0, tol = 0.0;
    double q = 0.0, e_est = 0.0, e_est_abs = 0.0;
    double l1 = 0.0, lhalf = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    // log-log least-squares slopes over every row of the given kind
    double slope_adaptive = 0.0;  // |e_est| vs vertices
    double slope_uniform = 0.0;
    double slope_l1 = 0.0;     // L1 vs h_s, adaptive rows
    double slope_lhalf = 0.0;  // L^{1/2} vs h_s, adaptive rows
};

// Deterministic solves with the median field on the adaptive hierarchy and
// on uniform_levels uniform refinements of the same base mesh.
ConvergenceTable convergence_table(const RunConfig& cfg);
void write_convergence_csv(const std::string& path, const ConvergenceTable& t, const std::string& hash);

struct LevelRates {
    Scheme scheme = Scheme::amlmc;
    std::vector<double> tol;  // level tolerance or smallest cell size
    std::vector<LevelStats> stats;
    std::vector<std::vector<SampleRecord>> samples;
    double R = 0.0;
    // exp(-slope) of log|E_l| and log V_l over levels 1..L
    double E_factor = 0.0, V_factor = 0.0;
};

// Fixed number of samples on each of levels 0..levels-1.
LevelRates level_rates(const RunConfig& cfg, const FieldModel& model, MeshHierarchy& h, int levels,
                       int samples);
void write_level_rates_csv(const std::string& path, const LevelRates& r, const std::string& hash);

struct SweepEntry {
    double tol = 0.0;
    int realization = 0;
    std::uint64_t seed = 0;
    MLMCResult result;
    double error = 0.0;  // estimate - reference, NaN without a reference
};

struct SweepSummary {
    double tol = 0.0;
    int realizations = 0;
    double mean_tol_abs = 0.0;
    double mean_work = 0.0;
    double mean_root_work = 0.0;  // mean of sqrt(W tol_abs^2)
    double fail_fraction = 0.0;   // |error| > tol_abs; NaN without a reference
    double mean_abs_error = 0.0;
    double mean_levels = 0.0;
};

using Progress = std::function<void(const std::string&)>;

// Realization r of TOL index t uses seed cfg.seed + 1000 t + r.
std::vector<SweepEntry> run_sweep(const RunConfig& cfg, const FieldModel& model, MeshHierarchy& h,
                                  std::optional<double> reference, const Progress& progress = {});
std::vector<SweepSummary> summarize(const std::vector<SweepEntry>& entries);
// Slope of mean sqrt(W TOL^2) against log(1/TOL).
double root_work_slope(const std::vector<SweepSummary>& s);

void write_sweep_csv(const std::string& path, const std::vector<SweepEntry>& e, const std::string& hash);
void write_work_tol_csv(const std::string& path, const std::vector<SweepSummary>& s, const std::string& hash);
void write_sweep_levels_csv(const std::string& path, const std::vector<SweepEntry>& e, const std::string& hash);

// Error densities of n independent samples on hierarchy level k.
DensitySamples sample_densities(const RunConfig& cfg, const FieldModel& model, MeshHierarchy& h, int k, int n,
                                std::vector<double>* lhalf_integral = nullptr, std::vector<double>* l1 = nullptr);

struct VarianceRow {
    int level = 0;
    double tol = 0.0, V = 0.0, V_ci = 0.0, predicted = 0.0, ratio = 0.0;
};

struct ModelReport {
    DensityStats stats;
    std::vector<std::pair<double, WorkModels>> work;  // per bias tolerance
    bool jensen = false;
    ComplexityConstants K;
    std::vector<VarianceRow> variance;
};

ModelReport model_report(const RunConfig& cfg, const DensitySamples& dens, const DensityStats& stats,
                         const LevelRates& rates);
nlohmann::json to_json(const ModelReport& r);
void write_variance_csv(const std::string& path, const ModelReport& r, const std::string& hash);

struct ScatterRow {
    std::uint64_t key = 0;
    int level = 0, k_fine = 0, k_ref = 0;
    double q = 0.0, e_est = 0.0, q_ref = 0.0;
};

// Per-sample error Q_ref - Q against e_est for the first samples of each level;
// Q_ref is Q + e_est on hierarchy level k_fine + cfg.scatter_offset.
std::vector<ScatterRow> error_scatter(const RunConfig& cfg, const FieldModel& model, MeshHierarchy& h,
                                      const LevelRates& rates);
void write_scatter_csv(const std::string& path, const std::vector<ScatterRow>& rows, const std::string& hash);

}  // namespace amlmc
