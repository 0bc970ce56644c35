#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "amlmc/adapt.hpp"
#include "amlmc/random_field.hpp"

namespace amlmc {

enum class Scheme { smlmc, amlmc };

// Work units: assembly = points x cost per point, solve = iterations x nnz,
// estimation = N log2(N)^2 with N cells. Each term is scaled by its constant.
struct WorkUnits {
    double assembly = 1.0;
    double solve = 1.0;
    double estimate = 1.0;
};

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

struct EstimatorConfig {
    double tol = 0.1;
    double theta = 0.5;
    double C_xi = 1.96;
    // AMLMC level tolerances TOL_l = tol0 * C^l
    double tol0 = 2.0;
    double C = 0.25;
    Scheme scheme = Scheme::amlmc;
    int pilot = 20;
    bool allow_single_pilot = false;
    int warmup = 20;
    std::uint64_t seed = 1;
    // Interpret tol relative to |E[Q]|; the scale comes from level-0 draws.
    bool relative = false;
    int scale_samples = 10000;
    int max_levels = 12;
    WorkUnits work;

    void validate() const;
    double level_tol(int l) const;
};

struct SampleRecord {
    std::uint64_t key = 0;
    int level = 0;
    int k_coarse = -1;
    int k_fine = 0;
    double q_fine = 0.0;
    double q_coarse = 0.0;
    double e_est_fine = 0.0;
    double work = 0.0;

    double dq() const { return q_fine - q_coarse; }
};

struct LevelStats {
    int count = 0;
    double mean = 0.0;
    double variance = 0.0;
    double work = 0.0;
    double mean_ci = 0.0;  // 95% half widths
    double variance_ci = 0.0;
};

LevelStats level_stats(std::span<const double> values, std::span<const double> work);

struct LevelRecord {
    int level = 0;
    double tol = 0.0;  // AMLMC level tolerance, SMLMC mesh size
    std::vector<SampleRecord> samples;
    LevelStats stats;
    int M = 0;

    void refresh();
};

struct MLMCResult {
    Scheme scheme = Scheme::amlmc;
    double estimate = 0.0;
    std::vector<LevelRecord> levels;
    double total_work = 0.0;     // sampling work over all levels
    double overhead_work = 0.0;  // pilot and scale draws
    double stat_error = 0.0;     // C_xi * sqrt(sum V/M)
    double bias_bound = 0.0;
    double tol_abs = 0.0;
    double tol_scale = 1.0;
    double R = 0.0;
};

// Real-valued optimum and its rounded version (ceil, at least 1).
std::vector<double> optimal_counts_real(std::span<const double> V, std::span<const double> W,
                                        double theta, double C_xi, double tol);
std::vector<int> optimal_counts(std::span<const double> V, std::span<const double> W,
                                double theta, double C_xi, double tol);

struct PilotResult {
    double R = 0.0;
    double mean_q = 0.0;
    double work = 0.0;
};

// Mean scaling numerator on the coarsest hierarchy mesh.
PilotResult pilot_R(MeshHierarchy& hierarchy, const FieldModel& model, int n_pilot,
                    std::uint64_t seed, bool allow_single = false, const WorkUnits& units = {});

SampleRecord amlmc_sample(int level, const EstimatorConfig& cfg, MeshHierarchy& hierarchy,
                          const FieldModel& model, double R, std::uint64_t key);
SampleRecord smlmc_sample(int level, MeshHierarchy& uniform, const FieldModel& model,
                          std::uint64_t key, const WorkUnits& units = {});

// Draws sample `index` of `level` for the configured scheme.
SampleRecord draw_sample(int level, std::uint64_t index, const EstimatorConfig& cfg,
                         MeshHierarchy& hierarchy, const FieldModel& model, double R);

MLMCResult run_estimator(const EstimatorConfig& cfg, MeshHierarchy& hierarchy, const FieldModel& model);

// SMLMC bias proxy from the two finest level means.
double extrapolated_bias(double E_coarse, double E_fine);

void write_levels_csv(const std::string& path, const MLMCResult& r, const std::string& header = {});
void write_samples_csv(const std::string& path, const MLMCResult& r, const std::string& header = {});

}  // namespace amlmc
