#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "amlmc/adapt.hpp"
#include "amlmc/mlmc.hpp"
#include "amlmc/random_field.hpp"

namespace amlmc {

struct RunConfig {
    int example = 0;
    double sigma2 = 1.0;
    Scheme scheme = Scheme::amlmc;
    std::vector<double> tols;
    std::uint64_t seed = 1;
    int realizations = 1;
    std::string out;

    MaternParams matern;

    // Auxiliary hierarchy: base mesh with base_cells cells per unit length.
    int base_cells = 2;
    int hierarchy_levels = 8;
    AdaptParams adapt;

    double theta = 0.5;
    double C_xi = 1.96;
    double level_tol0 = 2.0;
    double C = 0.25;
    int pilot = 20;
    int warmup = 20;
    bool relative = false;
    int scale_samples = 10000;
    int max_levels = 12;
    int smlmc_base_cells = 4;
    WorkUnits work;

    int uniform_levels = 6;

    int level_samples = 200;
    int report_levels = 5;
    int density_samples = 100;
    int density_mesh = 3;
    int scatter_samples = 50;
    int scatter_offset = 3;

    bool sample_log = true;
    std::optional<double> reference;

    // Per-example defaults; sigma2 picks the level tolerances and TOL list.
    static RunConfig defaults(int example, double sigma2);
    void validate() const;
    EstimatorConfig estimator(double tol, std::uint64_t seed) const;
};

nlohmann::json to_json(const RunConfig& c);
// Applies the keys present in j on top of base; unknown keys are errors.
RunConfig overlay(RunConfig base, const nlohmann::json& j);
RunConfig from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON, output directory excluded.
std::string config_hash(const RunConfig& c);

RunConfig load_config_file(const std::string& path, const RunConfig& base);
void write_config(const std::string& path, const RunConfig& c);

}  // namespace amlmc
