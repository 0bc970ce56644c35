#include "amlmc/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace amlmc {

namespace {

using nlohmann::json;

template <class T>
void take(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) throw std::invalid_argument("config: unknown key '" + where + key + "'");
}

}  // namespace

RunConfig RunConfig::defaults(int example, double sigma2) {
    RunConfig c;
    c.example = example;
    c.sigma2 = sigma2;
    if (example == 0) {
        c.base_cells = 4;
        c.hierarchy_levels = 9;
        c.adapt.tol0 = 1.0 / 32.0;
        c.level_tol0 = 1.0 / 32.0;
        c.tols = {1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
        return c;
    }
    c.base_cells = 2;
    c.hierarchy_levels = 8;
    c.adapt.tol0 = 2.0;
    if (sigma2 > 2.0) {
        c.level_tol0 = 4.0;
        c.relative = true;
        c.tols = {1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32};
    } else {
        c.level_tol0 = 2.0;
        c.tols = {0.4, 0.2, 0.1, 0.05};
    }
    return c;
}

void RunConfig::validate() const {
    if (example < 0 || example > 2) throw std::invalid_argument("config: example must be 0, 1 or 2");
    if (example != 0 && !(sigma2 > 0.0)) throw std::invalid_argument("config: sigma2 must be positive");
    if (tols.empty()) throw std::invalid_argument("config: TOL list is empty");
    for (double t : tols)
        if (!(t > 0.0)) throw std::invalid_argument("config: every TOL must be positive");
    if (realizations < 1) throw std::invalid_argument("config: realizations must be positive");
    if (base_cells < 1 || smlmc_base_cells < 1) throw std::invalid_argument("config: base mesh needs cells");
    if (hierarchy_levels < 1) throw std::invalid_argument("config: hierarchy needs at least one level");
    if (uniform_levels < 2) throw std::invalid_argument("config: uniform ladder needs at least two meshes");
    if (level_samples < 2 || report_levels < 2 || density_samples < 2 || scatter_samples < 0 ||
        density_mesh < 0 || scatter_offset < 1)
        throw std::invalid_argument("config: invalid report sizes");
    if (!(work.assembly >= 0.0 && work.solve >= 0.0 && work.estimate >= 0.0))
        throw std::invalid_argument("config: work-unit constants must be nonnegative");
    adapt.validate();
    estimator(tols.front(), seed).validate();
}

EstimatorConfig RunConfig::estimator(double tol, std::uint64_t s) const {
    EstimatorConfig e;
    e.tol = tol;
    e.theta = theta;
    e.C_xi = C_xi;
    e.tol0 = level_tol0;
    e.C = C;
    e.scheme = scheme;
    e.pilot = pilot;
    e.warmup = warmup;
    e.seed = s;
    e.relative = relative;
    e.scale_samples = scale_samples;
    e.max_levels = max_levels;
    e.work = work;
    return e;
}

nlohmann::json to_json(const RunConfig& c) {
    json j;
    j["example"] = c.example;
    j["sigma2"] = c.sigma2;
    j["scheme"] = to_string(c.scheme);
    j["tols"] = c.tols;
    j["seed"] = c.seed;
    j["realizations"] = c.realizations;
    j["out"] = c.out;
    j["field"] = {{"nu", c.matern.nu}, {"r", c.matern.r}, {"modes", c.matern.modes},
                  {"period", c.matern.period}, {"grid", c.matern.grid}};
    j["hierarchy"] = {{"base_cells", c.base_cells},
                      {"levels", c.hierarchy_levels},
                      {"tol0", c.adapt.tol0},
                      {"ratio", c.adapt.ratio},
                      {"C_R", c.adapt.C_R},
                      {"C_S", c.adapt.C_S},
                      {"c", c.adapt.c},
                      {"max_depth", c.adapt.max_depth},
                      {"upper_bound", c.adapt.density.upper_bound},
                      {"upper_exponent", c.adapt.density.upper_exponent}};
    j["estimator"] = {{"theta", c.theta},
                      {"C_xi", c.C_xi},
                      {"level_tol0", c.level_tol0},
                      {"C", c.C},
                      {"pilot", c.pilot},
                      {"warmup", c.warmup},
                      {"relative", c.relative},
                      {"scale_samples", c.scale_samples},
                      {"max_levels", c.max_levels},
                      {"smlmc_base_cells", c.smlmc_base_cells}};
    j["work_units"] = {{"assembly", c.work.assembly}, {"solve", c.work.solve}, {"estimate", c.work.estimate}};
    j["convergence"] = {{"uniform_levels", c.uniform_levels}};
    j["report"] = {{"level_samples", c.level_samples},     {"levels", c.report_levels},
                   {"density_samples", c.density_samples}, {"density_mesh", c.density_mesh},
                   {"scatter_samples", c.scatter_samples}, {"scatter_offset", c.scatter_offset}};
    j["sample_log"] = c.sample_log;
    j["reference"] = c.reference ? json(*c.reference) : json(nullptr);
    return j;
}

RunConfig overlay(RunConfig c, const nlohmann::json& j) {
    check_keys(j, "", {"example", "sigma2", "scheme", "tols", "seed", "realizations", "out", "field", "hierarchy",
                       "estimator", "work_units", "convergence", "report", "sample_log", "reference", "config_hash"});
    take(j, "example", c.example);
    take(j, "sigma2", c.sigma2);
    if (j.contains("scheme")) c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    take(j, "tols", c.tols);
    take(j, "seed", c.seed);
    take(j, "realizations", c.realizations);
    take(j, "out", c.out);
    if (j.contains("field")) {
        const auto& f = j.at("field");
        check_keys(f, "field.", {"nu", "r", "modes", "period", "grid"});
        take(f, "nu", c.matern.nu);
        take(f, "r", c.matern.r);
        take(f, "modes", c.matern.modes);
        take(f, "period", c.matern.period);
        take(f, "grid", c.matern.grid);
    }
    if (j.contains("hierarchy")) {
        const auto& h = j.at("hierarchy");
        check_keys(h, "hierarchy.", {"base_cells", "levels", "tol0", "ratio", "C_R", "C_S", "c", "max_depth",
                                     "upper_bound", "upper_exponent"});
        take(h, "base_cells", c.base_cells);
        take(h, "levels", c.hierarchy_levels);
        take(h, "tol0", c.adapt.tol0);
        take(h, "ratio", c.adapt.ratio);
        take(h, "C_R", c.adapt.C_R);
        take(h, "C_S", c.adapt.C_S);
        take(h, "c", c.adapt.c);
        take(h, "max_depth", c.adapt.max_depth);
        take(h, "upper_bound", c.adapt.density.upper_bound);
        take(h, "upper_exponent", c.adapt.density.upper_exponent);
    }
    if (j.contains("estimator")) {
        const auto& e = j.at("estimator");
        check_keys(e, "estimator.", {"theta", "C_xi", "level_tol0", "C", "pilot", "warmup", "relative",
                                     "scale_samples", "max_levels", "smlmc_base_cells"});
        take(e, "theta", c.theta);
        take(e, "C_xi", c.C_xi);
        take(e, "level_tol0", c.level_tol0);
        take(e, "C", c.C);
        take(e, "pilot", c.pilot);
        take(e, "warmup", c.warmup);
        take(e, "relative", c.relative);
        take(e, "scale_samples", c.scale_samples);
        take(e, "max_levels", c.max_levels);
        take(e, "smlmc_base_cells", c.smlmc_base_cells);
    }
    if (j.contains("work_units")) {
        const auto& w = j.at("work_units");
        check_keys(w, "work_units.", {"assembly", "solve", "estimate"});
        take(w, "assembly", c.work.assembly);
        take(w, "solve", c.work.solve);
        take(w, "estimate", c.work.estimate);
    }
    if (j.contains("convergence")) {
        const auto& v = j.at("convergence");
        check_keys(v, "convergence.", {"uniform_levels"});
        take(v, "uniform_levels", c.uniform_levels);
    }
    if (j.contains("report")) {
        const auto& r = j.at("report");
        check_keys(r, "report.", {"level_samples", "levels", "density_samples", "density_mesh", "scatter_samples",
                                  "scatter_offset"});
        take(r, "level_samples", c.level_samples);
        take(r, "levels", c.report_levels);
        take(r, "density_samples", c.density_samples);
        take(r, "density_mesh", c.density_mesh);
        take(r, "scatter_samples", c.scatter_samples);
        take(r, "scatter_offset", c.scatter_offset);
    }
    take(j, "sample_log", c.sample_log);
    if (j.contains("reference")) {
        const auto& r = j.at("reference");
        if (r.is_null())
            c.reference.reset();
        else
            c.reference = r.get<double>();
    }
    return c;
}

RunConfig from_json(const nlohmann::json& j) {
    const int example = j.value("example", 0);
    const double sigma2 = j.value("sigma2", 1.0);
    return overlay(RunConfig::defaults(example, sigma2), j);
}

std::string config_hash(const RunConfig& c) {
    auto j = to_json(c);
    j.erase("out");
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig load_config_file(const std::string& path, const RunConfig& base) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config file " + path + ": " + e.what());
    }
    return overlay(base, j);
}

void write_config(const std::string& path, const RunConfig& c) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    auto j = to_json(c);
    j["config_hash"] = config_hash(c);
    os << j.dump(2) << '\n';
}

}  // namespace amlmc
