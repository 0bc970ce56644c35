#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "amlmc/config.hpp"
#include "amlmc/experiments.hpp"

namespace fs = std::filesystem;
using namespace amlmc;

namespace {

constexpr const char* kOutputRootEnv = "AMLMC_OUTPUT_ROOT";

struct Flags {
    std::optional<int> example;
    std::optional<double> sigma2;
    std::optional<std::string> scheme;
    std::vector<double> tols;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> config;
    std::optional<int> realizations;
    std::optional<int> levels;
    std::optional<double> reference;
    std::optional<bool> relative;
    std::optional<int> samples;
    std::optional<std::string> hierarchy_dir;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--example", f.example, "Example id")->check(CLI::IsMember({0, 1, 2}));
    app->add_option("--sigma2", f.sigma2, "Variance of the log coefficient");
    app->add_option("--scheme", f.scheme, "smlmc or amlmc")->check(CLI::IsMember({"smlmc", "amlmc"}));
    app->add_option("--tol", f.tols, "TOL list")->delimiter(',');
    app->add_option("--seed", f.seed, "Base seed");
    app->add_option("--out", f.out, "Output directory");
    app->add_option("--config", f.config, "JSON config; its entries win over flags")->check(CLI::ExistingFile);
    app->add_option("--realizations", f.realizations, "Estimator runs per TOL");
    app->add_option("--levels", f.levels, "Hierarchy meshes to build");
    app->add_option("--reference", f.reference, "Reference value for error columns");
    app->add_option("--relative", f.relative, "TOL relative to |E[Q]| (true/false)");
    app->add_option("--samples", f.samples, "Samples per level for the report");
}

nlohmann::json flags_json(const Flags& f) {
    nlohmann::json j = nlohmann::json::object();
    if (f.example) j["example"] = *f.example;
    if (f.sigma2) j["sigma2"] = *f.sigma2;
    if (f.scheme) j["scheme"] = *f.scheme;
    if (!f.tols.empty()) j["tols"] = f.tols;
    if (f.seed) j["seed"] = *f.seed;
    if (f.out) j["out"] = *f.out;
    if (f.realizations) j["realizations"] = *f.realizations;
    if (f.levels) j["hierarchy"]["levels"] = *f.levels;
    if (f.reference) j["reference"] = *f.reference;
    if (f.relative) j["estimator"]["relative"] = *f.relative;
    if (f.samples) j["report"]["level_samples"] = *f.samples;
    return j;
}

// defaults < flags < config file
RunConfig resolve(const Flags& f, const std::string& command) {
    nlohmann::json file = nlohmann::json::object();
    if (f.config) {
        std::ifstream is(*f.config);
        if (!is) throw std::runtime_error("cannot open config file " + *f.config);
        try {
            is >> file;
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("config file " + *f.config + ": " + e.what());
        }
    }
    int example = f.example.value_or(0);
    double sigma2 = f.sigma2.value_or(1.0);
    if (file.contains("example")) example = file.at("example").get<int>();
    if (file.contains("sigma2")) sigma2 = file.at("sigma2").get<double>();
    RunConfig cfg = overlay(RunConfig::defaults(example, sigma2), flags_json(f));
    cfg = overlay(cfg, file);
    if (cfg.out.empty()) {
        const char* root = std::getenv(kOutputRootEnv);
        cfg.out = (fs::path(root && *root ? root : "amlmc-out") / (command + "-ex" + std::to_string(cfg.example)))
                      .string();
    }
    cfg.validate();
    return cfg;
}

std::string prepare(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec || !fs::is_directory(cfg.out)) throw std::runtime_error("cannot create output directory " + cfg.out);
    write_config((fs::path(cfg.out) / "config.json").string(), cfg);
    return config_hash(cfg);
}

std::string path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out) / name).string(); }

void write_json(const std::string& p, nlohmann::json j, const std::string& hash) {
    j["config_hash"] = hash;
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p);
    os << j.dump(2) << '\n';
}

int cmd_hierarchy(const RunConfig& cfg) {
    const auto hash = prepare(cfg);
    const auto model = make_model(cfg);
    auto h = cfg.scheme == Scheme::amlmc ? adaptive_hierarchy(cfg, model)
                                         : uniform_hierarchy(cfg, cfg.smlmc_base_cells, cfg.hierarchy_levels);
    const auto dir = path(cfg, "hierarchy");
    h->save(dir, {{"config_hash", hash}, {"field", field_manifest(model)}});
    for (int k = 0; k < h->built(); ++k) {
        const auto& m = h->level(k).mesh();
        std::cout << "H_" << k << "  TOL " << std::setw(10) << h->level(k).tol << "  cells " << std::setw(7)
                  << m.num_cells() << "  vertices " << std::setw(7) << m.num_vertices() << "  h_s "
                  << m.smallest_cell_size() << '\n';
    }
    std::cout << "wrote " << dir << '\n';
    return 0;
}

int cmd_convergence(const RunConfig& cfg) {
    const auto hash = prepare(cfg);
    const auto t = convergence_table(cfg);
    write_convergence_csv(path(cfg, "convergence.csv"), t, hash);
    write_json(path(cfg, "convergence.json"),
               {{"slope_adaptive", t.slope_adaptive},
                {"slope_uniform", t.slope_uniform},
                {"slope_ratio", t.slope_adaptive / t.slope_uniform},
                {"slope_l1_vs_hs", t.slope_l1},
                {"slope_lhalf_vs_hs", t.slope_lhalf}},
               hash);
    std::cout << "adaptive slope " << t.slope_adaptive << ", uniform slope " << t.slope_uniform << ", L1 slope "
              << t.slope_l1 << ", L1/2 slope " << t.slope_lhalf << '\n';
    return 0;
}

std::shared_ptr<MeshHierarchy> obtain_hierarchy(const RunConfig& cfg, const FieldModel& model,
                                                const std::optional<std::string>& dir) {
    if (!dir) return scheme_hierarchy(cfg, model);
    auto h = MeshHierarchy::load(*dir, model.median());
    if (h->is_uniform() != (cfg.scheme == Scheme::smlmc))
        throw std::runtime_error("hierarchy in " + *dir + " does not match scheme " + to_string(cfg.scheme));
    return h;
}

int cmd_run(const RunConfig& cfg, const std::optional<std::string>& hierarchy_dir) {
    const auto hash = prepare(cfg);
    const auto model = make_model(cfg);
    auto h = obtain_hierarchy(cfg, model, hierarchy_dir);
    const auto reference = reference_value(cfg);
    const auto entries = run_sweep(cfg, model, *h, reference, [](const std::string& m) { std::cout << m << '\n'; });
    const auto summary = summarize(entries);
    write_sweep_csv(path(cfg, "sweep.csv"), entries, hash);
    write_work_tol_csv(path(cfg, "work_tol.csv"), summary, hash);
    write_sweep_levels_csv(path(cfg, "levels.csv"), entries, hash);
    if (cfg.sample_log)
        for (std::size_t t = 0; t < cfg.tols.size(); ++t)
            for (const auto& e : entries)
                if (e.tol == cfg.tols[t] && e.realization == 0)
                    write_samples_csv(path(cfg, "samples_tol" + std::to_string(t) + ".csv"), e.result,
                                      "config_hash " + hash);
    nlohmann::json j;
    j["reference"] = reference ? nlohmann::json(*reference) : nlohmann::json(nullptr);
    j["root_work_slope"] = summary.size() >= 2 ? nlohmann::json(root_work_slope(summary)) : nlohmann::json(nullptr);
    write_json(path(cfg, "run.json"), j, hash);
    for (const auto& s : summary)
        std::cout << "TOL " << s.tol << ": sqrt(W TOL^2) " << s.mean_root_work << ", failure fraction "
                  << s.fail_fraction << '\n';
    return 0;
}

int cmd_report(const RunConfig& cfg, const std::optional<std::string>& hierarchy_dir) {
    const auto hash = prepare(cfg);
    const auto model = make_model(cfg);
    auto h = obtain_hierarchy(cfg, model, hierarchy_dir);
    const auto rates = level_rates(cfg, model, *h, cfg.report_levels, cfg.level_samples);
    write_level_rates_csv(path(cfg, "level_rates.csv"), rates, hash);

    // Densities live on the adaptive hierarchy whichever scheme is reported.
    auto ah = cfg.scheme == Scheme::amlmc ? h : adaptive_hierarchy(cfg, model);
    std::vector<double> lhalf, l1;
    const auto dens = sample_densities(cfg, model, *ah, cfg.density_mesh, cfg.density_samples, &lhalf, &l1);
    const auto control = cfg.scheme == Scheme::amlmc ? ControlCase::fully_adaptive : ControlCase::uniform_selection;
    const auto stats = density_stats(lhalf, l1, dens.domain_area(), control);
    const auto report = model_report(cfg, dens, stats, rates);
    auto j = to_json(report);
    j["level_decay"] = {{"E_factor", rates.E_factor}, {"V_factor", rates.V_factor}};
    write_json(path(cfg, "model_report.json"), j, hash);
    write_variance_csv(path(cfg, "variance.csv"), report, hash);
    if (cfg.scheme == Scheme::amlmc)
        write_scatter_csv(path(cfg, "scatter.csv"), error_scatter(cfg, model, *h, rates), hash);
    std::cout << "E decay factor " << rates.E_factor << ", V decay factor " << rates.V_factor << ", K " << report.K.K
              << " (" << to_string(report.K.regime) << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive and uniform multilevel Monte Carlo experiments"};
    app.require_subcommand(1);
    Flags f;
    auto* hier = app.add_subcommand("hierarchy", "Build and persist the auxiliary mesh hierarchy");
    auto* run = app.add_subcommand("run", "Run the estimator for every TOL");
    auto* conv = app.add_subcommand("convergence", "Deterministic error estimate convergence table");
    auto* rep = app.add_subcommand("report", "Level rates, work models and complexity constants");
    for (auto* s : {hier, run, conv, rep}) add_common(s, f);
    for (auto* s : {run, rep}) s->add_option("--hierarchy", f.hierarchy_dir, "Saved hierarchy directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (*hier) return cmd_hierarchy(resolve(f, "hierarchy"));
        if (*conv) return cmd_convergence(resolve(f, "convergence"));
        if (*run) return cmd_run(resolve(f, "run"), f.hierarchy_dir);
        return cmd_report(resolve(f, "report"), f.hierarchy_dir);
    } catch (const std::exception& e) {
        std::cerr << "amlmc: error: " << e.what() << '\n';
        return 1;
    }
}
