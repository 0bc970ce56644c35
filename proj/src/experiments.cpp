#include "amlmc/experiments.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "amlmc/solver.hpp"

namespace amlmc {

namespace {

constexpr std::uint64_t kDensityStream = 5;

std::ofstream open_csv(const std::string& path, const std::string& hash) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "# config_hash " << hash << '\n' << std::setprecision(12);
    return os;
}

// exp(-slope) of log y against the index, skipping entry 0.
double decay_factor(const std::vector<double>& y) {
    std::vector<double> l, v;
    for (std::size_t i = 1; i < y.size(); ++i) {
        l.push_back(static_cast<double>(i));
        v.push_back(std::abs(y[i]));
    }
    if (l.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> lv(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        lv[i] = std::log(v[i]);
    }
    return std::exp(-linear_slope(l, lv));
}

}  // namespace

FieldModel make_model(const RunConfig& cfg) {
    MaternParams m = cfg.matern;
    m.sigma2 = cfg.sigma2;
    return FieldModel(cfg.example, cfg.sigma2, m);
}

nlohmann::json field_manifest(const FieldModel& model) {
    nlohmann::json j;
    j["description"] = model.describe();
    j["example"] = model.example();
    j["sigma2"] = model.sigma2();
    if (const auto b = model.basis()) {
        const auto& p = b->params();
        j["matern"] = {{"nu", p.nu}, {"r", p.r}, {"modes", p.modes}, {"period", p.period}, {"grid", p.grid}};
        j["center"] = {b->center_x(), b->center_y()};
        j["truncated_variance"] = b->truncated_variance();
        auto modes = nlohmann::json::array();
        for (const auto& md : b->modes()) modes.push_back({md.kx, md.ky, md.sine ? 1 : 0, md.lambda});
        j["modes"] = std::move(modes);
    }
    return j;
}

std::shared_ptr<MeshHierarchy> adaptive_hierarchy(const RunConfig& cfg, const FieldModel& model) {
    return generate_hierarchy(cfg.hierarchy_levels, problem_base_mesh(cfg.base_cells), model.median(), cfg.adapt);
}

std::shared_ptr<MeshHierarchy> uniform_hierarchy(const RunConfig& cfg, int base_cells, int levels) {
    auto h = MeshHierarchy::uniform(problem_base_mesh(base_cells), levels, cfg.adapt.tol0);
    h->level(levels - 1);
    return h;
}

std::shared_ptr<MeshHierarchy> scheme_hierarchy(const RunConfig& cfg, const FieldModel& model) {
    if (cfg.scheme == Scheme::smlmc) return uniform_hierarchy(cfg, cfg.smlmc_base_cells, 1);
    return adaptive_hierarchy(cfg, model);
}

MeshSolve solve_on(const HierarchyLevel& lvl, const FieldSample& field, const DensityOptions& opt) {
    const auto& disc = lvl.disc;
    const auto a = disc.evaluate_field(field);
    const auto A = disc.assemble(a);
    const auto u = solve_reference(A, disc.primal_rhs());
    const auto phi = solve_reference(A, disc.dual_rhs());
    MeshSolve s;
    s.vertices = lvl.mesh().num_vertices();
    s.dofs = disc.num_dofs();
    s.cells = lvl.mesh().num_cells();
    s.h_s = lvl.mesh().smallest_cell_size();
    s.q = disc.qoi(u.x);
    s.density = estimate_density(lvl.plan, disc, a, u.x, phi.x, lvl.tol, opt);
    return s;
}

double constant_field_reference(double a, int levels) {
    if (!(a > 0.0)) throw std::invalid_argument("constant_field_reference: a must be positive");
    // Q and e_est scale like 1/a on a fixed mesh, so one hierarchy serves every a.
    const double a0 = std::exp(2.0);
    const auto d = RunConfig::defaults(0, 0.0);
    auto h = generate_hierarchy(levels, problem_base_mesh(d.base_cells), FieldSample::constant(a0), d.adapt);
    const auto s = solve_on(h->level(levels - 1), FieldSample::constant(a0), d.adapt.density);
    return (s.q + s.density.e_est) * a0 / a;
}

std::optional<double> reference_value(const RunConfig& cfg) {
    if (cfg.reference) return cfg.reference;
    if (cfg.example == 0) return constant_field_reference(std::exp(2.0));
    // E[1/a] = exp(sigma2 / 2) for a = exp(sigma Z)
    if (cfg.example == 1) return constant_field_reference(1.0) * std::exp(cfg.sigma2 / 2.0);
    return std::nullopt;
}

ConvergenceTable convergence_table(const RunConfig& cfg) {
    const auto model = make_model(cfg);
    const auto field = model.median();
    ConvergenceTable t;
    auto push = [&](const std::string& kind, int index, const HierarchyLevel& lvl) {
        const auto s = solve_on(lvl, field, cfg.adapt.density);
        ConvergenceRow r;
        r.kind = kind;
        r.index = index;
        r.vertices = s.vertices;
        r.dofs = s.dofs;
        r.cells = s.cells;
        r.h_s = s.h_s;
        r.tol = lvl.tol;
        r.q = s.q;
        r.e_est = s.density.e_est;
        r.e_est_abs = s.density.e_est_abs;
        r.l1 = s.density.l1;
        r.lhalf = s.density.lhalf;
        t.rows.push_back(r);
    };
    auto h = adaptive_hierarchy(cfg, model);
    for (int k = 0; k < cfg.hierarchy_levels; ++k) push("adaptive", k, h->level(k));
    auto u = uniform_hierarchy(cfg, cfg.base_cells, cfg.uniform_levels);
    for (int k = 0; k < cfg.uniform_levels; ++k) push("uniform", k, u->level(k));

    std::vector<double> av, ae, uv, ue, hs, l1, lh;
    for (const auto& r : t.rows) {
        if (r.kind == "adaptive") {
            av.push_back(r.vertices);
            ae.push_back(std::abs(r.e_est));
            hs.push_back(r.h_s);
            l1.push_back(r.l1);
            lh.push_back(r.lhalf);
        } else {
            uv.push_back(r.vertices);
            ue.push_back(std::abs(r.e_est));
        }
    }
    t.slope_adaptive = loglog_slope(av, ae);
    t.slope_uniform = loglog_slope(uv, ue);
    if (hs.size() >= 2) {
        t.slope_l1 = loglog_slope(hs, l1);
        t.slope_lhalf = loglog_slope(hs, lh);
    }
    return t;
}

void write_convergence_csv(const std::string& path, const ConvergenceTable& t, const std::string& hash) {
    auto os = open_csv(path, hash);
    os << "mesh,index,vertices,dofs,cells,h_s,tol,q,e_est,e_est_abs,l1,lhalf\n";
    for (const auto& r : t.rows)
        os << r.kind << ',' << r.index << ',' << r.vertices << ',' << r.dofs << ',' << r.cells << ',' << r.h_s
           << ',' << r.tol << ',' << r.q << ',' << r.e_est << ',' << r.e_est_abs << ',' << r.l1 << ',' << r.lhalf
           << '\n';
}

LevelRates level_rates(const RunConfig& cfg, const FieldModel& model, MeshHierarchy& h, int levels,
                       int samples) {
    if (levels < 1 || samples < 2) throw std::invalid_argument("level_rates: need levels >= 1 and samples >= 2");
    const auto ecfg = cfg.estimator(cfg.tols.front(), cfg.seed);
    LevelRates r;
    r.scheme = cfg.scheme;
    if (cfg.scheme == Scheme::amlmc) r.R = pilot_R(h, model, cfg.pilot, cfg.seed, false, cfg.work).R;
    std::vector<double> E, V;
    for (int l = 0; l < levels; ++l) {
        std::vector<SampleRecord> rec;
        std::vector<double> dq, w;
        for (int i = 0; i < samples; ++i) {
            rec.push_back(draw_sample(l, static_cast<std::uint64_t>(i), ecfg, h, model, r.R));
            dq.push_back(rec.back().dq());
            w.push_back(rec.back().work);
        }
        r.tol.push_back(cfg.scheme == Scheme::amlmc ? ecfg.level_tol(l) : h.level(l).mesh().smallest_cell_size());
        r.stats.push_back(level_stats(dq, w));
        r.samples.push_back(std::move(rec));
        E.push_back(r.stats.back().mean);
        V.push_back(r.stats.back().variance);
    }
    r.E_factor = decay_factor(E);
    r.V_factor = decay_factor(V);
    return r;
}

void write_level_rates_csv(const std::string& path, const LevelRates& r, const std::string& hash) {
    auto os = open_csv(path, hash);
    os << "scheme,level,tol,E,E_ci,V,V_ci,W,M\n";
    for (std::size_t l = 0; l < r.stats.size(); ++l) {
        const auto& s = r.stats[l];
        os << to_string(r.scheme) << ',' << l << ',' << r.tol[l] << ',' << s.mean << ',' << s.mean_ci << ','
           << s.variance << ',' << s.variance_ci << ',' << s.work << ',' << s.count << '\n';
    }
}

std::vector<SweepEntry> run_sweep(const RunConfig& cfg, const FieldModel& model, MeshHierarchy& h,
                                  std::optional<double> reference, const Progress& progress) {
    std::vector<SweepEntry> out;
    for (std::size_t t = 0; t < cfg.tols.size(); ++t)
        for (int r = 0; r < cfg.realizations; ++r) {
            SweepEntry e;
            e.tol = cfg.tols[t];
            e.realization = r;
            e.seed = cfg.seed + 1000 * t + static_cast<std::uint64_t>(r);
            e.result = run_estimator(cfg.estimator(e.tol, e.seed), h, model);
            e.error = reference ? e.result.estimate - *reference : std::numeric_limits<double>::quiet_NaN();
            if (progress) {
                std::ostringstream msg;
                msg << "TOL " << e.tol << " realization " << r << ": estimate " << std::setprecision(8)
                    << e.result.estimate << ", " << e.result.levels.size() << " levels";
                progress(msg.str());
            }
            out.push_back(std::move(e));
        }
    return out;
}

std::vector<SweepSummary> summarize(const std::vector<SweepEntry>& entries) {
    std::vector<SweepSummary> out;
    for (const auto& e : entries) {
        if (out.empty() || out.back().tol != e.tol) {
            out.emplace_back();
            out.back().tol = e.tol;
        }
        auto& s = out.back();
        const double n = ++s.realizations;
        const double tol_abs = e.result.tol_abs;
        s.mean_tol_abs += (tol_abs - s.mean_tol_abs) / n;
        s.mean_work += (e.result.total_work - s.mean_work) / n;
        s.mean_root_work += (std::sqrt(e.result.total_work * tol_abs * tol_abs) - s.mean_root_work) / n;
        s.mean_levels += (static_cast<double>(e.result.levels.size()) - s.mean_levels) / n;
        const bool fail = std::abs(e.error) > tol_abs;
        s.fail_fraction += ((std::isnan(e.error) ? e.error : (fail ? 1.0 : 0.0)) - s.fail_fraction) / n;
        s.mean_abs_error += (std::abs(e.error) - s.mean_abs_error) / n;
    }
    return out;
}

double root_work_slope(const std::vector<SweepSummary>& s) {
    std::vector<double> x, y;
    for (const auto& e : s) {
        x.push_back(std::log(1.0 / e.tol));
        y.push_back(e.mean_root_work);
    }
    return linear_slope(x, y);
}

void write_sweep_csv(const std::string& path, const std::vector<SweepEntry>& e, const std::string& hash) {
    auto os = open_csv(path, hash);
    os << "tol,realization,seed,tol_abs,estimate,error,stat_error,bias_bound,levels,work,overhead_work,"
          "root_work\n";
    for (const auto& x : e)
        os << x.tol << ',' << x.realization << ',' << x.seed << ',' << x.result.tol_abs << ',' << x.result.estimate
           << ',' << x.error << ',' << x.result.stat_error << ',' << x.result.bias_bound << ','
           << x.result.levels.size() << ',' << x.result.total_work << ',' << x.result.overhead_work << ','
           << std::sqrt(x.result.total_work) * x.result.tol_abs << '\n';
}

void write_work_tol_csv(const std::string& path, const std::vector<SweepSummary>& s, const std::string& hash) {
    auto os = open_csv(path, hash);
    os << "tol,realizations,tol_abs,work,root_work,fail_fraction,mean_abs_error,levels\n";
    for (const auto& x : s)
        os << x.tol << ',' << x.realizations << ',' << x.mean_tol_abs << ',' << x.mean_work << ','
           << x.mean_root_work << ',' << x.fail_fraction << ',' << x.mean_abs_error << ',' << x.mean_levels
           << '\n';
}

void write_sweep_levels_csv(const std::string& path, const std::vector<SweepEntry>& e, const std::string& hash) {
    auto os = open_csv(path, hash);
    os << "tol,realization,level,level_tol,E,E_ci,V,V_ci,W,M\n";
    for (const auto& x : e)
        for (const auto& l : x.result.levels)
            os << x.tol << ',' << x.realization << ',' << l.level << ',' << l.tol << ',' << l.stats.mean << ','
               << l.stats.mean_ci << ',' << l.stats.variance << ',' << l.stats.variance_ci << ',' << l.stats.work
               << ',' << l.M << '\n';
}

DensitySamples sample_densities(const RunConfig& cfg, const FieldModel& model, MeshHierarchy& h, int k, int n,
                                std::vector<double>* lhalf_integral, std::vector<double>* l1) {
    const auto& lvl = h.level(k);
    DensitySamples s;
    const auto& mesh = lvl.mesh();
    for (int c = 0; c < mesh.num_cells(); ++c) s.area.push_back(mesh.cell_h(c) * mesh.cell_h(c));
    for (int i = 0; i < n; ++i) {
        const auto field = model.draw(sample_key(cfg.seed, kDensityStream, k, i));
        auto sol = solve_on(lvl, field, h.params().density);
        if (lhalf_integral) lhalf_integral->push_back(std::sqrt(sol.density.lhalf));
        if (l1) l1->push_back(sol.density.l1);
        s.rho.push_back(std::move(sol.density.rho_bar));
    }
    return s;
}

ModelReport model_report(const RunConfig& cfg, const DensitySamples& dens, const DensityStats& stats,
                         const LevelRates& rates) {
    ModelReport r;
    r.stats = stats;
    r.jensen = true;
    for (double tol : cfg.tols) {
        const double bias = (1.0 - cfg.theta) * tol;
        r.work.emplace_back(bias, work_models(dens, bias));
        r.jensen = r.jensen && jensen_chain_holds(r.work.back().second);
    }
    ComplexityInputs in;
    in.C = cfg.C;
    in.tol0 = cfg.level_tol0;
    in.theta = cfg.theta;
    in.C_xi = cfg.C_xi;
    in.V0 = rates.stats.empty() ? 0.0 : rates.stats.front().variance;
    r.K = complexity_constants(stats, in);
    for (std::size_t l = 1; l < rates.stats.size(); ++l) {
        VarianceRow v;
        v.level = static_cast<int>(l);
        v.tol = rates.tol[l];
        v.V = rates.stats[l].variance;
        v.V_ci = rates.stats[l].variance_ci;
        v.predicted = predicted_level_variance(v.tol, cfg.C, stats.var_K1);
        v.ratio = v.predicted > 0.0 ? v.V / v.predicted : std::numeric_limits<double>::quiet_NaN();
        r.variance.push_back(v);
    }
    return r;
}

nlohmann::json to_json(const ModelReport& r) {
    nlohmann::json j;
    j["density_samples"] = r.stats.l1.size();
    j["control"] = r.stats.control == ControlCase::fully_adaptive ? "fully_adaptive" : "uniform_selection";
    j["K1"] = {{"mean", r.stats.mean_K1}, {"variance", r.stats.var_K1}};
    j["K2"] = {{"mean", r.stats.mean_K2}, {"variance", r.stats.var_K2}};
    auto w = nlohmann::json::array();
    for (const auto& [tol, m] : r.work)
        w.push_back({{"tol_bias", tol},
                     {"stochastic", m.stochastic},
                     {"uniform_stochastic", m.uniform_stochastic},
                     {"deterministic", m.deterministic},
                     {"uniform_deterministic", m.uniform_deterministic}});
    j["work_models"] = std::move(w);
    j["jensen_chain"] = r.jensen;
    j["complexity"] = {{"K3", r.K.K3}, {"K4", r.K.K4},         {"K5", r.K.K5},
                       {"K", r.K.K},   {"regime", to_string(r.K.regime)}, {"degenerate", r.K.degenerate}};
    auto v = nlohmann::json::array();
    for (const auto& x : r.variance)
        v.push_back({{"level", x.level},
                     {"tol", x.tol},
                     {"V", x.V},
                     {"V_ci", x.V_ci},
                     {"predicted", x.predicted},
                     {"ratio", std::isfinite(x.ratio) ? nlohmann::json(x.ratio) : nlohmann::json(nullptr)}});
    j["variance"] = std::move(v);
    return j;
}

void write_variance_csv(const std::string& path, const ModelReport& r, const std::string& hash) {
    auto os = open_csv(path, hash);
    os << "level,tol,V,V_ci,predicted,ratio\n";
    for (const auto& x : r.variance)
        os << x.level << ',' << x.tol << ',' << x.V << ',' << x.V_ci << ',' << x.predicted << ',' << x.ratio << '\n';
}

std::vector<ScatterRow> error_scatter(const RunConfig& cfg, const FieldModel& model, MeshHierarchy& h,
                                      const LevelRates& rates) {
    std::vector<ScatterRow> out;
    if (rates.scheme != Scheme::amlmc) return out;
    for (const auto& level : rates.samples) {
        const int n = std::min<int>(cfg.scatter_samples, static_cast<int>(level.size()));
        for (int i = 0; i < n; ++i) {
            const auto& s = level[i];
            ScatterRow row;
            row.key = s.key;
            row.level = s.level;
            row.k_fine = s.k_fine;
            row.k_ref = s.k_fine + cfg.scatter_offset;
            row.q = s.q_fine;
            row.e_est = s.e_est_fine;
            const auto ref = solve_on(h.level(row.k_ref), model.draw(s.key), h.params().density);
            row.q_ref = ref.q + ref.density.e_est;
            out.push_back(row);
        }
    }
    return out;
}

void write_scatter_csv(const std::string& path, const std::vector<ScatterRow>& rows, const std::string& hash) {
    auto os = open_csv(path, hash);
    os << "key,level,k_fine,k_ref,q,e_est,q_ref,error\n";
    for (const auto& r : rows)
        os << r.key << ',' << r.level << ',' << r.k_fine << ',' << r.k_ref << ',' << r.q << ',' << r.e_est << ','
           << r.q_ref << ',' << r.q_ref - r.q << '\n';
}

}  // namespace amlmc
