#include "amlmc/mlmc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include "amlmc/solver.hpp"

namespace amlmc {

namespace {

constexpr std::uint64_t kPilotStream = 2;
constexpr std::uint64_t kScaleStream = 3;

std::uint64_t scheme_tag(Scheme s) { return s == Scheme::smlmc ? 0 : 1; }

struct MeshEval {
    double q = 0.0;
    double e_est = 0.0;
    double numerator = 0.0;
    double work = 0.0;
};

double assembly_work(const Discretization& disc, const FieldSample& field) {
    return static_cast<double>(disc.eval_points().size()) * field.cost_per_point();
}

double estimation_work(const QuadMesh& mesh) {
    const double n = mesh.num_cells();
    const double lg = std::log2(std::max(n, 2.0));
    return n * lg * lg;
}

// tol_iter <= 0 requests reference solves.
MeshEval evaluate(const HierarchyLevel& lvl, const FieldSample& field, double tol_iter,
                  bool density, const DensityOptions& opt, const WorkUnits& units) {
    const auto& disc = lvl.disc;
    MeshEval ev;
    const auto a = disc.evaluate_field(field);
    const auto A = disc.assemble(a);
    ev.work = units.assembly * assembly_work(disc, field);
    std::vector<double> u, phi;
    if (tol_iter <= 0.0) {
        auto p = solve_reference(A, disc.primal_rhs());
        ev.work += units.solve * p.work;
        u = std::move(p.x);
        if (density) {
            auto d = solve_reference(A, disc.dual_rhs());
            ev.work += units.solve * d.work;
            phi = std::move(d.x);
        }
    } else {
        auto s = solve_primal_dual(A, disc.primal_rhs(), A, disc.dual_rhs(), tol_iter);
        ev.work += units.solve * s.work;
        u = std::move(s.u);
        phi = std::move(s.phi);
    }
    ev.q = disc.qoi(u);
    if (density) {
        const auto d = estimate_density(lvl.plan, disc, a, u, phi, lvl.tol, opt);
        ev.e_est = d.e_est;
        ev.numerator = d.scaling_numerator;
        ev.work += units.estimate * estimation_work(disc.mesh());
    }
    return ev;
}

}  // namespace

std::string to_string(Scheme s) { return s == Scheme::smlmc ? "smlmc" : "amlmc"; }

Scheme parse_scheme(const std::string& s) {
    if (s == "smlmc") return Scheme::smlmc;
    if (s == "amlmc") return Scheme::amlmc;
    throw std::invalid_argument("unknown scheme '" + s + "' (expected smlmc or amlmc)");
}

void EstimatorConfig::validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("estimator: TOL must be positive");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("estimator: theta must lie in (0,1)");
    if (!(C > 0.0 && C < 1.0)) throw std::invalid_argument("estimator: C must lie in (0,1)");
    if (!(C_xi > 0.0)) throw std::invalid_argument("estimator: C_xi must be positive");
    if (!(tol0 > 0.0)) throw std::invalid_argument("estimator: tol0 must be positive");
    if (warmup < 2) throw std::invalid_argument("estimator: warm-up needs at least 2 samples");
    if (pilot < 2 && !(pilot == 1 && allow_single_pilot))
        throw std::invalid_argument("estimator: pilot needs at least 2 samples");
    if (relative && scale_samples < 1) throw std::invalid_argument("estimator: scale_samples must be positive");
    if (max_levels < 1) throw std::invalid_argument("estimator: max_levels must be positive");
}

double EstimatorConfig::level_tol(int l) const { return tol0 * std::pow(C, l); }

LevelStats level_stats(std::span<const double> values, std::span<const double> work) {
    LevelStats s;
    double m2 = 0.0, w = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        ++s.count;
        const double d = values[i] - s.mean;
        s.mean += d / s.count;
        m2 += d * (values[i] - s.mean);
        w += (i < work.size() ? work[i] : 0.0);
    }
    if (s.count > 1) s.variance = std::max(m2 / (s.count - 1), 0.0);
    if (s.count > 0) s.work = w / s.count;
    if (s.count > 1) {
        s.mean_ci = 1.96 * std::sqrt(s.variance / s.count);
        s.variance_ci = 1.96 * s.variance * std::sqrt(2.0 / (s.count - 1));
    }
    return s;
}

void LevelRecord::refresh() {
    std::vector<double> dq(samples.size()), w(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        dq[i] = samples[i].dq();
        w[i] = samples[i].work;
    }
    stats = level_stats(dq, w);
}

std::vector<double> optimal_counts_real(std::span<const double> V, std::span<const double> W,
                                        double theta, double C_xi, double tol) {
    if (V.size() != W.size()) throw std::invalid_argument("optimal_counts: size mismatch");
    double sum = 0.0;
    for (std::size_t l = 0; l < V.size(); ++l) {
        if (!(V[l] >= 0.0) || !(W[l] > 0.0))
            throw std::invalid_argument("optimal_counts: need V >= 0 and W > 0");
        sum += std::sqrt(V[l] * W[l]);
    }
    const double f = std::pow(C_xi / (theta * tol), 2);
    std::vector<double> M(V.size());
    for (std::size_t l = 0; l < V.size(); ++l) M[l] = f * std::sqrt(V[l] / W[l]) * sum;
    return M;
}

std::vector<int> optimal_counts(std::span<const double> V, std::span<const double> W,
                                double theta, double C_xi, double tol) {
    const auto real = optimal_counts_real(V, W, theta, C_xi, tol);
    std::vector<int> M(real.size());
    for (std::size_t l = 0; l < real.size(); ++l) {
        if (!(real[l] < 2e9)) throw std::runtime_error("optimal_counts: sample count overflow at level " + std::to_string(l));
        M[l] = std::max(1, static_cast<int>(std::ceil(real[l])));
    }
    return M;
}

PilotResult pilot_R(MeshHierarchy& hierarchy, const FieldModel& model, int n_pilot,
                    std::uint64_t seed, bool allow_single, const WorkUnits& units) {
    if (n_pilot < 1 || (n_pilot == 1 && !allow_single))
        throw std::invalid_argument("pilot_R: need at least 2 pilot samples");
    const auto& lvl = hierarchy.level(0);
    PilotResult p;
    for (int i = 0; i < n_pilot; ++i) {
        const auto field = model.draw(sample_key(seed, kPilotStream, 0, i));
        const auto ev = evaluate(lvl, field, 0.0, true, hierarchy.params().density, units);
        p.R += (ev.numerator - p.R) / (i + 1);
        p.mean_q += (ev.q - p.mean_q) / (i + 1);
        p.work += ev.work;
    }
    if (!(p.R > 0.0)) throw std::runtime_error("pilot_R: scaling denominator is not positive");
    return p;
}

namespace {

struct Selection {
    int k = 0;
    double q = 0.0, e_est = 0.0, work = 0.0;
};

// Coarsest hierarchy mesh with |e_est| < K_k tol. Solver tolerances depend
// only on tol, so the coarse track of level l repeats level l-1 exactly.
Selection select_mesh(double tol, const EstimatorConfig& cfg, MeshHierarchy& hierarchy, const FieldSample& field,
                      double R, std::uint64_t key, int level, const MeshEval& first) {
    Selection sel;
    double K_prev = 0.0;
    for (int k = 0;; ++k) {
        const HierarchyLevel* lvl = nullptr;
        try {
            lvl = &hierarchy.level(k);
        } catch (const std::exception& e) {
            throw std::runtime_error("sample key " + std::to_string(key) + " (level " + std::to_string(level) +
                                     "): " + e.what());
        }
        const MeshEval ev = k == 0 ? first
                                   : evaluate(*lvl, field, K_prev * tol / 10.0, true, hierarchy.params().density,
                                              cfg.work);
        if (k > 0) sel.work += ev.work;
        const double K = ev.numerator / R;
        if (std::abs(ev.e_est) < K * tol) {
            sel.k = k;
            sel.q = ev.q;
            sel.e_est = ev.e_est;
            return sel;
        }
        K_prev = K;
    }
}

}  // namespace

SampleRecord amlmc_sample(int level, const EstimatorConfig& cfg, MeshHierarchy& hierarchy,
                          const FieldModel& model, double R, std::uint64_t key) {
    if (level < 0) throw std::invalid_argument("amlmc_sample: negative level");
    SampleRecord s;
    s.key = key;
    s.level = level;
    const auto field = model.draw(key);
    // H_0 uses reference solves and is shared by both tracks.
    const auto first = evaluate(hierarchy.level(0), field, 0.0, true, hierarchy.params().density, cfg.work);
    s.work = first.work;
    const auto fine = select_mesh(cfg.level_tol(level), cfg, hierarchy, field, R, key, level, first);
    s.q_fine = fine.q;
    s.k_fine = fine.k;
    s.e_est_fine = fine.e_est;
    s.work += fine.work;
    if (level > 0) {
        const auto coarse = select_mesh(cfg.level_tol(level - 1), cfg, hierarchy, field, R, key, level, first);
        s.q_coarse = coarse.q;
        s.k_coarse = coarse.k;
        s.work += coarse.work;
    }
    return s;
}

SampleRecord smlmc_sample(int level, MeshHierarchy& uniform, const FieldModel& model,
                          std::uint64_t key, const WorkUnits& units) {
    if (level < 0) throw std::invalid_argument("smlmc_sample: negative level");
    SampleRecord s;
    s.key = key;
    s.level = level;
    const auto field = model.draw(key);
    const auto fine = evaluate(uniform.level(level), field, 0.0, false, {}, units);
    s.q_fine = fine.q;
    s.k_fine = level;
    s.work = fine.work;
    if (level > 0) {
        const auto coarse = evaluate(uniform.level(level - 1), field, 0.0, false, {}, units);
        s.q_coarse = coarse.q;
        s.k_coarse = level - 1;
        s.work += coarse.work;
    }
    return s;
}

SampleRecord draw_sample(int level, std::uint64_t index, const EstimatorConfig& cfg,
                         MeshHierarchy& hierarchy, const FieldModel& model, double R) {
    const auto key = sample_key(cfg.seed, scheme_tag(cfg.scheme), level, index);
    return cfg.scheme == Scheme::amlmc ? amlmc_sample(level, cfg, hierarchy, model, R, key)
                                       : smlmc_sample(level, hierarchy, model, key, cfg.work);
}

double extrapolated_bias(double E_coarse, double E_fine) {
    E_coarse = std::abs(E_coarse);
    E_fine = std::abs(E_fine);
    if (E_fine == 0.0) return 0.0;
    // Observed weak rate clamped to [1/2, 2] per halving of h.
    double q = E_coarse > 0.0 ? E_coarse / E_fine : 4.0;
    q = std::clamp(q, std::sqrt(2.0), 4.0);
    return E_fine / (q - 1.0);
}

namespace {

void top_up(LevelRecord& rec, int target, const EstimatorConfig& cfg, MeshHierarchy& h,
            const FieldModel& model, double R) {
    for (int n = static_cast<int>(rec.samples.size()); n < target; ++n)
        rec.samples.push_back(draw_sample(rec.level, static_cast<std::uint64_t>(n), cfg, h, model, R));
    rec.refresh();
    if (!std::isfinite(rec.stats.mean) || !std::isfinite(rec.stats.variance))
        throw std::runtime_error("level " + std::to_string(rec.level) + ": nonfinite sample statistics");
}

}  // namespace

MLMCResult run_estimator(const EstimatorConfig& cfg, MeshHierarchy& hierarchy, const FieldModel& model) {
    cfg.validate();
    if ((cfg.scheme == Scheme::smlmc) != hierarchy.is_uniform())
        throw std::invalid_argument("run_estimator: " + to_string(cfg.scheme) +
                                    " needs a " + (hierarchy.is_uniform() ? "adaptive" : "uniform") +
                                    " hierarchy, got the other kind");
    MLMCResult res;
    res.scheme = cfg.scheme;
    if (cfg.scheme == Scheme::amlmc) {
        const auto p = pilot_R(hierarchy, model, cfg.pilot, cfg.seed, cfg.allow_single_pilot, cfg.work);
        res.R = p.R;
        res.overhead_work += p.work;
    }
    res.tol_abs = cfg.tol;
    if (cfg.relative) {
        double m = 0.0;
        for (int i = 0; i < cfg.scale_samples; ++i) {
            const auto key = sample_key(cfg.seed, kScaleStream + scheme_tag(cfg.scheme) * 16, 0, i);
            const auto s = cfg.scheme == Scheme::amlmc ? amlmc_sample(0, cfg, hierarchy, model, res.R, key)
                                                       : smlmc_sample(0, hierarchy, model, key, cfg.work);
            m += (s.q_fine - m) / (i + 1);
            res.overhead_work += s.work;
        }
        if (!(std::abs(m) > 0.0)) throw std::runtime_error("relative TOL: estimated scale is zero");
        res.tol_scale = std::abs(m);
        res.tol_abs = cfg.tol * res.tol_scale;
    }
    const double bias_budget = (1.0 - cfg.theta) * res.tol_abs;

    auto add_level = [&](int l) {
        LevelRecord rec;
        rec.level = l;
        rec.tol = cfg.scheme == Scheme::amlmc ? cfg.level_tol(l) : hierarchy.level(l).mesh().smallest_cell_size();
        top_up(rec, cfg.warmup, cfg, hierarchy, model, res.R);
        res.levels.push_back(std::move(rec));
    };

    if (cfg.scheme == Scheme::amlmc) {
        int L = 0;
        while (cfg.level_tol(L) > bias_budget) {
            if (++L >= cfg.max_levels)
                throw std::runtime_error("AMLMC: bias budget " + std::to_string(bias_budget) +
                                         " needs more than " + std::to_string(cfg.max_levels) + " levels");
        }
        for (int l = 0; l <= L; ++l) add_level(l);
        res.bias_bound = cfg.level_tol(L);
    } else {
        const int L0 = std::min(2, cfg.max_levels - 1);
        for (int l = 0; l <= L0; ++l) add_level(l);
        for (;;) {
            const int L = static_cast<int>(res.levels.size()) - 1;
            res.bias_bound = L >= 2 ? extrapolated_bias(res.levels[L - 1].stats.mean, res.levels[L].stats.mean)
                                    : std::abs(res.levels[L].stats.mean);
            if (res.bias_bound <= bias_budget) break;
            if (L + 1 >= cfg.max_levels)
                throw std::runtime_error("SMLMC: bias estimate " + std::to_string(res.bias_bound) +
                                         " above budget after " + std::to_string(cfg.max_levels) + " levels");
            add_level(L + 1);
        }
    }

    // Allocation from warm-up statistics, then one re-allocation.
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> V, W;
        for (const auto& rec : res.levels) {
            V.push_back(rec.stats.variance);
            W.push_back(std::max(rec.stats.work, 1.0));
        }
        const auto M = optimal_counts(V, W, cfg.theta, cfg.C_xi, res.tol_abs);
        for (std::size_t l = 0; l < res.levels.size(); ++l)
            if (M[l] > static_cast<int>(res.levels[l].samples.size()))
                top_up(res.levels[l], M[l], cfg, hierarchy, model, res.R);
    }

    double var = 0.0;
    for (auto& rec : res.levels) {
        rec.M = static_cast<int>(rec.samples.size());
        res.estimate += rec.stats.mean;
        var += rec.stats.variance / rec.M;
        res.total_work += rec.stats.work * rec.M;
    }
    res.stat_error = cfg.C_xi * std::sqrt(var);
    return res;
}

void write_levels_csv(const std::string& path, const MLMCResult& r, const std::string& header) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    if (!header.empty()) os << "# " << header << '\n';
    os << "level,tol,E,E_signed,E_ci,V,V_ci,W,M\n" << std::setprecision(12);
    for (const auto& l : r.levels)
        os << l.level << ',' << l.tol << ',' << std::abs(l.stats.mean) << ',' << l.stats.mean << ','
           << l.stats.mean_ci << ',' << l.stats.variance << ',' << l.stats.variance_ci << ','
           << l.stats.work << ',' << l.M << '\n';
}

void write_samples_csv(const std::string& path, const MLMCResult& r, const std::string& header) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    if (!header.empty()) os << "# " << header << '\n';
    os << "key,level,k_coarse,k_fine,q_coarse,q_fine,dq,e_est_fine,work\n" << std::setprecision(12);
    for (const auto& l : r.levels)
        for (const auto& s : l.samples)
            os << s.key << ',' << s.level << ',' << s.k_coarse << ',' << s.k_fine << ',' << s.q_coarse << ','
               << s.q_fine << ',' << s.dq() << ',' << s.e_est_fine << ',' << s.work << '\n';
}

}  // namespace amlmc
