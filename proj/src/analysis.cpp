#include "amlmc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace amlmc {

namespace {

void check(const DensitySamples& s) {
    if (s.rho.empty()) throw std::invalid_argument("density samples: empty set");
    for (const auto& r : s.rho)
        if (r.size() != s.area.size()) throw std::invalid_argument("density samples: cell count mismatch");
}

double mean(std::span<const double> v) {
    double m = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) m += (v[i] - m) / static_cast<double>(i + 1);
    return m;
}

// Unbiased sample variance; zero for fewer than two values.
double variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

double DensitySamples::domain_area() const { return std::accumulate(area.begin(), area.end(), 0.0); }

double expected_numerator(const DensitySamples& s) {
    check(s);
    double out = 0.0;
    for (std::size_t c = 0; c < s.area.size(); ++c) {
        double m = 0.0;
        for (const auto& r : s.rho) m += std::sqrt(std::abs(r[c]));
        out += m / static_cast<double>(s.rho.size()) * s.area[c];
    }
    return out;
}

std::vector<double> optimal_h_stochastic(std::span<const double> rho, double tol_bias, double R) {
    if (!(tol_bias > 0.0) || !(R > 0.0)) throw std::invalid_argument("optimal_h_stochastic: need tol > 0 and R > 0");
    std::vector<double> h(rho.size());
    const double f = std::sqrt(tol_bias / R);
    for (std::size_t c = 0; c < rho.size(); ++c) {
        const double r = std::abs(rho[c]);
        if (!(r > 0.0)) throw std::invalid_argument("optimal_h_stochastic: density must be nonzero");
        h[c] = f * std::pow(r, -0.25);
    }
    return h;
}

std::vector<double> optimal_h_uniform(const DensitySamples& s, double tol_bias) {
    check(s);
    std::vector<double> l1(s.rho.size());
    for (std::size_t i = 0; i < s.rho.size(); ++i)
        for (std::size_t c = 0; c < s.area.size(); ++c) l1[i] += std::abs(s.rho[i][c]) * s.area[c];
    double ey = 0.0;
    for (double v : l1) ey += std::sqrt(v);
    ey /= static_cast<double>(l1.size());
    std::vector<double> h(l1.size());
    for (std::size_t i = 0; i < l1.size(); ++i) h[i] = std::sqrt(tol_bias) * std::pow(l1[i], -0.25) / std::sqrt(ey);
    return h;
}

WorkModels work_models(const DensitySamples& s, double tol_bias) {
    check(s);
    if (!(tol_bias > 0.0)) throw std::invalid_argument("work_models: tol must be positive");
    const double n = static_cast<double>(s.rho.size());
    const double area = s.domain_area();
    WorkModels w;
    const double R = expected_numerator(s);
    w.stochastic = R * R / tol_bias;

    double ey = 0.0, el1 = 0.0;
    for (const auto& r : s.rho) {
        double l1 = 0.0;
        for (std::size_t c = 0; c < s.area.size(); ++c) l1 += std::abs(r[c]) * s.area[c];
        ey += std::sqrt(l1) / n;
        el1 += l1 / n;
    }
    w.uniform_stochastic = ey * ey * area / tol_bias;
    w.uniform_deterministic = el1 * area / tol_bias;

    double det = 0.0;
    for (std::size_t c = 0; c < s.area.size(); ++c) {
        double m = 0.0;
        for (const auto& r : s.rho) m += std::abs(r[c]) / n;
        det += std::sqrt(m) * s.area[c];
    }
    w.deterministic = det * det / tol_bias;
    return w;
}

bool jensen_chain_holds(const WorkModels& w, double rel_slack) {
    auto le = [&](double a, double b) { return a <= b + rel_slack * std::max(std::abs(a), std::abs(b)); };
    return le(w.stochastic, w.uniform_stochastic) && le(w.stochastic, w.deterministic) &&
           le(w.uniform_stochastic, w.uniform_deterministic) && le(w.deterministic, w.uniform_deterministic);
}

DensityStats density_stats(std::vector<double> lhalf_integral, std::vector<double> l1, double domain_area,
                           ControlCase control) {
    if (lhalf_integral.empty() || lhalf_integral.size() != l1.size())
        throw std::invalid_argument("density_stats: need matching nonempty sample vectors");
    DensityStats s;
    s.lhalf_integral = std::move(lhalf_integral);
    s.l1 = std::move(l1);
    s.domain_area = domain_area;
    s.control = control;
    std::vector<double> Y(s.l1.size());
    for (std::size_t i = 0; i < Y.size(); ++i) {
        if (s.lhalf_integral[i] < 0.0 || s.l1[i] < 0.0) throw std::invalid_argument("density_stats: negative integral");
        Y[i] = control == ControlCase::fully_adaptive ? s.lhalf_integral[i] : std::sqrt(s.l1[i]);
    }
    const double ey = mean(Y);
    if (!(ey > 0.0)) throw std::invalid_argument("density_stats: zero density");
    const double c = control == ControlCase::fully_adaptive ? 1.0 : domain_area;
    std::vector<double> K1(Y.size()), K2(Y.size());
    for (std::size_t i = 0; i < Y.size(); ++i) {
        K1[i] = Y[i] / ey;
        K2[i] = c * ey * Y[i];
    }
    s.mean_K1 = mean(K1);
    s.var_K1 = variance(K1);
    s.mean_K2 = mean(K2);
    s.var_K2 = variance(K2);
    return s;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::d_less_2p: return "d<2p";
        case Regime::d_equal_2p: return "d=2p";
        default: return "d>2p";
    }
}

ComplexityConstants complexity_constants(const DensityStats& stats, const ComplexityInputs& in) {
    if (!(in.C > 0.0 && in.C < 1.0) || !(in.theta > 0.0 && in.theta < 1.0) || in.d < 1 || in.p < 1)
        throw std::invalid_argument("complexity_constants: invalid parameters");
    ComplexityConstants k;
    const double dp = static_cast<double>(in.d) / in.p;
    k.regime = in.d < 2 * in.p ? Regime::d_less_2p : in.d == 2 * in.p ? Regime::d_equal_2p : Regime::d_greater_2p;
    k.K3 = stats.mean_K2 * stats.var_K1;
    k.degenerate = !(stats.var_K1 > 0.0);
    const double sep = 1.0 / in.C - 1.0;
    switch (k.regime) {
        case Regime::d_less_2p: {
            if (k.degenerate) {
                k.K4 = 0.0;
                break;
            }
            const double e = 1.0 - dp / 2.0;
            const double ce = std::pow(in.C, e);
            const double t = std::sqrt(in.V0 / stats.var_K1) / (sep * std::sqrt(1.0 + std::pow(in.C, dp))) +
                             in.tol0 * ce / (1.0 - ce);
            k.K4 = std::pow(in.tol0, -dp) * t * t;
            break;
        }
        case Regime::d_equal_2p: k.K4 = std::pow(std::log(in.C), -2.0); break;
        case Regime::d_greater_2p:
            k.K4 = std::pow(1.0 - in.theta, 2.0 - dp) * std::pow(1.0 - std::pow(in.C, dp / 2.0 - 1.0), -2.0);
            break;
    }
    k.K5 = std::pow(in.C_xi / in.theta, 2) * sep * sep * (1.0 + std::pow(in.C, dp));
    k.K = k.K3 * k.K4 * k.K5;
    return k;
}

double predicted_level_variance(double tol_l, double C, double var_K1) {
    const double s = 1.0 / C - 1.0;
    return tol_l * tol_l * s * s * var_K1;
}

double linear_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope: need at least two points");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("slope: degenerate abscissae");
    return sxy / sxx;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return linear_slope(lx, ly);
}

}  // namespace amlmc
