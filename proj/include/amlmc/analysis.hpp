#pragma once

#include <span>
#include <string>
#include <vector>

namespace amlmc {

// Error densities of several samples on one common mesh.
struct DensitySamples {
    std::vector<double> area;              // cell areas
    std::vector<std::vector<double>> rho;  // [sample][cell]

    double domain_area() const;
};

// Integral over D of E[|rho|^{1/2}].
double expected_numerator(const DensitySamples& s);

// h*(x) = (tol / R)^{1/2} |rho(x)|^{-1/4} with R = int E[|rho|^{1/2}].
std::vector<double> optimal_h_stochastic(std::span<const double> rho, double tol_bias, double R);
// Per-sample h*_uni = tol^{1/2} (int rho)^{-1/4} / E[(int rho)^{1/2}]^{1/2}.
std::vector<double> optimal_h_uniform(const DensitySamples& s, double tol_bias);

struct WorkModels {
    double stochastic = 0.0;             // ||rho||_{L^{1/2}_P(DxOmega)} / tol
    double uniform_stochastic = 0.0;     // ||(||rho||_{L1(D)})||_{L^{1/2}_P} |D| / tol
    double deterministic = 0.0;          // ||(||rho||_{L1_P})||_{L^{1/2}(D)} / tol
    double uniform_deterministic = 0.0;  // ||rho||_{L1_P(DxOmega)} |D| / tol
};

WorkModels work_models(const DensitySamples& s, double tol_bias);
// stochastic <= {uniform_stochastic, deterministic} <= uniform_deterministic,
// each up to rel_slack relative to the larger side.
bool jensen_chain_holds(const WorkModels& w, double rel_slack = 1e-12);

enum class ControlCase { fully_adaptive, uniform_selection };

struct DensityStats {
    std::vector<double> lhalf_integral;  // int |rho|^{1/2} per sample
    std::vector<double> l1;              // int |rho| per sample
    double domain_area = 0.0;
    ControlCase control = ControlCase::fully_adaptive;
    double mean_K1 = 0.0, var_K1 = 0.0;
    double mean_K2 = 0.0, var_K2 = 0.0;
};

// K1 = Y / E[Y] and K2 = c E[Y] Y, Y being int|rho|^{1/2} (fully adaptive,
// c = 1) or (int|rho|)^{1/2} (uniform selection, c = |D|).
DensityStats density_stats(std::vector<double> lhalf_integral, std::vector<double> l1,
                           double domain_area, ControlCase control);

enum class Regime { d_less_2p, d_equal_2p, d_greater_2p };
std::string to_string(Regime r);

struct ComplexityConstants {
    double K3 = 0.0, K4 = 0.0, K5 = 0.0, K = 0.0;
    Regime regime = Regime::d_less_2p;
    bool degenerate = false;
};

struct ComplexityInputs {
    double C = 0.25;
    double tol0 = 2.0;
    double theta = 0.5;
    double C_xi = 1.96;
    int d = 2;
    int p = 2;
    double V0 = 0.0;  // level-0 variance, needed when d < 2p
};

ComplexityConstants complexity_constants(const DensityStats& stats, const ComplexityInputs& in);

double predicted_level_variance(double tol_l, double C, double var_K1);

// Least-squares slopes.
double linear_slope(std::span<const double> x, std::span<const double> y);
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace amlmc
