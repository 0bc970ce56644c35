#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "amlmc/mesh.hpp"

namespace amlmc {

// Evaluation points stored through their distinct coordinates so that
// separable fields can reuse per-coordinate work.
struct PointSet {
    std::vector<double> xs, ys;
    std::vector<std::array<int, 2>> idx;

    static PointSet from_points(const std::vector<std::array<double, 2>>& pts);
    std::size_t size() const { return idx.size(); }
    double x(std::size_t p) const { return xs[idx[p][0]]; }
    double y(std::size_t p) const { return ys[idx[p][1]]; }
};

struct MaternParams {
    double sigma2 = 1.0;
    double nu = 6.5;
    double r = 1.0;
    int modes = 256;
    // Periodic extension [c - L/2, c + L/2]^2 sampled on grid x grid points.
    double period = 16.0;
    int grid = 64;
};

double matern_covariance(double h, const MaternParams& p);

struct FourierMode {
    int kx, ky;  // kx > 0, or kx == 0 and ky >= 0
    bool sine;
    double lambda;
};

class FourierBasis {
public:
    static FourierBasis build(const MaternParams& p, const Rect& domain);
    // Every mode of the periodised covariance, untruncated, for checks.
    static FourierBasis build_full(const MaternParams& p, const Rect& domain);

    const MaternParams& params() const { return params_; }
    const std::vector<FourierMode>& modes() const { return modes_; }
    int size() const { return static_cast<int>(modes_.size()); }
    double period() const { return params_.period; }
    double center_x() const { return cx_; }
    double center_y() const { return cy_; }
    double theta(int i, double x, double y) const;
    // Sum of lambda_i over the discarded modes.
    double truncated_variance() const { return dropped_; }

private:
    static FourierBasis make(const MaternParams& p, const Rect& domain, bool truncate);

    MaternParams params_;
    std::vector<FourierMode> modes_;
    double cx_ = 0.0, cy_ = 0.0;
    double dropped_ = 0.0;
};

// One realisation of the diffusion coefficient a(x).
class FieldSample {
public:
    FieldSample() = default;
    static FieldSample constant(double a);
    static FieldSample fourier(std::shared_ptr<const FourierBasis> basis, std::vector<double> xi);

    bool is_constant() const { return !basis_; }
    double value() const { return value_; }
    const std::vector<double>& xi() const { return xi_; }

    double operator()(double x, double y) const;
    double log_value(double x, double y) const;
    void evaluate(const PointSet& pts, std::span<double> out) const;
    // Relative cost of one point evaluation, for the work model.
    double cost_per_point() const { return basis_ ? static_cast<double>(basis_->size()) : 1.0; }

private:
    double value_ = 1.0;
    std::shared_ptr<const FourierBasis> basis_;
    std::vector<double> xi_;
    std::vector<double> coef_;  // xi_i * sqrt(lambda_i)
};

FieldSample sample_field(std::shared_ptr<const FourierBasis> basis, std::vector<double> xi);

// Coefficient model of the three examples: 0 deterministic a = exp(2),
// 1 a = exp(sigma Z), 2 lognormal Matern field.
class FieldModel {
public:
    FieldModel(int example, double sigma2, const MaternParams& matern = {});

    int example() const { return example_; }
    double sigma2() const { return sigma2_; }
    bool deterministic() const { return example_ == 0; }
    std::shared_ptr<const FourierBasis> basis() const { return basis_; }

    FieldSample draw(std::uint64_t key) const;
    // exp(E[log a]); used to generate the auxiliary mesh hierarchy.
    FieldSample median() const;
    std::string describe() const;

private:
    int example_;
    double sigma2_;
    std::shared_ptr<const FourierBasis> basis_;
};

// Counter-based stream identifier.
std::uint64_t sample_key(std::uint64_t seed, std::uint64_t scheme, std::uint64_t level,
                         std::uint64_t index);

}  // namespace amlmc
