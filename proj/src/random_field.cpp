#include "amlmc/random_field.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace amlmc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<double> unique_sorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

int index_of(const std::vector<double>& sorted, double x) {
    return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
}

// e^{i k t} for k = 0..kmax
void phase_table(double t, int kmax, std::complex<double>* out) {
    const std::complex<double> step = std::polar(1.0, t);
    out[0] = 1.0;
    for (int k = 1; k <= kmax; ++k) out[k] = (k % 16 == 0) ? std::polar(1.0, k * t) : out[k - 1] * step;
}

}  // namespace

PointSet PointSet::from_points(const std::vector<std::array<double, 2>>& pts) {
    PointSet ps;
    std::vector<double> xs, ys;
    xs.reserve(pts.size());
    ys.reserve(pts.size());
    for (const auto& p : pts) {
        xs.push_back(p[0]);
        ys.push_back(p[1]);
    }
    ps.xs = unique_sorted(std::move(xs));
    ps.ys = unique_sorted(std::move(ys));
    ps.idx.reserve(pts.size());
    for (const auto& p : pts) ps.idx.push_back({index_of(ps.xs, p[0]), index_of(ps.ys, p[1])});
    return ps;
}

double matern_covariance(double h, const MaternParams& p) {
    if (h < 0.0) throw std::invalid_argument("matern: negative distance");
    if (h == 0.0) return p.sigma2;
    const double z = std::sqrt(2.0 * p.nu) * h / p.r;
    if (z > 700.0) return 0.0;
    const double logpre = std::log(p.sigma2) - (p.nu - 1.0) * std::numbers::ln2 - std::lgamma(p.nu);
    return std::exp(logpre + p.nu * std::log(z)) * std::cyl_bessel_k(p.nu, z);
}

FourierBasis FourierBasis::build(const MaternParams& p, const Rect& domain) {
    return make(p, domain, true);
}

FourierBasis FourierBasis::build_full(const MaternParams& p, const Rect& domain) {
    return make(p, domain, false);
}

FourierBasis FourierBasis::make(const MaternParams& p, const Rect& domain, bool truncate) {
    if (!(p.sigma2 > 0.0) || !(p.nu > 0.0) || !(p.r > 0.0) || p.modes < 1)
        throw std::invalid_argument("matern: parameters must be positive");
    if (p.grid < 4 || p.grid % 2 != 0) throw std::invalid_argument("matern: grid must be even");
    if (p.period < 2.0 * std::max(domain.width(), domain.height()))
        throw std::invalid_argument("matern: periodic extension shorter than twice the domain");

    const int n = p.grid;
    const double dx = p.period / n;
    // Periodised covariance on the grid (minimum-image distance); it is even
    // in each index, so its DFT is a separable cosine transform.
    std::vector<double> c(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double hx = std::min(a, n - a) * dx, hy = std::min(b, n - b) * dx;
            c[a * n + b] = matern_covariance(std::hypot(hx, hy), p);
        }
    std::vector<double> cosv(static_cast<std::size_t>(n) * n);
    for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) cosv[k * n + m] = std::cos(2.0 * std::numbers::pi * k * m / n);
    std::vector<double> tmp(c.size(), 0.0), spec(c.size(), 0.0);
    for (int k1 = 0; k1 < n; ++k1)
        for (int b = 0; b < n; ++b) {
            double s = 0.0;
            for (int a = 0; a < n; ++a) s += cosv[k1 * n + a] * c[a * n + b];
            tmp[k1 * n + b] = s;
        }
    for (int k1 = 0; k1 < n; ++k1)
        for (int k2 = 0; k2 < n; ++k2) {
            double s = 0.0;
            for (int b = 0; b < n; ++b) s += tmp[k1 * n + b] * cosv[k2 * n + b];
            spec[k1 * n + k2] = s / (static_cast<double>(n) * n);
        }

    const double smax = *std::max_element(spec.begin(), spec.end());
    for (double& s : spec) {
        if (s < -1e-10 * smax)
            throw std::runtime_error("matern: negative spectral weight, periodic extension too short");
        if (s < 0.0) s = 0.0;
    }

    auto wrap = [n](int k) { return ((k % n) + n) % n; };
    auto signed_k = [n](int k) { return k > n / 2 ? k - n : k; };
    std::vector<FourierMode> modes;
    std::vector<char> done(spec.size(), 0);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (done[a * n + b]) continue;
            const int na = wrap(-a), nb = wrap(-b);
            done[a * n + b] = done[na * n + nb] = 1;
            const double w = spec[a * n + b];
            int kx = signed_k(a), ky = signed_k(b);
            if (kx < 0 || (kx == 0 && ky < 0)) {
                kx = -kx;
                ky = -ky;
            }
            if (na == a && nb == b) {
                if (kx == 0 && ky == 0) {
                    modes.push_back({0, 0, false, w});
                } else {
                    modes.push_back({kx, ky, false, w});
                    modes.push_back({kx, ky, true, w});
                }
            } else {
                modes.push_back({kx, ky, false, 2.0 * w});
                modes.push_back({kx, ky, true, 2.0 * w});
            }
        }
    std::stable_sort(modes.begin(), modes.end(), [](const FourierMode& u, const FourierMode& v) {
        if (u.lambda != v.lambda) return u.lambda > v.lambda;
        const int ru = u.kx * u.kx + u.ky * u.ky, rv = v.kx * v.kx + v.ky * v.ky;
        if (ru != rv) return ru < rv;
        if (u.kx != v.kx) return u.kx < v.kx;
        if (u.ky != v.ky) return u.ky < v.ky;
        return u.sine < v.sine;
    });

    FourierBasis fb;
    fb.params_ = p;
    fb.cx_ = 0.5 * (domain.x0 + domain.x1);
    fb.cy_ = 0.5 * (domain.y0 + domain.y1);
    if (truncate && static_cast<int>(modes.size()) > p.modes) {
        for (std::size_t i = p.modes; i < modes.size(); ++i) fb.dropped_ += modes[i].lambda;
        modes.resize(p.modes);
    }
    fb.modes_ = std::move(modes);
    return fb;
}

double FourierBasis::theta(int i, double x, double y) const {
    const auto& m = modes_[i];
    const double w = 2.0 * std::numbers::pi / params_.period;
    const double t = w * (m.kx * (x - cx_) + m.ky * (y - cy_));
    return m.sine ? std::sin(t) : std::cos(t);
}

FieldSample FieldSample::constant(double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("field: constant must be positive");
    FieldSample f;
    f.value_ = a;
    return f;
}

FieldSample FieldSample::fourier(std::shared_ptr<const FourierBasis> basis, std::vector<double> xi) {
    if (!basis) throw std::invalid_argument("field: null basis");
    if (static_cast<int>(xi.size()) != basis->size())
        throw std::invalid_argument("field: coefficient count does not match basis");
    FieldSample f;
    f.basis_ = std::move(basis);
    f.xi_ = std::move(xi);
    f.coef_.resize(f.xi_.size());
    for (std::size_t i = 0; i < f.xi_.size(); ++i)
        f.coef_[i] = f.xi_[i] * std::sqrt(f.basis_->modes()[i].lambda);
    return f;
}

FieldSample sample_field(std::shared_ptr<const FourierBasis> basis, std::vector<double> xi) {
    return FieldSample::fourier(std::move(basis), std::move(xi));
}

double FieldSample::log_value(double x, double y) const {
    if (!basis_) return std::log(value_);
    double s = 0.0;
    for (int i = 0; i < basis_->size(); ++i) s += coef_[i] * basis_->theta(i, x, y);
    return s;
}

double FieldSample::operator()(double x, double y) const {
    return basis_ ? std::exp(log_value(x, y)) : value_;
}

void FieldSample::evaluate(const PointSet& pts, std::span<double> out) const {
    if (out.size() != pts.size()) throw std::invalid_argument("field: output size mismatch");
    if (!basis_) {
        std::fill(out.begin(), out.end(), value_);
        return;
    }
    // log a = sum_g cos(kx_g s) A_g(y) + sin(kx_g s) B_g(y), grouping modes
    // by their x-frequency.
    const auto& modes = basis_->modes();
    const double w = 2.0 * std::numbers::pi / basis_->period();
    int kxmax = 0, kymax = 0;
    for (const auto& m : modes) {
        kxmax = std::max(kxmax, m.kx);
        kymax = std::max(kymax, std::abs(m.ky));
    }
    std::vector<int> group_of_kx(kxmax + 1, -1), group_kx;
    for (const auto& m : modes)
        if (group_of_kx[m.kx] < 0) {
            group_of_kx[m.kx] = static_cast<int>(group_kx.size());
            group_kx.push_back(m.kx);
        }
    const int G = static_cast<int>(group_kx.size());
    const std::size_t nx = pts.xs.size(), ny = pts.ys.size();

    std::vector<std::complex<double>> ph(std::max(kxmax, kymax) + 1);
    std::vector<double> AB(ny * 2 * G, 0.0);
    for (std::size_t iy = 0; iy < ny; ++iy) {
        phase_table(w * (pts.ys[iy] - basis_->center_y()), kymax, ph.data());
        double* A = &AB[iy * 2 * G];
        double* B = A + G;
        for (std::size_t i = 0; i < modes.size(); ++i) {
            const auto& m = modes[i];
            const double cb = ph[std::abs(m.ky)].real();
            const double sb = m.ky < 0 ? -ph[-m.ky].imag() : ph[m.ky].imag();
            const int g = group_of_kx[m.kx];
            if (m.sine) {
                A[g] += coef_[i] * sb;
                B[g] += coef_[i] * cb;
            } else {
                A[g] += coef_[i] * cb;
                B[g] -= coef_[i] * sb;
            }
        }
    }
    std::vector<double> CS(nx * 2 * G);
    for (std::size_t ix = 0; ix < nx; ++ix) {
        phase_table(w * (pts.xs[ix] - basis_->center_x()), kxmax, ph.data());
        for (int g = 0; g < G; ++g) {
            CS[ix * 2 * G + g] = ph[group_kx[g]].real();
            CS[ix * 2 * G + G + g] = ph[group_kx[g]].imag();
        }
    }
    for (std::size_t p = 0; p < pts.size(); ++p) {
        const double* cs = &CS[pts.idx[p][0] * 2 * G];
        const double* ab = &AB[pts.idx[p][1] * 2 * G];
        double s = 0.0;
        for (int g = 0; g < G; ++g) s += cs[g] * ab[g] + cs[G + g] * ab[G + g];
        out[p] = std::exp(s);
    }
}

FieldModel::FieldModel(int example, double sigma2, const MaternParams& matern)
    : example_(example), sigma2_(sigma2) {
    if (example < 0 || example > 2) throw std::invalid_argument("unknown example id");
    if (example > 0 && !(sigma2 >= 0.0)) throw std::invalid_argument("sigma2 must be nonnegative");
    if (example == 2) {
        MaternParams p = matern;
        p.sigma2 = sigma2;
        basis_ = std::make_shared<FourierBasis>(FourierBasis::build(p, problem_domain()));
    }
}

FieldSample FieldModel::draw(std::uint64_t key) const {
    if (example_ == 0) return median();
    std::mt19937_64 rng(key);
    std::normal_distribution<double> normal;
    if (example_ == 1) return FieldSample::constant(std::exp(std::sqrt(sigma2_) * normal(rng)));
    std::vector<double> xi(basis_->size());
    for (double& v : xi) v = normal(rng);
    return FieldSample::fourier(basis_, std::move(xi));
}

FieldSample FieldModel::median() const {
    return FieldSample::constant(example_ == 0 ? std::exp(2.0) : 1.0);
}

std::string FieldModel::describe() const {
    std::ostringstream os;
    os << "example=" << example_;
    if (example_ == 0) os << " a=exp(2)";
    if (example_ == 1) os << " a=exp(sigma*Z) sigma2=" << sigma2_;
    if (example_ == 2) {
        const auto& p = basis_->params();
        os << " matern sigma2=" << sigma2_ << " nu=" << p.nu << " r=" << p.r << " modes=" << p.modes
           << " period=" << p.period << " grid=" << p.grid;
    }
    return os.str();
}

std::uint64_t sample_key(std::uint64_t seed, std::uint64_t scheme, std::uint64_t level,
                         std::uint64_t index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ scheme);
    h = splitmix64(h ^ level);
    return splitmix64(h ^ index);
}

}  // namespace amlmc
