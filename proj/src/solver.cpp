#include "amlmc/solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace amlmc {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct Pcg {
    const CsrMatrix& A;
    std::vector<double> x, r, z, p, q, dinv;
    double rz = 0.0;
    int it = 0;

    Pcg(const CsrMatrix& A_, const std::vector<double>& b) : A(A_) {
        const int n = A.n;
        if (static_cast<int>(b.size()) != n) throw std::invalid_argument("pcg: rhs size mismatch");
        dinv = A.diagonal();
        for (double& d : dinv) {
            if (!(d > 0.0)) throw std::runtime_error("pcg: nonpositive diagonal entry");
            d = 1.0 / d;
        }
        x.assign(n, 0.0);
        r = b;
        z.resize(n);
        for (int i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
        p = z;
        q.resize(n);
        rz = dot(r, z);
    }

    void step() {
        const int n = A.n;
        A.multiply(p.data(), q.data());
        const double pq = dot(p, q);
        if (!(pq > 0.0)) throw std::runtime_error("pcg: matrix not positive definite");
        const double alpha = rz / pq;
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            z[i] = dinv[i] * r[i];
        }
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        ++it;
    }
};

}  // namespace

int iteration_cap(int n) { return std::max(10, static_cast<int>(100.0 * std::sqrt(static_cast<double>(n)))); }

ReferenceSolve solve_reference(const CsrMatrix& A, const std::vector<double>& b, double rel_tol) {
    ReferenceSolve out;
    const double bnorm = std::sqrt(dot(b, b));
    if (A.n == 0 || bnorm == 0.0) {
        out.x.assign(A.n, 0.0);
        return out;
    }
    Pcg cg(A, b);
    const int cap = iteration_cap(A.n);
    double res = 1.0;
    while ((res = std::sqrt(dot(cg.r, cg.r)) / bnorm) > rel_tol) {
        if (cg.it >= cap)
            throw std::runtime_error("reference solve: no convergence within " + std::to_string(cap) +
                                     " iterations (relative residual " + std::to_string(res) + ")");
        cg.step();
    }
    // The recursive residual drifts; confirm with the true one.
    std::vector<double> ax(A.n);
    A.multiply(cg.x.data(), ax.data());
    double tr = 0.0;
    for (int i = 0; i < A.n; ++i) tr += (b[i] - ax[i]) * (b[i] - ax[i]);
    out.relative_residual = std::sqrt(tr) / bnorm;
    if (out.relative_residual > 10.0 * rel_tol) {
        // Restart once from the current iterate.
        std::vector<double> rr(A.n);
        for (int i = 0; i < A.n; ++i) rr[i] = b[i] - ax[i];
        auto corr = solve_reference(A, rr, rel_tol * bnorm / std::sqrt(tr));
        for (int i = 0; i < A.n; ++i) cg.x[i] += corr.x[i];
        out.iterations += corr.iterations;
        A.multiply(cg.x.data(), ax.data());
        tr = 0.0;
        for (int i = 0; i < A.n; ++i) tr += (b[i] - ax[i]) * (b[i] - ax[i]);
        out.relative_residual = std::sqrt(tr) / bnorm;
    }
    out.iterations += cg.it;
    out.x = std::move(cg.x);
    out.work = static_cast<double>(out.iterations) * static_cast<double>(A.nnz());
    return out;
}

SolveReport solve_primal_dual(const CsrMatrix& Ap, const std::vector<double>& bp,
                              const CsrMatrix& Ad, const std::vector<double>& bd,
                              double tol_iter) {
    if (!(tol_iter > 0.0)) throw std::invalid_argument("primal-dual: tol_iter must be positive");
    if (Ap.n != Ad.n) throw std::invalid_argument("primal-dual: dimension mismatch");
    SolveReport rep;
    if (Ap.n == 0) return rep;
    Pcg P(Ap, bp), D(Ad, bd);
    bool p_active = true, d_active = true;
    const int cap = iteration_cap(Ap.n);
    for (int k = 0; p_active || d_active; ++k) {
        if (k >= cap)
            throw std::runtime_error("primal-dual: iteration cap " + std::to_string(cap) + " exceeded");
        if (p_active) P.step();
        if (d_active) D.step();
        // A stopped solver resumes when the partner's newer iterate breaks its test.
        rep.goal_residual_primal = std::abs(dot(P.r, D.x));
        rep.goal_residual_dual = std::abs(dot(D.r, P.x));
        p_active = rep.goal_residual_primal >= tol_iter;
        d_active = rep.goal_residual_dual >= tol_iter;
    }
    rep.iterations_primal = P.it;
    rep.iterations_dual = D.it;
    rep.work = static_cast<double>(P.it) * Ap.nnz() + static_cast<double>(D.it) * Ad.nnz();
    rep.u = std::move(P.x);
    rep.phi = std::move(D.x);
    return rep;
}

}  // namespace amlmc
