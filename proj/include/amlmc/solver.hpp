#pragma once

#include <vector>

#include "amlmc/fem.hpp"

namespace amlmc {

struct SolveReport {
    std::vector<double> u, phi;
    int iterations_primal = 0;
    int iterations_dual = 0;
    double goal_residual_primal = 0.0;  // |(r_p, phi)| at the returned iterates
    double goal_residual_dual = 0.0;    // |(r_d, u)| at the returned iterates
    double work = 0.0;
};

struct ReferenceSolve {
    std::vector<double> x;
    int iterations = 0;
    double relative_residual = 0.0;
    double work = 0.0;
};

// Jacobi-preconditioned CG to ||b - Ax|| <= rel_tol ||b||.
ReferenceSolve solve_reference(const CsrMatrix& A, const std::vector<double>& b,
                               double rel_tol = 1e-12);

// Primal and dual PCG in lockstep with goal-oriented stopping. Each solver
// pauses while its residual weighted by the partner's current iterate is
// below tol_iter; the call returns once both tests hold at the same time.
SolveReport solve_primal_dual(const CsrMatrix& Ap, const std::vector<double>& bp,
                              const CsrMatrix& Ad, const std::vector<double>& bd,
                              double tol_iter);

int iteration_cap(int n);

}  // namespace amlmc
