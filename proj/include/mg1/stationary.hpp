#pragma once

#include "mg1/chain_spec.hpp"
#include "mg1/matrix_analytic.hpp"
#include "mg1/types.hpp"

#include <vector>

namespace mg1 {

/// Level-indexed row-vector family (stationary distributions, tails).
struct LevelVector {
    RowVec v0;                    // level 0 (length m0)
    std::vector<RowVec> levels;   // levels 1..trunc (length m1)
    double tail_bound = 0.0;      // bound on mass beyond trunc
    bool normalized = false;

    int trunc() const { return static_cast<int>(levels.size()); }
    /// pi(k); zero row beyond the truncation level.
    RowVec at(int k) const;
    double mass() const;
    /// pibar(n)e = 1 - Sum_{l<=n} pi(l)e (complement form).
    double tail_mass(int n) const;
    /// pibar(n) = Sum_{l>n} pi(l) over stored levels.
    RowVec tail_vector(int n) const;
};

/// Level-0 censored chain: P0~ = B(0) + Sum_{m>=1} B(m) F_+(m;1) B(-1),
/// and its stationary vector pi0~ = pi(0)/pi(0)e.
struct CensoredBoundary {
    Matrix p0;
    RowVec pi0_tilde;
    double stochastic_residual = 0.0;
};

CensoredBoundary boundary_pi0(const ChainSpec& spec, const MatanSolution& sol);

struct InfiniteOptions {
    double mass_tol = 1e-12;
    int max_levels = 50000;
};

/// Stationary distribution of the infinite-level chain: censored
/// boundary seed, then the level recursion
///   pi(k) = pi(0) R0(k) + Sum_{l=1}^{k-1} pi(l) R(k-l),
/// extended until the tail-envelope bound drops below mass_tol, then
/// normalized. The returned vector carries the truncation level and the
/// (normalized) tail bound.
LevelVector solve_infinite(const ChainSpec& spec, const MatanSolution& sol,
                           const InfiniteOptions& opts = {});

/// Exact stationary vector of the finite-level chain by GTH elimination.
LevelVector solve_finite(const FiniteChainSpec& fspec);

/// max_k<=L || (pi P)(k) - pi(k) ||_inf, computable rows only.
double stationarity_residual(const ChainSpec& spec, const LevelVector& pi,
                             int max_level);

/// Partial sums Sum_{k<=n} k pi(k)e with a Cauchy convergence flag
/// (increments below 1e-10 over 10 consecutive levels).
struct MomentDiagnostic {
    std::vector<double> partial;
    bool converged = false;
    double value = 0.0;
};

MomentDiagnostic mean_level_diagnostic(const LevelVector& pi);

}  // namespace mg1
