#pragma once

#include "mg1/chain_spec.hpp"
#include "mg1/matrix_analytic.hpp"
#include "mg1/stationary.hpp"
#include "mg1/types.hpp"

#include <vector>

namespace mg1 {

/// Solution a of (I - A)x = -sigma e + beta_A together with the drift
/// vectors built from it:
///   v(k)  = (k^2 e + 2k a) / (-sigma),  v(0)  = 0
///   f(k)  = (k+1) e,                    f(0)  = e
///   v'(k) = (k e + a) / |sigma|,        v'(0) = 0
struct DriftBundle {
    ColVec a;
    double c = 0.0;      // shift applied so that a > 0
    double sigma = 0.0;
    RowVec varpi;
    double poisson_residual = 0.0;

    ColVec v(int k, int m0) const;
    ColVec f(int k, int m0) const;
    ColVec vprime(int k, int m0) const;
};

/// a = (I - A + e varpi)^{-1} beta_A + c e with the smallest integer
/// shift c >= 1 making a strictly positive.
DriftBundle solve_a(const ChainSpec& spec);

/// Negative-drift certificate P v <= v - f + b 1_{level<=K}. The margin
/// P v - v + f is evaluated exactly per level; beyond level 1 it is
/// affine in k with slope -e, so negativity at the scan cap persists.
struct DriftReport {
    int cap = 0;
    std::vector<ColVec> margin;  // margin[k], k = 0..cap
    int k_threshold = 0;         // smallest K with margin <= 0 beyond
    double b = 0.0;              // max positive excess at levels <= K
    bool certified = false;      // margin provably negative for k > cap
};

DriftReport drift_check_v(const ChainSpec& spec, const DriftBundle& bundle,
                          int level_cap);

/// Finite-level variant P^(N) v <= v - (1-eps) f + b 1_{level<=K}.
struct FiniteDriftReport {
    std::vector<int> n_grid;
    std::vector<bool> holds;
    int n_eps = -1;  // first grid N from which the bound holds
};

FiniteDriftReport drift_check_v_finite(const ChainSpec& spec,
                                       const DriftBundle& bundle,
                                       const std::vector<int>& n_grid,
                                       double eps, int k_threshold, double b);

/// v' variants: P v' = v' - e holds exactly for k >= 2; the report
/// carries the max deviation from that identity plus the constants.
struct DriftPrimeReport {
    int cap = 0;
    std::vector<ColVec> margin;  // P v' - v' + e per level
    int k_threshold = 0;
    double b = 0.0;
    double identity_residual = 0.0;  // max |margin(k)| over k >= 2
};

DriftPrimeReport drift_check_vprime(const ChainSpec& spec,
                                    const DriftBundle& bundle, int level_cap);

FiniteDriftReport drift_check_vprime_finite(const ChainSpec& spec,
                                            const DriftBundle& bundle,
                                            const std::vector<int>& n_grid,
                                            double eps, int k_threshold,
                                            double b);

/// Mean first-passage times to level 0: u(k,i) = E_(k,i)[T_0].
struct PassageVectors {
    std::vector<ColVec> u;  // u[k], k = 0..kmax
    Matrix resolvent;       // (I - A - beta_A g)^{-1}
    double sigma = 0.0;
};

/// u(k) = (I - G^k)(I - A - beta_A g)^{-1} e + k e / (-sigma) for k >= 1;
/// u(0) adds one boundary step through the B-blocks.
PassageVectors u_vectors(const ChainSpec& spec, const MatanSolution& sol,
                         int kmax);

/// Single u(k) without materializing the family.
ColVec u_vector(const PassageVectors& pv, const MatanSolution& sol, int k);

/// Partial sums Sum_{k<=n} pi(k) u(k) with a Cauchy convergence flag.
struct PiUDiagnostic {
    std::vector<double> partial;
    bool converged = false;
    double value = 0.0;
};

PiUDiagnostic pi_u_diagnostic(const LevelVector& pi, const PassageVectors& pv,
                              const MatanSolution& sol, int kmax);

}  // namespace mg1
