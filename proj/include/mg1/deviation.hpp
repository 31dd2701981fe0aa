#pragma once

#include "mg1/chain_spec.hpp"
#include "mg1/matrix_analytic.hpp"
#include "mg1/passage.hpp"
#include "mg1/stationary.hpp"
#include "mg1/types.hpp"

#include <vector>

namespace mg1 {

/// Shared machinery for the blocks H(k;l) of the solution of
/// (I - P) H = I - e pi built from the censored level-0 chain:
///
///   (I - P0~) H(0;l) = RHS(l),
///   H(k;l) = (1-d_{0,l}) F_+(k;l) + G^{k-1}(I-Phi(0))^{-1} B(-1) H(0;l)
///            - u(k) pi(l),                                   k >= 1,
///
/// where the singular boundary systems are solved through the
/// nonsingular regularization (I - P0~ + e pi0~), which picks the
/// particular solution with pi0~ H(0;l) = 0. Any solution differing by
/// a constant row works for the difference formula.
class DeviationContext {
public:
    DeviationContext(ChainSpec spec, MatanSolution sol, PassageVectors pv,
                     LevelVector pi, int l_max);

    const ChainSpec& spec() const { return spec_; }
    const MatanSolution& sol() const { return sol_; }
    const LevelVector& pi() const { return pi_; }
    const CensoredBoundary& censored() const { return censored_; }
    int l_max() const { return l_max_; }
    double sigma() const { return sigma_; }

    const Matrix& h0(int l) const;        // H(0;l)
    double solvability(int l) const;      // |pi0~ RHS(l)| certificate
    ColVec u(int k) const;

    /// H(k;l), k >= 1, l <= l_max. Theorem-4.1 assembly, never an
    /// asymptotic extrapolation.
    Matrix h_block(int k, int l) const;
    /// E(k;l) with H(k;l) = -(k/-sigma) e pi(l) + E(k;l); k >= max(l,1).
    Matrix e_block(int k, int l) const;

    /// Precompute G^0..G^kmax so h_block/e_block may run concurrently.
    void ensure_powers(int kmax);
    const Matrix& gpow(int k) const { return gpow_[k]; }

private:
    Matrix f_plus(int k, int l) const;  // l in [1, l_max], any k >= 1

    ChainSpec spec_;
    MatanSolution sol_;
    PassageVectors pv_;
    LevelVector pi_;
    CensoredBoundary censored_;
    int l_max_ = 0;
    double sigma_ = 0.0;
    FPlusWindow fplus_;
    std::vector<Matrix> h0_;          // l = 0..l_max
    std::vector<double> solvability_;
    std::vector<Matrix> t_;           // phi0_inv B(-1) H(0;l)
    std::vector<Matrix> gpow_;
    ColVec resolvent_e_;
};

/// Materialized (K,L) window of H- and E-blocks, with the empirical
/// bound Chat_E(l) = max_k |E(k;l)| and its drift over the last quarter
/// of the k-range (stabilization evidence for the boundedness of E).
struct DeviationWindow {
    int k_max = 0, l_max = 0;
    std::vector<Matrix> h0;  // H(0;l)
    std::vector<Matrix> h;   // (k-1)*(l_max+1)+l, k in [1,k_max]
    std::vector<Matrix> e;   // same layout; empty below the k >= l diagonal
    double decomposition_residual = 0.0;  // h vs -(k/-sigma) e pi + e
    std::vector<double> ce;
    std::vector<double> ce_drift;

    const Matrix& h_at(int k, int l) const { return h[(k - 1) * (l_max + 1) + l]; }
    const Matrix& e_at(int k, int l) const { return e[(k - 1) * (l_max + 1) + l]; }
};

/// Cells are independent; assembled in parallel, deterministically.
DeviationWindow build_deviation_window(DeviationContext& ctx, int k_max);

/// Max-abs residual of (I - P) H = I - e pi over all rows whose
/// neglected column mass (beyond the explicit K blocks) is provably
/// below row_tol. Throws WindowError naming the needed K when no row
/// qualifies.
struct PoissonCheck {
    double max_residual = 0.0;
    int rows_checked = 0;
    int max_row_level = -1;
    double neglected_bound = 0.0;
};

PoissonCheck poisson_residual(DeviationContext& ctx, int k_max, int l_max,
                              double row_tol = 1e-10);

/// Difference formula pi^(N) - pi = pi^(N) (P^(N) - P) H, checked
/// columnwise for column levels <= l_max. The level sum over n > N is
/// truncated once its remainder bound (from |E| <= C_E) is below tol/10;
/// n_cap bounds that truncation level.
struct DiffFormulaCheck {
    double max_error = 0.0;
    int n_trunc = 0;
    double remainder_bound = 0.0;
};

DiffFormulaCheck difference_formula_check(DeviationContext& ctx,
                                          const FiniteChainSpec& fspec,
                                          const LevelVector& pi_n, int l_max,
                                          double tol = 1e-9, int n_cap = 100000);

/// Split of pi^(N)(k) - pi(k) into the drift main term
///   (1/-sigma)[pi^(N)(0) oolB(N-1)e + Sum_l pi^(N)(l) oolA(N-l-1)e] pi(k)
/// and the E-block correction phi^(N)(k); k <= N-1.
struct DiffDecomposition {
    RowVec main;
    RowVec phi;
    RowVec actual;             // pi^(N)(k) - pi(k)
    double identity_error = 0.0;
    int n_trunc = 0;
};

DiffDecomposition difference_decomposition(DeviationContext& ctx,
                                           const FiniteChainSpec& fspec,
                                           const LevelVector& pi_n, int k,
                                           int n_cap = 100000);

/// D = (I - e pi) H on the window: D(k;l) = H(k;l) - e [pi H](l) with
/// the k' > K tail of pi H supplied by the affine decomposition using
/// the last explicit E-block as plateau. The per-column error bound of
/// that tail correction is reported, never silently absorbed.
struct DWindow {
    int k_max = 0, l_max = 0;
    std::vector<Matrix> d0;  // D(0;l)
    std::vector<Matrix> d;   // (k-1)*(l_max+1)+l
    std::vector<RowVec> pi_h;         // [pi H](l)
    std::vector<double> tail_error;   // bound on the pi H tail correction
    bool aperiodic_window = true;     // pattern check, window-limited

    const Matrix& d_at(int k, int l) const { return d[(k - 1) * (l_max + 1) + l]; }
};

DWindow deviation_d_window(DeviationContext& ctx, const DeviationWindow& win);

}  // namespace mg1
