#pragma once

#include "mg1/chain_spec.hpp"
#include "mg1/types.hpp"

#include <vector>

namespace mg1 {

struct MatanOptions {
    double tol = 1e-12;
    long max_iter = 200000;
    bool require_negative_drift = true;
};

struct MatanSolution {
    Matrix g;                    // first-passage phase matrix G
    RowVec g_vec;                // stationary vector of G
    Matrix phi0;                 // taboo matrix Phi(0) = Sum A(m) G^m
    Matrix phi0_inv;             // (I - Phi(0))^{-1}
    long iterations = 0;
    double final_residual = 0.0;        // last iterate change
    double fixed_point_residual = 0.0;  // ||G - Sum A(m) G^{m+1}||_inf
    double phi0_spectral_radius = 0.0;
    int truncation_m = 0;               // m-sum truncation level
    bool phi0_ill_conditioned = false;  // condition estimate above 1e12
};

/// Kernels shared by the solver and the benchmark. Both compute
/// Sum_i blocks[i] * G^i; the chunked variant works on fixed 32-wide
/// chunks reduced in chunk order, so its result is independent of the
/// thread count. The serial variant is the reference implementation.
Matrix block_power_sum_serial(const std::vector<Matrix>& blocks, const Matrix& g);
Matrix block_power_sum_chunked(const std::vector<Matrix>& blocks, const Matrix& g);

/// Natural fixed-point iteration G_{n+1} = Sum_m A(m) G_n^{m+1} from
/// G_0 = O. Iterates are entrywise nondecreasing; stops when the change
/// drops below tol. Computes g, Phi(0) and (I - Phi(0))^{-1} as well.
MatanSolution solve_matan(const ChainSpec& spec, const MatanOptions& opts = {});

/// Stationary vector of a stochastic matrix with a unique closed class.
RowVec stationary_of_g(const Matrix& g);

Matrix phi0_of(const ChainSpec& spec, const Matrix& g);

/// S_A(k) = Sum_{m>=k} A(m) G^{m-k} for k = 1..kmax (downward
/// recursion S(k) = A(k) + S(k+1) G; per-entry truncation error < tol).
std::vector<Matrix> g_weighted_tail_a(const ChainSpec& spec, const Matrix& g,
                                      int kmax, double tol = 1e-13);
/// Same with B(m): S_B(k) = Sum_{m>=k} B(m) G^{m-k}.
std::vector<Matrix> g_weighted_tail_b(const ChainSpec& spec, const Matrix& g,
                                      int kmax, double tol = 1e-13);

struct RFamily {
    std::vector<Matrix> r;   // r[k-1]  = R(k)   = S_A(k) (I-Phi0)^{-1}
    std::vector<Matrix> r0;  // r0[k-1] = R_0(k) = S_B(k) (I-Phi0)^{-1}
    double truncation_error = 0.0;
};

RFamily r_matrices(const ChainSpec& spec, const MatanSolution& sol, int kmax);

/// Expected visits F_+(k;l) to level l before reaching level 0, starting
/// from level k, for (k,l) in [1,W]^2.
struct FPlusWindow {
    int w = 0;
    std::vector<Matrix> blocks;  // row-major (k-1)*w + (l-1)
    const Matrix& at(int k, int l) const { return blocks[(k - 1) * w + (l - 1)]; }
};

/// Blockwise recursion seeded by F_+(1;1) = (I - Phi(0))^{-1}:
///   l <  k: F_+(k;l) = G F_+(k-1;l)
///   l == k: F_+(k;k) = F_+(1;1) + G F_+(k-1;k)
///   l >  k: F_+(k;l) = Sum_{n<l} F_+(k;n) R(l-n)
FPlusWindow f_plus_window(const ChainSpec& spec, const MatanSolution& sol,
                          const RFamily& rf, int w);

/// Closed form F_+(k;1) = G^{k-1} (I - Phi(0))^{-1}.
Matrix f_plus_k1(const MatanSolution& sol, int k);

}  // namespace mg1
