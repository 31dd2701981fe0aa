#include "mg1/matrix_analytic.hpp"

#include "mg1/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace mg1 {

namespace {
constexpr int kChunk = 32;
}

Matrix block_power_sum_serial(const std::vector<Matrix>& blocks, const Matrix& g) {
    const Eigen::Index m = g.rows();
    Matrix acc = Matrix::Zero(blocks.empty() ? m : blocks[0].rows(), m);
    Matrix gpow = Matrix::Identity(m, m);
    for (size_t i = 0; i < blocks.size(); ++i) {
        if (i > 0) gpow = gpow * g;
        acc += blocks[i] * gpow;
    }
    return acc;
}

Matrix block_power_sum_chunked(const std::vector<Matrix>& blocks, const Matrix& g) {
    const Eigen::Index m = g.rows();
    const Eigen::Index rows = blocks.empty() ? m : blocks[0].rows();
    const size_t n = blocks.size();
    const size_t nchunks = (n + kChunk - 1) / kChunk;
    if (nchunks <= 1) return block_power_sum_serial(blocks, g);

    // G^kChunk by repeated squaring, then chunk-start powers serially.
    Matrix gc = g;
    for (int s = 1; s < kChunk; s *= 2) gc = gc * gc;
    std::vector<Matrix> start(nchunks);
    start[0] = Matrix::Identity(m, m);
    for (size_t c = 1; c < nchunks; ++c) start[c] = start[c - 1] * gc;

    std::vector<Matrix> partial(nchunks);
    detail::parallel_for(nchunks, [&](size_t c) {
        Matrix acc = Matrix::Zero(rows, m);
        Matrix gpow = start[c];
        const size_t lo = c * kChunk;
        const size_t hi = std::min(n, lo + kChunk);
        for (size_t i = lo; i < hi; ++i) {
            if (i > lo) gpow = gpow * g;
            acc += blocks[i] * gpow;
        }
        partial[c] = std::move(acc);
    });
    Matrix acc = Matrix::Zero(rows, m);
    for (size_t c = 0; c < nchunks; ++c) acc += partial[c];
    return acc;
}

namespace {

// Explicit A-blocks A(-1)..A(M) with M covering all but tol of the mass.
std::vector<Matrix> a_block_list(const ChainSpec& spec, double tol) {
    const int m = spec.a_support(tol);
    std::vector<Matrix> blocks;
    blocks.reserve(m + 2);
    for (int k = -1; k <= m; ++k) blocks.push_back(spec.a(k));
    return blocks;
}

}  // namespace

MatanSolution solve_matan(const ChainSpec& spec, const MatanOptions& opts) {
    if (opts.require_negative_drift) {
        const double sigma = spec.sigma();
        if (!(sigma < 0.0)) {
            std::ostringstream os;
            os << "solve_matan: mean drift sigma = " << sigma << " is not negative";
            throw ValidationError(os.str());
        }
    }
    const int m1 = spec.m1();
    auto blocks = a_block_list(spec, opts.tol * 0.1);

    MatanSolution sol;
    sol.truncation_m = static_cast<int>(blocks.size()) - 2;
    Matrix g = Matrix::Zero(m1, m1);
    double change = 0.0;
    long it = 0;
    for (; it < opts.max_iter; ++it) {
        // Sum_m A(m) G^{m+1}: blocks[i] = A(i-1) pairs with G^i.
        Matrix next = block_power_sum_chunked(blocks, g);
        change = max_abs(next - g);
        g = std::move(next);
        if (change < opts.tol) break;
    }
    if (change >= opts.tol) {
        std::ostringstream os;
        os << "solve_matan: no convergence after " << opts.max_iter
           << " iterations (last change " << change << ")";
        throw ConvergenceError(os.str(), change);
    }
    sol.iterations = it + 1;
    sol.final_residual = change;
    sol.g = g;
    sol.fixed_point_residual = max_abs(block_power_sum_chunked(blocks, g) - g);
    sol.g_vec = stationary_of_g(g);

    // Phi(0) = Sum_{m>=0} A(m) G^m: drop A(-1), pair blocks[1+j] with G^j.
    std::vector<Matrix> tail_blocks(blocks.begin() + 1, blocks.end());
    sol.phi0 = block_power_sum_chunked(tail_blocks, g);
    sol.phi0_spectral_radius =
        Eigen::EigenSolver<Matrix>(sol.phi0).eigenvalues().cwiseAbs().maxCoeff();
    Matrix i_minus = Matrix::Identity(m1, m1) - sol.phi0;
    Eigen::PartialPivLU<Matrix> lu(i_minus);
    sol.phi0_inv = lu.solve(Matrix::Identity(m1, m1));
    const double cond = inf_norm(i_minus) * inf_norm(sol.phi0_inv);
    sol.phi0_ill_conditioned = cond > 1e12;
    return sol;
}

RowVec stationary_of_g(const Matrix& g) {
    auto classes = closed_classes(g);
    if (classes.size() != 1)
        throw ValidationError("stationary_of_g: G has " +
                              std::to_string(classes.size()) +
                              " closed communicating classes");
    return gth_stationary(g);
}

Matrix phi0_of(const ChainSpec& spec, const Matrix& g) {
    auto blocks = a_block_list(spec, 1e-14);
    std::vector<Matrix> tail_blocks(blocks.begin() + 1, blocks.end());
    return block_power_sum_chunked(tail_blocks, g);
}

namespace {

// Downward recursion S(k) = X(k) + S(k+1) G, seeded with the exact block
// tail at the truncation point. The seed replaces Sum_{m>M} X(m) G^{m-M}
// by Xbar(M); both have the same row sums, so the per-entry error is
// below the seed's row-sum norm, kept under tol by choice of M.
std::vector<Matrix> weighted_tail(const ChainSpec& spec, bool use_b,
                                  const Matrix& g, int kmax, double tol) {
    if (kmax < 1) throw ValidationError("weighted tail family needs kmax >= 1");
    int m = use_b ? spec.b_support(tol) : spec.a_support(tol);
    if (m < kmax) m = kmax;
    std::vector<Matrix> fam(kmax);
    Matrix s = use_b ? spec.tail_b(m) : spec.tail_a(m);
    for (int k = m; k >= 1; --k) {
        s = (use_b ? spec.b(k) : spec.a(k)) + s * g;
        if (k <= kmax) fam[k - 1] = s;
    }
    return fam;
}

}  // namespace

std::vector<Matrix> g_weighted_tail_a(const ChainSpec& spec, const Matrix& g,
                                      int kmax, double tol) {
    return weighted_tail(spec, false, g, kmax, tol);
}

std::vector<Matrix> g_weighted_tail_b(const ChainSpec& spec, const Matrix& g,
                                      int kmax, double tol) {
    return weighted_tail(spec, true, g, kmax, tol);
}

RFamily r_matrices(const ChainSpec& spec, const MatanSolution& sol, int kmax) {
    if (kmax < 1) throw ValidationError("r_matrices: kmax must be >= 1");
    const double tol = 1e-13;
    RFamily rf;
    rf.truncation_error = tol * inf_norm(sol.phi0_inv);
    auto sa = g_weighted_tail_a(spec, sol.g, kmax, tol);
    auto sb = g_weighted_tail_b(spec, sol.g, kmax, tol);
    rf.r.reserve(kmax);
    rf.r0.reserve(kmax);
    for (int k = 1; k <= kmax; ++k) {
        rf.r.push_back(sa[k - 1] * sol.phi0_inv);
        rf.r0.push_back(sb[k - 1] * sol.phi0_inv);
    }
    return rf;
}

FPlusWindow f_plus_window(const ChainSpec& spec, const MatanSolution& sol,
                          const RFamily& rf, int w) {
    (void)spec;
    if (w < 1) throw ValidationError("f_plus_window: W must be >= 1");
    if (static_cast<int>(rf.r.size()) < w - 1)
        throw ValidationError("f_plus_window: R family too short for W");
    FPlusWindow fp;
    fp.w = w;
    fp.blocks.assign(static_cast<size_t>(w) * w, Matrix());
    auto set = [&](int k, int l, Matrix m) {
        fp.blocks[(k - 1) * static_cast<size_t>(w) + (l - 1)] = std::move(m);
    };
    for (int k = 1; k <= w; ++k) {
        for (int l = 1; l <= w; ++l) {
            if (l < k) {
                set(k, l, sol.g * fp.at(k - 1, l));
            } else if (l == k) {
                Matrix v = sol.phi0_inv;
                if (k > 1) v += sol.g * fp.at(k - 1, k);
                set(k, l, std::move(v));
            } else {
                Matrix acc = Matrix::Zero(fp.at(k, 1).rows(), fp.at(k, 1).cols());
                for (int n = 1; n <= l - 1; ++n)
                    acc += fp.at(k, n) * rf.r[l - n - 1];
                set(k, l, std::move(acc));
            }
        }
    }
    return fp;
}

Matrix f_plus_k1(const MatanSolution& sol, int k) {
    if (k < 1) throw ValidationError("f_plus_k1: k must be >= 1");
    Matrix gpow = Matrix::Identity(sol.g.rows(), sol.g.cols());
    for (int i = 1; i < k; ++i) gpow = gpow * sol.g;
    return gpow * sol.phi0_inv;
}

}  // namespace mg1
