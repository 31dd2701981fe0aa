#pragma once

#include "mg1/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mg1 {

/// Block family of an upper block-Hessenberg (M/G/1-type) chain:
///
///       | B(0)  B(1)  B(2)  B(3) ...
///       | B(-1) A(0)  A(1)  A(2) ...
///   P = |       A(-1) A(0)  A(1) ...
///       |             A(-1) A(0) ...
///
/// A(k) is m1 x m1 for k >= -1; B(-1) is m1 x m0, B(0) is m0 x m0 and
/// B(k) is m0 x m1 for k >= 1.

/// All blocks beyond the stored head are zero.
struct FiniteSupport {
    int k_a = 0;  // A(k) = O for k > k_a
    int k_b = 0;  // B(k) = O for k > k_b
};

enum class TailWeight { Geometric, PowerLaw };

/// Analytic continuation beyond an explicit head:
/// A(k) = a_coeff * w(k) for k >= a_start and B(k) = b_coeff * w(k) for
/// k >= b_start, with scalar weights w(k) = ratio^k or k^(-exponent).
/// Tail and moment sums over the weights are closed-form (geometric) or
/// Euler-Maclaurin partial sums (power law) with remainder below 1e-14,
/// so every tail evaluator below is exact at working precision.
struct AnalyticTail {
    TailWeight weight = TailWeight::Geometric;
    double param = 0.5;  // ratio in (0,1), or power-law exponent > 1
    int a_start = 0;     // must be >= 1 for PowerLaw
    Matrix a_coeff;      // m1 x m1
    int b_start = 1;     // >= 1
    Matrix b_coeff;      // m0 x m1

    double w(long k) const;
    double w_tail(long from) const;     // Sum_{l >= from} w(l)
    double w_tail_m1(long from) const;  // Sum_{l >= from} l w(l)
    double w_tail_m2(long from) const;  // Sum_{l >= from} l^2 w(l)
};

using TailForm = std::variant<FiniteSupport, AnalyticTail>;

struct ChainSpec {
    /// Validates shapes, nonnegativity and tail-form consistency; row-sum
    /// (stochasticity) checks are deferred to validate() so that broken
    /// inputs can still be constructed and diagnosed.
    ChainSpec(int m0, int m1, std::map<int, Matrix> a_head,
              std::map<int, Matrix> b_head, TailForm tail);

    int m0() const { return m0_; }
    int m1() const { return m1_; }
    const TailForm& tail_form() const { return tail_; }
    bool analytic() const;

    Matrix a(int k) const;  // k >= -1
    Matrix b(int k) const;  // k >= -1; note the k-dependent shape

    /// Abar(k) = Sum_{l>k} A(l), k >= -2.
    Matrix tail_a(int k) const;
    /// Bbar(k) = Sum_{l>k} B(l), k >= 0.
    Matrix tail_b(int k) const;
    /// AbarBar(n) = Sum_{m>n} Abar(m), n >= -1. Finite exactly when the
    /// first moments are (power-law exponent > 2); throws otherwise.
    Matrix double_tail_a(int n) const;
    /// Same for B; n >= -1.
    Matrix double_tail_b(int n) const;

    Matrix a_sum() const;            // A = Sum_{k>=-1} A(k)
    Matrix a_first_moment() const;   // Sum_{k>=-1} k A(k)
    ColVec beta_a() const { return a_first_moment() * ones(m1_); }
    ColVec a_second_moment_e() const;  // Sum k^2 A(k) e
    ColVec b_rowsum() const;           // Sum_{k>=0} B(k) e
    Matrix b_first_moment() const;     // Sum_{k>=1} k B(k)
    ColVec b_second_moment_e() const;  // Sum_{k>=1} k^2 B(k) e

    bool a_moment_finite(int order) const;  // order in {1,2}
    bool b_moment_finite(int order) const;

    /// Smallest M with ||Abar(M)||_inf < eps (resp. Bbar).
    int a_support(double eps) const;
    int b_support(double eps) const;

    double sigma() const;        // varpi * beta_A, varpi stationary of A
    RowVec varpi() const;

    double a_rowsum_residual() const;    // ||Sum A(k)e - e||_inf
    double b_rowsum_residual() const;
    double boundary_residual() const;    // ||B(-1)e - A(-1)e||_inf

private:
    int m0_, m1_;
    std::map<int, Matrix> a_head_, b_head_;
    TailForm tail_;
};

struct ValidationReport {
    bool ok = false;
    std::string detail;               // reject reason when !ok
    double a_rowsum_residual = 0.0;
    double b_rowsum_residual = 0.0;
    double boundary_residual = 0.0;
    double sigma = 0.0;
    RowVec varpi;
    bool a_irreducible = false;
    bool p_irreducible_window = false;
    int p_window_levels = 0;          // certificate is window-limited
    bool b_first_moment_finite = false;
    bool mean_drift_negative = false; // sigma < 0
};

/// Gates: row-sum residuals <= 1e-9 and A irreducible. Everything else
/// is reported, not gated; the P-irreducibility verdict carries an
/// explicit window-limited caveat (p_window_levels).
ValidationReport validate(const ChainSpec& spec);

enum class AugScheme { LastColumn, Custom };

/// The chain truncated at maximum level n with augmented last column:
/// A^(N)(k), k in [0, n-1], and B^(N)(n).
struct FiniteChainSpec {
    ChainSpec base;
    int n = 1;
    AugScheme scheme = AugScheme::LastColumn;
    std::vector<Matrix> aug_a;  // aug_a[k] = A^(N)(k), k = 0..n-1
    Matrix aug_b;               // B^(N)(n)

    int dim() const;            // m0 + n*m1
    int level_offset(int k) const;
    /// Dense row-stochastic P^(N).
    Matrix assemble() const;
};

/// LastColumn sets A^(N)(k) = Abar(k-1), B^(N)(n) = Bbar(n-1). Custom
/// blocks must satisfy the same row sums within 1e-9.
FiniteChainSpec build_finite(const ChainSpec& spec, int n,
                             AugScheme scheme = AugScheme::LastColumn,
                             const std::vector<Matrix>* custom_a = nullptr,
                             const Matrix* custom_b = nullptr);

/// Top-left (levels+1)-level block of the infinite P, plus the mass each
/// row loses to levels beyond the window.
struct PWindow {
    Matrix block;
    ColVec deficiency;
    int levels = 0;
};

PWindow assemble_p_window(const ChainSpec& spec, int levels);

}  // namespace mg1
