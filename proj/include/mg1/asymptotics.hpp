#pragma once

#include "mg1/chain_spec.hpp"
#include "mg1/matrix_analytic.hpp"
#include "mg1/stationary.hpp"
#include "mg1/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mg1 {

/// Discrete distribution on Z+ held through its survivor function
/// Fbar(k) = P(X > k), with Fbar(-1) = 1.
struct TailModel {
    std::string name;
    std::function<double(long)> survivor;

    double fbar(long k) const { return k < 0 ? 1.0 : survivor(k); }
    double pmf(long k) const { return fbar(k - 1) - fbar(k); }

    static TailModel discrete_power(double beta);  // Fbar(k) = (1+k)^(-beta)
    static TailModel geometric(double ratio);      // Fbar(k) = ratio^k
    /// The chain's own integrated increment tail, Fbar(N) = oolA(N)/oolA(0).
    static TailModel integrated_a_tail(const ChainSpec& spec);
};

/// Positivity/monotonicity validation plus long-tail ratio evidence.
struct TailValidation {
    bool positive = false;
    bool nonincreasing = false;
    double worst_ratio_gap = 0.0;  // max |Fbar(k+1)/Fbar(k) - 1| over k >= k0
    int k0 = 0;
};

TailValidation validate_tail(const TailModel& f, long n_max);

/// r(k) = (1 - F*2(k)) / (1 - F(k)) by exact convolution, using the
/// cancellation-free form Fbar*2(k) = Fbar(k) + Sum_{l<=k} f(l) Fbar(k-l).
std::vector<double> subexponential_evidence(const TailModel& f, long n_max);

/// Empirical Assumption-5.5 constants: ratios oolA(N)e / Fbar(N) and
/// oolB(N)e / Fbar(N) over the grid, with a Richardson plateau estimate
/// from the last two grid points (error model ~ 1/N).
struct AsymptoticConstants {
    std::vector<int> grid;
    std::vector<ColVec> ratio_a, ratio_b;
    ColVec c_a, c_b;
    bool c_a_zero = false, c_b_zero = false;
    bool diverging = false;  // ratios growing: Assumption 5.5 violated
    bool violated = false;   // diverging, or both constants zero
};

AsymptoticConstants fit_constants(const ChainSpec& spec, const TailModel& f,
                                  const std::vector<int>& n_grid);

/// pibar(N)/Fbar(N) against the predicted limit
/// (pi(0) c_B + pibar(0) c_A) / (-sigma) * varpi.
struct TailRatioSeries {
    std::vector<int> grid;
    std::vector<RowVec> ratio;
    RowVec predicted;
};

TailRatioSeries masuyama_ratio(const ChainSpec& spec, const LevelVector& pi,
                               const TailModel& f,
                               const std::vector<int>& n_grid,
                               const AsymptoticConstants& consts);

/// pi^(N)(N)e / Fbar(N); expected to vanish. N = 1 entries are computed
/// but flagged for exclusion from trend judgement.
struct MaxLevelRatioSeries {
    std::vector<int> grid;
    std::vector<double> ratio;
    bool decreasing_last_half = false;
};

MaxLevelRatioSeries lemma53_ratio(const ChainSpec& spec, const TailModel& f,
                                  const std::vector<int>& n_grid);

/// Convergence table r_N(k) = (pi^(N)(k) - pi(k)) / (pibar(N)e pi(k)).
struct StudyCell {
    int n = 0, k = 0, phase = 0;
    double r = 0.0;
    double pi_tail = 0.0;  // pibar(N)e
    double fbar = 0.0;
    bool excluded = false;  // pi(k,phase) below 1e-13
};

struct ConvergenceStudy {
    std::vector<StudyCell> cells;
    bool assumptions_ok = true;
    std::string assumption_note;
    bool trend_pass = false;
    double worst_final_gap = 0.0;  // max |r_N(k)-1| at the largest N
    int trend_violations = 0;
};

/// Pass gate: per (k, phase), |r_N(k) - 1| decreasing over the last half
/// of the grid (one violation tolerated overall) and below final_gap_max
/// at the largest N. Runs regardless of the assumption flags; violations
/// are reported as context.
struct StudyOptions {
    double final_gap_max = 0.35;
    double denominator_floor = 1e-13;
};

ConvergenceStudy convergence_study(const ChainSpec& spec, const TailModel& f,
                                   const std::vector<int>& k_list,
                                   const std::vector<int>& n_grid,
                                   const StudyOptions& opts = {});

}  // namespace mg1
