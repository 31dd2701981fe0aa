#pragma once

#include "mg1/chain_spec.hpp"
#include "mg1/map_queue.hpp"
#include "mg1/stationary.hpp"
#include "mg1/types.hpp"

#include <cstdint>
#include <vector>

namespace mg1 {
namespace oracle {

/// Brute-force verifiers, deliberately independent of the production
/// solvers: plain dense linear algebra and simulation only.

/// Naive stationary solve of x(P - I) = 0, xe = 1 by LU (with
/// subtractions; cross-checks the GTH path).
RowVec lu_stationary(const Matrix& p);

/// Mean first-passage times to level 0 on the chain truncated at
/// trunc_level with last-column reflection: solves u = e + P u on
/// levels >= 1, then u(0) = e + Sum_m B(m) u(m). The reflection bias is
/// bounded by hit-probability times passage scale and reported.
struct FirstPassage {
    std::vector<ColVec> u;       // u[k], k = 0..trunc_level
    double reflect_bound = 0.0;  // bias bound on levels <= trunc/2
};

FirstPassage first_passage_solve(const ChainSpec& spec, int trunc_level);

/// Fundamental deviation matrix from its occupation/first-return
/// definition on the truncated chain, reference state (0, ref_phase):
/// H(s;t) = E_s[visits to t before T_ref] - pi(t) E_s[T_ref].
struct DefinitionalH {
    int window = 0;
    int trunc = 0;
    LevelVector pi;              // truncated-chain stationary vector
    std::vector<Matrix> blocks;  // (k,l) in [0,window]^2, row-major
    const Matrix& at(int k, int l) const { return blocks[k * (window + 1) + l]; }
    /// max residual of (I-P)H = I - e pi on interior rows
    double poisson_residual = 0.0;
};

DefinitionalH h_definitional(const ChainSpec& spec, int trunc_level,
                             int ref_phase, int window);

/// Discrete-event MAP/G/1/N+1 simulation (capacity N+1, FCFS). Fixed
/// chunk layout; identical results for any thread count and seed.
struct McLoss {
    double estimate = 0.0;
    double std_error = 0.0;  // binomial s.e. with a rule-of-three floor
    long lost = 0;
    long arrivals = 0;
};

McLoss mc_queue(const MapSpec& map, const ServiceDist& svc, int n,
                long arrivals, std::uint64_t seed);

/// Monte Carlo occupation estimate of R(k): expected visits to level
/// n+k before the level first drops below n+k, starting at level n in
/// phase i (level-homogeneous dynamics).
struct McOccupation {
    Matrix estimate;   // (i,j)
    Matrix std_error;
    long paths = 0;
};

McOccupation r_occupation(const ChainSpec& spec, int k, long paths,
                          std::uint64_t seed);

/// Partial sums Sum_{n<=n_used} (P^n - e pi), with early stop once the
/// increment is negligible and a Cesaro average when the powers
/// oscillate (periodic pattern).
struct PowerSums {
    Matrix d;
    long n_used = 0;
    bool cesaro = false;
    double last_increment = 0.0;
};

PowerSums power_partial_sums(const Matrix& p, const RowVec& pi, long n_max);

}  // namespace oracle
}  // namespace mg1
