#pragma once

#include "mg1/chain_spec.hpp"
#include "mg1/stationary.hpp"
#include "mg1/types.hpp"

#include <string>

namespace mg1 {

/// Markovian arrival process (Lambda0, Lambda1): Lambda0 carries phase
/// transitions without arrivals (negative diagonal), Lambda1 the arrival
/// transitions; Lambda0 + Lambda1 is an irreducible generator.
struct MapSpec {
    Matrix lambda0, lambda1;

    MapSpec(Matrix l0, Matrix l1);  // validates the generator structure

    int m() const { return static_cast<int>(lambda0.rows()); }
    Matrix generator() const { return lambda0 + lambda1; }
    RowVec varpi() const;     // stationary vector of the generator
    double rate() const;      // mean arrival rate varpi Lambda1 e
};

struct ServiceDist {
    enum class Kind { Exponential, Deterministic, Pareto, PhaseType };
    Kind kind = Kind::Exponential;
    double mu = 1.0;      // Exponential
    double det = 1.0;     // Deterministic
    double shape = 2.5;   // Pareto (Lomax): P(S > x) = (1 + x/scale)^(-shape)
    double scale = 1.0;
    RowVec ph_alpha;      // PhaseType
    Matrix ph_t;

    static ServiceDist exponential(double mu);
    static ServiceDist deterministic(double b);
    static ServiceDist pareto(double shape, double scale);
    static ServiceDist phase_type(RowVec alpha, Matrix t);

    double mean() const;
    bool second_moment_finite() const;
    double survivor(double x) const;          // P(S > x)
    /// Integrated-tail (stationary-excess) survivor P(S_re > x); exact
    /// per kind, nonincreasing, 1 at x = 0.
    double equilibrium_tail(double x) const;
    bool equilibrium_subexponential() const;  // Condition on S_re
    bool sqrt_equilibrium_long_tailed() const;
    std::string describe() const;
};

/// Embedded queue-length chain at departures: A(k) = number of arrivals
/// during one service minus one, via uniformization of Lambda0 + z
/// Lambda1; boundary row through the idle period, B(k) =
/// (-Lambda0)^{-1} Lambda1 A(k-1) and B(-1) = A(-1). The block family
/// is truncated at k_max with the invisible remainder folded into the
/// last block, so every stored tail sum below k_max stays exact.
struct EmbeddedChain {
    ChainSpec spec;
    double rho = 0.0;
    double sigma = 0.0;
    double rho_identity_residual = 0.0;  // |varpi sum k A(k) e - (rho-1)|
    double fold_mass = 0.0;
    int k_max = 0;
};

EmbeddedChain embed_chain(const MapSpec& map, const ServiceDist& svc,
                          int k_max = -1, double tol = 1e-14);

/// Exact loss probability of the MAP/G/1/N+1 queue from the stationary
/// vector of the embedded finite-level chain.
double loss_exact(const MapSpec& map, const ServiceDist& svc,
                  const EmbeddedChain& embedded, int n);
double loss_exact(const MapSpec& map, const ServiceDist& svc, int n);

/// Heavy-tail asymptotic rho P(S_re > N/lambda) / (1 + rho P(S_re >
/// N/lambda)); requires a subexponential equilibrium service tail
/// (Pareto kind), otherwise throws InapplicableError.
double loss_asymptotic(const MapSpec& map, const ServiceDist& svc, int n);

/// Residual of 1/lambda = pi(0)(-Lambda0)^{-1} e + beta1 for the
/// infinite-capacity queue.
double lambda_identity(const MapSpec& map, const ServiceDist& svc,
                       const EmbeddedChain& embedded, const LevelVector& pi);

}  // namespace mg1
