#include "mg1/stationary.hpp"

#include "mg1/gth.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace mg1 {

RowVec LevelVector::at(int k) const {
    if (k < 0) throw ValidationError("LevelVector::at: negative level");
    if (k == 0) return v0;
    if (k <= trunc()) return levels[k - 1];
    return RowVec::Zero(levels.empty() ? v0.size() : levels[0].size());
}

double LevelVector::mass() const {
    double s = v0.sum();
    for (const auto& v : levels) s += v.sum();
    return s;
}

double LevelVector::tail_mass(int n) const {
    double head = n >= 0 ? v0.sum() : 0.0;
    for (int k = 1; k <= n && k <= trunc(); ++k) head += levels[k - 1].sum();
    return 1.0 - head;
}

RowVec LevelVector::tail_vector(int n) const {
    RowVec acc = RowVec::Zero(levels.empty() ? v0.size() : levels[0].size());
    for (int k = std::max(1, n + 1); k <= trunc(); ++k) acc += levels[k - 1];
    return acc;
}

CensoredBoundary boundary_pi0(const ChainSpec& spec, const MatanSolution& sol) {
    CensoredBoundary cb;
    auto sb = g_weighted_tail_b(spec, sol.g, 1);
    cb.p0 = spec.b(0) + sb[0] * sol.phi0_inv * spec.b(-1);
    cb.stochastic_residual =
        (cb.p0 * ones(spec.m0()) - ones(spec.m0())).cwiseAbs().maxCoeff();
    if (cb.stochastic_residual > 1e-9) {
        std::ostringstream os;
        os << "censored level-0 matrix is not stochastic (residual "
           << cb.stochastic_residual << ")";
        throw Error(os.str());
    }
    cb.pi0_tilde = gth_stationary(cb.p0);
    return cb;
}

namespace {

bool heavy_tailed(const ChainSpec& spec) {
    if (auto* at = std::get_if<AnalyticTail>(&spec.tail_form()))
        return at->weight == TailWeight::PowerLaw;
    return false;
}

}  // namespace

LevelVector solve_infinite(const ChainSpec& spec, const MatanSolution& sol,
                           const InfiniteOptions& opts) {
    auto boundary = boundary_pi0(spec, sol);
    const bool heavy = heavy_tailed(spec);

    LevelVector pi;
    pi.v0 = boundary.pi0_tilde;

    const double eta_r1 =
        Eigen::EigenSolver<Matrix>(r_matrices(spec, sol, 1).r[0])
            .eigenvalues()
            .cwiseAbs()
            .maxCoeff();

    int kmax = 64;
    RFamily rf = r_matrices(spec, sol, kmax);
    double bound = 1.0;
    int stall = 0;
    for (int k = 1; k <= opts.max_levels; ++k) {
        if (k > kmax) {
            kmax *= 2;
            rf = r_matrices(spec, sol, kmax);
        }
        RowVec x = pi.v0 * rf.r0[k - 1];
        for (int l = 1; l <= k - 1; ++l) x += pi.levels[l - 1] * rf.r[k - l - 1];
        pi.levels.push_back(std::move(x));

        const double sk = pi.levels.back().sum();
        if (heavy) {
            // envelope pi(j) <= C * ||Abar(j-1)|| for j past the head
            double c_env = 0.0;
            for (int j = std::max(1, k - 9); j <= k; ++j) {
                double phi = inf_norm(spec.tail_a(j - 2));
                if (phi > 0.0) c_env = std::max(c_env, pi.levels[j - 1].sum() / phi);
            }
            bound = 2.0 * c_env * inf_norm(spec.double_tail_a(k - 2));
        } else {
            double ratio = eta_r1;
            if (k >= 2) {
                const double prev = pi.levels[k - 2].sum();
                if (prev > 0.0) ratio = std::max(ratio, sk / prev);
            }
            if (ratio >= 1.0) {
                if (++stall > 100)
                    throw ConvergenceError(
                        "solve_infinite: level mass is not contracting (sigma >= 0 leak?)",
                        ratio);
                continue;
            }
            stall = 0;
            bound = sk * ratio / (1.0 - ratio);
        }
        if (k >= 8 && bound < opts.mass_tol) break;
    }
    const double total = pi.mass();
    pi.v0 /= total;
    for (auto& v : pi.levels) v /= total;
    pi.tail_bound = bound / total;
    pi.normalized = true;
    return pi;
}

LevelVector solve_finite(const FiniteChainSpec& fspec) {
    const Matrix p = fspec.assemble();
    const double res = (p * ColVec::Ones(p.rows()) - ColVec::Ones(p.rows()))
                           .cwiseAbs()
                           .maxCoeff();
    if (res > 1e-9)
        throw ValidationError("solve_finite: assembled P^(N) is not stochastic");
    RowVec x = gth_stationary(p);
    LevelVector pi;
    const int m0 = fspec.base.m0(), m1 = fspec.base.m1();
    pi.v0 = x.head(m0);
    pi.levels.reserve(fspec.n);
    for (int k = 1; k <= fspec.n; ++k)
        pi.levels.push_back(x.segment(fspec.level_offset(k), m1));
    pi.tail_bound = 0.0;
    pi.normalized = true;
    return pi;
}

double stationarity_residual(const ChainSpec& spec, const LevelVector& pi,
                             int max_level) {
    double worst = 0.0;
    for (int l = 0; l <= max_level; ++l) {
        RowVec acc;
        if (l == 0) {
            acc = pi.v0 * spec.b(0);
            acc += pi.at(1) * spec.b(-1);
        } else {
            acc = pi.v0 * spec.b(l);
            for (int k = 1; k <= std::min(pi.trunc(), l + 1); ++k)
                if (l - k >= -1) acc += pi.at(k) * spec.a(l - k);
        }
        worst = std::max(worst, (acc - pi.at(l)).cwiseAbs().maxCoeff());
    }
    return worst;
}

MomentDiagnostic mean_level_diagnostic(const LevelVector& pi) {
    MomentDiagnostic d;
    d.partial.reserve(pi.trunc());
    double acc = 0.0;
    for (int k = 1; k <= pi.trunc(); ++k) {
        acc += k * pi.levels[k - 1].sum();
        d.partial.push_back(acc);
    }
    const int n = static_cast<int>(d.partial.size());
    if (n > 10) {
        d.converged = d.partial[n - 1] - d.partial[n - 11] < 1e-10;
        d.value = d.partial[n - 1];
    }
    return d;
}

}  // namespace mg1
