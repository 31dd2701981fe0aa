#include "mg1/passage.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace mg1 {

ColVec DriftBundle::v(int k, int m0) const {
    if (k == 0) return ColVec::Zero(m0);
    return (static_cast<double>(k) * k * ones(a.size()) + 2.0 * k * a) / (-sigma);
}

ColVec DriftBundle::f(int k, int m0) const {
    if (k == 0) return ones(m0);
    return (k + 1.0) * ones(a.size());
}

ColVec DriftBundle::vprime(int k, int m0) const {
    if (k == 0) return ColVec::Zero(m0);
    return (static_cast<double>(k) * ones(a.size()) + a) / std::abs(sigma);
}

DriftBundle solve_a(const ChainSpec& spec) {
    DriftBundle d;
    const Matrix a_total = spec.a_sum();
    if (!pattern_irreducible(a_total))
        throw ValidationError("solve_a: A is reducible");
    d.varpi = spec.varpi();
    const ColVec beta = spec.beta_a();
    d.sigma = (d.varpi * beta)(0);
    const int m1 = spec.m1();
    Matrix reg = Matrix::Identity(m1, m1) - a_total + ones(m1) * d.varpi;
    Eigen::PartialPivLU<Matrix> lu(reg);
    ColVec first = lu.solve(beta);
    d.c = std::max(0.0, -first.minCoeff()) + 1.0;
    d.a = first + d.c * ones(m1);
    ColVec rhs = -d.sigma * ones(m1) + beta;
    d.poisson_residual =
        ((Matrix::Identity(m1, m1) - a_total) * d.a - rhs).cwiseAbs().maxCoeff();
    return d;
}

namespace {

// margin rows 0 and 1 for the v-drift, computed from exact moment sums
ColVec v_margin_row0(const ChainSpec& spec, const DriftBundle& d) {
    const double ms = -d.sigma;
    ColVec pv = (spec.b_second_moment_e() + 2.0 * spec.b_first_moment() * d.a) / ms;
    return pv - d.v(0, spec.m0()) + d.f(0, spec.m0());
}

ColVec v_margin_row1(const ChainSpec& spec, const DriftBundle& d) {
    const double ms = -d.sigma;
    const Matrix m1a = spec.a_first_moment();
    const Matrix asum = spec.a_sum();
    ColVec pv = (spec.a_second_moment_e() + 2.0 * spec.beta_a() +
                 asum * ones(spec.m1()) + 2.0 * (m1a + asum) * d.a) /
                ms;
    return pv - d.v(1, spec.m0()) + d.f(1, spec.m0());
}

// affine tail margin: -(k-1)e + [Sum l^2 A(l)e + 2 Sum l A(l) a]/(-sigma)
ColVec v_margin_affine(const ChainSpec& spec, const DriftBundle& d, int k) {
    const double ms = -d.sigma;
    ColVec base = (spec.a_second_moment_e() + 2.0 * spec.a_first_moment() * d.a) / ms;
    return base - (k - 1.0) * ones(spec.m1());
}

}  // namespace

DriftReport drift_check_v(const ChainSpec& spec, const DriftBundle& bundle,
                          int level_cap) {
    if (level_cap < 2) throw ValidationError("drift_check_v: level_cap must be >= 2");
    DriftReport rep;
    rep.cap = level_cap;
    rep.margin.reserve(level_cap + 1);
    rep.margin.push_back(v_margin_row0(spec, bundle));
    rep.margin.push_back(v_margin_row1(spec, bundle));
    for (int k = 2; k <= level_cap; ++k)
        rep.margin.push_back(v_margin_affine(spec, bundle, k));

    const double tol = 1e-12;
    if (rep.margin[level_cap].maxCoeff() >= 0.0)
        throw ValidationError(
            "drift_check_v: margin is not negative at the scan cap "
            "(drift too weak or moments too heavy)");
    int kk = 0;
    for (int k = level_cap; k >= 0; --k) {
        if (rep.margin[k].maxCoeff() > tol) {
            kk = k;
            break;
        }
    }
    rep.k_threshold = std::max(kk, 1);
    rep.b = 0.0;
    for (int k = 0; k <= rep.k_threshold; ++k)
        rep.b = std::max(rep.b, rep.margin[k].maxCoeff());
    if (rep.b <= 0.0) rep.b = 1.0;  // any positive constant works
    // beyond the cap the margin decreases by exactly e per level
    rep.certified = true;
    return rep;
}

namespace {

// stacked drift vector over levels 0..n
ColVec stack_levels(const ChainSpec& spec, const DriftBundle& d, int n,
                    ColVec (DriftBundle::*part)(int, int) const) {
    const int m0 = spec.m0(), m1 = spec.m1();
    ColVec out(m0 + n * m1);
    out.head(m0) = (d.*part)(0, m0);
    for (int k = 1; k <= n; ++k)
        out.segment(m0 + (k - 1) * m1, m1) = (d.*part)(k, m0);
    return out;
}

FiniteDriftReport finite_drift(const ChainSpec& spec, const DriftBundle& bundle,
                               const std::vector<int>& n_grid, double eps,
                               int k_threshold, double b, bool prime) {
    FiniteDriftReport rep;
    rep.n_grid = n_grid;
    for (int n : n_grid) {
        auto fin = build_finite(spec, n);
        Matrix p = fin.assemble();
        ColVec v = stack_levels(spec, bundle, n,
                                prime ? &DriftBundle::vprime : &DriftBundle::v);
        ColVec lhs = p * v;
        ColVec rhs;
        if (prime) {
            rhs = (1.0 - eps) * v - ColVec::Ones(v.size());
        } else {
            ColVec f = stack_levels(spec, bundle, n, &DriftBundle::f);
            rhs = v - (1.0 - eps) * f;
        }
        const int m0 = spec.m0(), m1 = spec.m1();
        const int cutoff = std::min(k_threshold, n);
        rhs.head(m0 + cutoff * m1).array() += b;
        rep.holds.push_back(((lhs - rhs).array() <= 1e-12).all());
    }
    for (size_t i = 0; i < rep.holds.size(); ++i) {
        bool from_here = true;
        for (size_t j = i; j < rep.holds.size(); ++j) from_here &= rep.holds[j];
        if (from_here) {
            rep.n_eps = rep.n_grid[i];
            break;
        }
    }
    return rep;
}

ColVec vprime_margin_row0(const ChainSpec& spec, const DriftBundle& d) {
    const double as = std::abs(d.sigma);
    ColVec pv = (spec.b_first_moment() * ones(spec.m1()) +
                 spec.tail_b(0) * d.a) /
                as;
    return pv - d.vprime(0, spec.m0()) + ones(spec.m0());
}

ColVec vprime_margin_row1(const ChainSpec& spec, const DriftBundle& d) {
    const double as = std::abs(d.sigma);
    const int m1 = spec.m1();
    const Matrix asum = spec.a_sum();
    ColVec pv = (spec.beta_a() + asum * ones(m1) +
                 (asum - spec.a(-1)) * d.a) /
                as;
    return pv - d.vprime(1, spec.m0()) + ones(m1);
}

// direct evaluation for k >= 2; algebraically zero, kept as a residual check
ColVec vprime_margin_deep(const ChainSpec& spec, const DriftBundle& d, int k) {
    const double as = std::abs(d.sigma);
    const Matrix asum = spec.a_sum();
    ColVec pv = (static_cast<double>(k) * asum * ones(spec.m1()) + spec.beta_a() +
                 asum * d.a) /
                as;
    return pv - d.vprime(k, spec.m0()) + ones(spec.m1());
}

}  // namespace

FiniteDriftReport drift_check_v_finite(const ChainSpec& spec,
                                       const DriftBundle& bundle,
                                       const std::vector<int>& n_grid,
                                       double eps, int k_threshold, double b) {
    return finite_drift(spec, bundle, n_grid, eps, k_threshold, b, false);
}

DriftPrimeReport drift_check_vprime(const ChainSpec& spec,
                                    const DriftBundle& bundle, int level_cap) {
    if (level_cap < 2)
        throw ValidationError("drift_check_vprime: level_cap must be >= 2");
    DriftPrimeReport rep;
    rep.cap = level_cap;
    rep.margin.push_back(vprime_margin_row0(spec, bundle));
    rep.margin.push_back(vprime_margin_row1(spec, bundle));
    rep.identity_residual = 0.0;
    for (int k = 2; k <= level_cap; ++k) {
        rep.margin.push_back(vprime_margin_deep(spec, bundle, k));
        rep.identity_residual =
            std::max(rep.identity_residual, rep.margin.back().cwiseAbs().maxCoeff());
    }
    const double tol = 1e-12;
    int kk = 0;
    for (int k = 1; k >= 0; --k) {
        if (rep.margin[k].maxCoeff() > tol) {
            kk = k;
            break;
        }
    }
    rep.k_threshold = std::max(kk, 1);
    rep.b = 0.0;
    for (int k = 0; k <= rep.k_threshold; ++k)
        rep.b = std::max(rep.b, rep.margin[k].maxCoeff());
    if (rep.b <= 0.0) rep.b = 1.0;
    return rep;
}

FiniteDriftReport drift_check_vprime_finite(const ChainSpec& spec,
                                            const DriftBundle& bundle,
                                            const std::vector<int>& n_grid,
                                            double eps, int k_threshold,
                                            double b) {
    return finite_drift(spec, bundle, n_grid, eps, k_threshold, b, true);
}

PassageVectors u_vectors(const ChainSpec& spec, const MatanSolution& sol,
                         int kmax) {
    PassageVectors pv;
    const int m1 = spec.m1();
    const Matrix a_total = spec.a_sum();
    const ColVec beta = spec.beta_a();
    pv.sigma = (spec.varpi() * beta)(0);
    if (!(pv.sigma < 0.0)) throw ValidationError("u_vectors: sigma must be negative");
    Matrix core = Matrix::Identity(m1, m1) - a_total - beta * sol.g_vec;
    Eigen::PartialPivLU<Matrix> lu(core);
    pv.resolvent = lu.solve(Matrix::Identity(m1, m1));
    if (max_abs(core * pv.resolvent - Matrix::Identity(m1, m1)) > 1e-8)
        throw Error("u_vectors: (I - A - beta_A g) is numerically singular");

    const ColVec re = pv.resolvent * ones(m1);
    pv.u.resize(kmax + 1);
    // u(k), k >= 1
    ColVec gre = re;  // G^k (resolvent e)
    for (int k = 1; k <= kmax; ++k) {
        gre = sol.g * gre;
        pv.u[k] = (re - gre) + static_cast<double>(k) / (-pv.sigma) * ones(m1);
    }
    // u(0) = e + Sum_m B(m)(I - G^m) resolvent e + Sum_m m B(m) e / (-sigma)
    const double scale = 2.0 * re.cwiseAbs().maxCoeff() + 1.0;
    const int msup = spec.b_support(1e-12 / scale);
    ColVec acc = ColVec::Zero(spec.m0());
    ColVec gre0 = re;
    for (int m = 1; m <= msup; ++m) {
        gre0 = sol.g * gre0;
        acc += spec.b(m) * (re - gre0);
    }
    pv.u[0] = ones(spec.m0()) + acc +
              spec.b_first_moment() * ones(m1) / (-pv.sigma);
    return pv;
}

ColVec u_vector(const PassageVectors& pv, const MatanSolution& sol, int k) {
    if (k < 0) throw ValidationError("u_vector: k must be >= 0");
    if (k < static_cast<int>(pv.u.size())) return pv.u[k];
    const int m1 = static_cast<int>(sol.g.rows());
    ColVec re = pv.resolvent * ones(m1);
    ColVec gre = re;
    for (int i = 0; i < k; ++i) gre = sol.g * gre;
    return (re - gre) + static_cast<double>(k) / (-pv.sigma) * ones(m1);
}

PiUDiagnostic pi_u_diagnostic(const LevelVector& pi, const PassageVectors& pv,
                              const MatanSolution& sol, int kmax) {
    PiUDiagnostic d;
    const int m1 = static_cast<int>(sol.g.rows());
    const ColVec re = pv.resolvent * ones(m1);
    const int last = std::min(kmax, pi.trunc());
    d.partial.reserve(last + 1);
    double acc = (pi.v0 * pv.u[0])(0);
    d.partial.push_back(acc);
    ColVec gre = re;
    for (int k = 1; k <= last; ++k) {
        gre = sol.g * gre;
        ColVec uk = (re - gre) + static_cast<double>(k) / (-pv.sigma) * ones(m1);
        acc += (pi.at(k) * uk)(0);
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
