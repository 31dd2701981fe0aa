#include "mg1/deviation.hpp"

#include "mg1/gth.hpp"
#include "mg1/parallel.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mg1 {

namespace {

// gcd of cycle lengths on the nonzero pattern (period of the chain)
int pattern_period(const Matrix& p) {
    const int n = static_cast<int>(p.rows());
    std::vector<int> depth(n, -1);
    std::vector<int> queue{0};
    depth[0] = 0;
    int g = 0;
    for (size_t qi = 0; qi < queue.size(); ++qi) {
        int v = queue[qi];
        for (int w = 0; w < n; ++w) {
            if (p(v, w) <= 0.0) continue;
            if (depth[w] < 0) {
                depth[w] = depth[v] + 1;
                queue.push_back(w);
            } else {
                g = std::gcd(g, std::abs(depth[v] + 1 - depth[w]));
            }
        }
    }
    return g == 0 ? 1 : g;
}

}  // namespace

DeviationContext::DeviationContext(ChainSpec spec, MatanSolution sol,
                                   PassageVectors pv, LevelVector pi, int l_max)
    : spec_(std::move(spec)), sol_(std::move(sol)), pv_(std::move(pv)),
      pi_(std::move(pi)), l_max_(l_max) {
    if (l_max_ < 0) throw ValidationError("DeviationContext: l_max must be >= 0");
    sigma_ = pv_.sigma;
    censored_ = boundary_pi0(spec_, sol_);
    resolvent_e_ = pv_.resolvent * ones(spec_.m1());
    gpow_.push_back(Matrix::Identity(spec_.m1(), spec_.m1()));

    const int w = std::max(l_max_, 1);
    auto rf = r_matrices(spec_, sol_, w);
    fplus_ = f_plus_window(spec_, sol_, rf, w);
    auto sb = g_weighted_tail_b(spec_, sol_.g, w);

    // boundary systems (I - P0~ + e pi0~) X = RHS(l)
    const int m0 = spec_.m0();
    Matrix reg = Matrix::Identity(m0, m0) - censored_.p0 +
                 ones(m0) * censored_.pi0_tilde;
    Eigen::PartialPivLU<Matrix> lu(reg);

    h0_.resize(l_max_ + 1);
    t_.resize(l_max_ + 1);
    solvability_.resize(l_max_ + 1);
    for (int l = 0; l <= l_max_; ++l) {
        Matrix rhs;
        if (l == 0) {
            rhs = Matrix::Identity(m0, m0) - pv_.u[0] * pi_.v0;
        } else {
            rhs = -pv_.u[0] * pi_.at(l);
            for (int m = 1; m < l; ++m) rhs += spec_.b(m) * fplus_.at(m, l);
            rhs += sb[l - 1] * fplus_.at(l, l);
        }
        solvability_[l] = (censored_.pi0_tilde * rhs).cwiseAbs().maxCoeff();
        if (solvability_[l] > 1e-9) {
            std::ostringstream os;
            os << "boundary system " << l << " fails the solvability certificate ("
               << solvability_[l] << "); upstream pi or u is inconsistent";
            throw Error(os.str());
        }
        h0_[l] = lu.solve(rhs);
        t_[l] = sol_.phi0_inv * spec_.b(-1) * h0_[l];
    }
}

const Matrix& DeviationContext::h0(int l) const {
    if (l < 0 || l > l_max_) throw ValidationError("h0: column level out of range");
    return h0_[l];
}

double DeviationContext::solvability(int l) const {
    if (l < 0 || l > l_max_) throw ValidationError("solvability: out of range");
    return solvability_[l];
}

void DeviationContext::ensure_powers(int kmax) {
    while (static_cast<int>(gpow_.size()) <= kmax)
        gpow_.push_back(gpow_.back() * sol_.g);
}

ColVec DeviationContext::u(int k) const {
    if (k == 0) return pv_.u[0];
    if (k < static_cast<int>(gpow_.size()))
        return (resolvent_e_ - gpow_[k] * resolvent_e_) +
               static_cast<double>(k) / (-sigma_) * ones(spec_.m1());
    return u_vector(pv_, sol_, k);
}

Matrix DeviationContext::f_plus(int k, int l) const {
    if (l < 1 || l > std::max(l_max_, 1))
        throw ValidationError("f_plus: column out of range");
    if (k <= fplus_.w) return fplus_.at(k, l);
    if (k - l < static_cast<int>(gpow_.size()))
        return gpow_[k - l] * fplus_.at(l, l);
    Matrix g = sol_.g;
    Matrix acc = fplus_.at(l, l);
    for (int i = 0; i < k - l; ++i) acc = g * acc;
    return acc;
}

Matrix DeviationContext::h_block(int k, int l) const {
    if (k < 1) throw ValidationError("h_block: k must be >= 1");
    if (l < 0 || l > l_max_) throw ValidationError("h_block: l out of range");
    const Matrix gk1 = k - 1 < static_cast<int>(gpow_.size())
                           ? gpow_[k - 1]
                           : Matrix();  // powers must be ensured beforehand
    if (gk1.size() == 0)
        throw WindowError("h_block: call ensure_powers(k) first");
    Matrix out = gk1 * t_[l] - u(k) * pi_.at(l);
    if (l >= 1) out += f_plus(k, l);
    return out;
}

Matrix DeviationContext::e_block(int k, int l) const {
    if (l < 0 || l > l_max_) throw ValidationError("e_block: l out of range");
    if (k < std::max(l, 1))
        throw ValidationError("e_block: decomposition needs k >= max(l,1)");
    if (k >= static_cast<int>(gpow_.size()))
        throw WindowError("e_block: call ensure_powers(k) first");
    Matrix out = gpow_[k - 1] * t_[l] -
                 (resolvent_e_ - gpow_[k] * resolvent_e_) * pi_.at(l);
    if (l >= 1) out += gpow_[k - l] * fplus_.at(l, l);
    return out;
}

DeviationWindow build_deviation_window(DeviationContext& ctx, int k_max) {
    if (k_max < 1) throw ValidationError("build_deviation_window: K must be >= 1");
    ctx.ensure_powers(k_max + 1);
    const int lm = ctx.l_max();
    DeviationWindow win;
    win.k_max = k_max;
    win.l_max = lm;
    win.h0.reserve(lm + 1);
    for (int l = 0; l <= lm; ++l) win.h0.push_back(ctx.h0(l));
    win.h.assign(static_cast<size_t>(k_max) * (lm + 1), Matrix());
    win.e.assign(static_cast<size_t>(k_max) * (lm + 1), Matrix());

    detail::parallel_for(static_cast<size_t>(k_max) * (lm + 1), [&](size_t idx) {
        const int k = static_cast<int>(idx / (lm + 1)) + 1;
        const int l = static_cast<int>(idx % (lm + 1));
        win.h[idx] = ctx.h_block(k, l);
        if (k >= std::max(l, 1)) win.e[idx] = ctx.e_block(k, l);
    });

    // decomposition residual and the empirical C_E(l) profile
    const double ms = -ctx.sigma();
    win.ce.assign(lm + 1, 0.0);
    win.ce_drift.assign(lm + 1, 0.0);
    double worst = 0.0;
    for (int l = 0; l <= lm; ++l) {
        double ce_full = 0.0, ce_head = 0.0;
        for (int k = std::max(l, 1); k <= k_max; ++k) {
            const Matrix& e = win.e_at(k, l);
            Matrix recon = -static_cast<double>(k) / ms *
                               ones(ctx.spec().m1()) * ctx.pi().at(l) +
                           e;
            worst = std::max(worst, max_abs(win.h_at(k, l) - recon));
            ce_full = std::max(ce_full, max_abs(e));
            if (k <= k_max - (k_max - std::max(l, 1)) / 4)
                ce_head = std::max(ce_head, max_abs(e));
        }
        win.ce[l] = ce_full;
        win.ce_drift[l] = ce_full > 0.0 ? (ce_full - ce_head) / ce_full : 0.0;
    }
    win.decomposition_residual = worst;
    return win;
}

namespace {

// entrywise bound |H(n;l)| <= n * maxpi / |sigma| + ce
struct HGrowthBound {
    double slope = 0.0;  // maxpi / |sigma|
    double ce = 0.0;
    double at(double n) const { return n * slope + ce; }
};

HGrowthBound h_bound_for(DeviationContext& ctx, int l, double ce) {
    HGrowthBound b;
    const RowVec pil = ctx.pi().at(l);
    b.slope = (pil.size() ? pil.cwiseAbs().maxCoeff() : 0.0) / (-ctx.sigma());
    b.ce = ce;
    return b;
}

// bound on Sum_{n>m} rowvec(n) * bound.at(n) with rowvec(n) = A(n-r)e-type
// tails, all through exact tail/double-tail evaluators
double neglected_a_mass(const ChainSpec& spec, int m, int r,
                        const HGrowthBound& b) {
    if (!spec.a_moment_finite(1)) return 1e300;
    const ColVec t1 = spec.tail_a(m - r) * ones(spec.m1());       // Sum_{j>m-r} A(j) e
    const ColVec t2 = spec.double_tail_a(m - r - 1) * ones(spec.m1());
    // Sum_{j>M} (r+j) A(j)e = r Abar(M)e + oolA(M-1)e + M Abar(M)e
    const double mm = static_cast<double>(m - r);
    const double lin = (t2 + (mm + r) * t1).maxCoeff();
    return b.slope * lin + b.ce * t1.maxCoeff();
}

double neglected_b_mass(const ChainSpec& spec, int m, const HGrowthBound& b) {
    if (!spec.b_moment_finite(1)) return 1e300;
    const ColVec t1 = spec.tail_b(m) * ones(spec.m1());
    const ColVec t2 = spec.double_tail_b(m - 1) * ones(spec.m1());
    const double lin = (t2 + static_cast<double>(m) * t1).maxCoeff();
    return b.slope * lin + b.ce * t1.maxCoeff();
}

}  // namespace

PoissonCheck poisson_residual(DeviationContext& ctx, int k_max, int l_max,
                              double row_tol) {
    if (l_max > ctx.l_max())
        throw ValidationError("poisson_residual: l_max exceeds the context");
    DeviationWindow win = build_deviation_window(ctx, k_max);
    const ChainSpec& spec = ctx.spec();
    const int m0 = spec.m0(), m1 = spec.m1();

    PoissonCheck out;
    for (int lc = 0; lc <= l_max; ++lc) {
        HGrowthBound hb = h_bound_for(ctx, lc, 2.0 * win.ce[lc]);
        // row level 0
        {
            const double neglect = neglected_b_mass(spec, k_max, hb);
            if (neglect <= row_tol) {
                Matrix acc = spec.b(0) * ctx.h0(lc);
                for (int n = 1; n <= k_max; ++n)
                    acc += spec.b(n) * win.h_at(n, lc);
                Matrix target = -ones(m0) * ctx.pi().at(lc);
                if (lc == 0) target += Matrix::Identity(m0, m0);
                out.max_residual = std::max(
                    out.max_residual, max_abs(ctx.h0(lc) - acc - target));
                out.neglected_bound = std::max(out.neglected_bound, neglect);
                if (lc == 0) {
                    ++out.rows_checked;
                    out.max_row_level = std::max(out.max_row_level, 0);
                }
            }
        }
        // row levels r >= 1
        for (int r = 1; r <= k_max; ++r) {
            if (k_max - r < 1) break;
            const double neglect = neglected_a_mass(spec, k_max, r, hb);
            if (neglect > row_tol) break;  // grows with r
            Matrix acc = Matrix::Zero(m1, lc == 0 ? m0 : m1);
            if (r == 1) acc += spec.b(-1) * ctx.h0(lc);
            for (int n = std::max(1, r - 1); n <= k_max; ++n)
                acc += spec.a(n - r) * win.h_at(n, lc);
            Matrix target = -ones(m1) * ctx.pi().at(lc);
            if (lc == r) target += Matrix::Identity(m1, m1);
            out.max_residual = std::max(
                out.max_residual, max_abs(win.h_at(r, lc) - acc - target));
            out.neglected_bound = std::max(out.neglected_bound, neglect);
            if (lc == 0) {
                ++out.rows_checked;
                out.max_row_level = std::max(out.max_row_level, r);
            }
        }
    }
    if (out.rows_checked == 0) {
        // name the K that would admit at least the level-0 row
        HGrowthBound hb = h_bound_for(ctx, 0, 2.0 * win.ce[0]);
        int k = k_max;
        while (k < (1 << 24) && neglected_b_mass(ctx.spec(), k, hb) > row_tol) k *= 2;
        std::ostringstream os;
        os << "poisson_residual: window K=" << k_max
           << " too small; need roughly K=" << k;
        throw WindowError(os.str());
    }
    return out;
}

namespace {

// level-weight row vectors y(n) = pi^(N) (P^(N) - P) restricted to
// column level n >= N (rows above N vanish)
RowVec diff_weight(const ChainSpec& spec, const FiniteChainSpec& fspec,
                   const LevelVector& pi_n, int n) {
    const int nn = fspec.n;
    RowVec y = RowVec::Zero(spec.m1());
    if (n == nn) {
        y += pi_n.v0 * (fspec.aug_b - spec.b(nn));
        for (int l = 1; l <= nn; ++l)
            y += pi_n.at(l) * (fspec.aug_a[nn - l] - spec.a(nn - l));
    } else {
        y -= pi_n.v0 * spec.b(n);
        for (int l = 1; l <= nn; ++l) y -= pi_n.at(l) * spec.a(n - l);
    }
    return y;
}

}  // namespace

DiffFormulaCheck difference_formula_check(DeviationContext& ctx,
                                          const FiniteChainSpec& fspec,
                                          const LevelVector& pi_n, int l_max,
                                          double tol, int n_cap) {
    if (l_max > ctx.l_max())
        throw ValidationError("difference_formula_check: l_max exceeds context");
    const ChainSpec& spec = ctx.spec();
    const int nn = fspec.n;

    // truncation level for the n-sum, from the affine H-growth bound
    double ce = 0.0;
    {
        DeviationWindow probe = build_deviation_window(ctx, std::max(nn + 2, 4));
        ce = *std::max_element(probe.ce.begin(), probe.ce.end());
    }
    double slope = 0.0;
    for (int l = 0; l <= l_max; ++l) {
        const RowVec pil = ctx.pi().at(l);
        if (pil.size()) slope = std::max(slope, pil.cwiseAbs().maxCoeff());
    }
    slope /= -ctx.sigma();

    auto remainder = [&](int m) {
        double tail1 = (pi_n.v0 * (spec.double_tail_b(m - 1) +
                                   static_cast<double>(m) * spec.tail_b(m)) *
                        ones(spec.m1()))(0);
        double tail0 = (pi_n.v0 * spec.tail_b(m) * ones(spec.m1()))(0);
        for (int l = 1; l <= nn; ++l) {
            tail1 += (pi_n.at(l) * (spec.double_tail_a(m - l - 1) +
                                    static_cast<double>(m) * spec.tail_a(m - l)) *
                      ones(spec.m1()))(0);
            tail0 += (pi_n.at(l) * spec.tail_a(m - l) * ones(spec.m1()))(0);
        }
        return slope * tail1 + 2.0 * ce * tail0;
    };

    int m = nn + 4;
    while (remainder(m) > tol * 0.1) {
        m = m < 2 * nn ? 2 * nn : m * 2;
        if (m > n_cap)
            throw WindowError(
                "difference_formula_check: truncation bound stays above "
                "tolerance; enlarge the window cap");
    }

    DiffFormulaCheck out;
    out.n_trunc = m;
    out.remainder_bound = remainder(m);
    ctx.ensure_powers(m + 1);

    std::vector<RowVec> weights;
    weights.reserve(m - nn + 1);
    for (int n = nn; n <= m; ++n)
        weights.push_back(diff_weight(spec, fspec, pi_n, n));

    for (int lc = 0; lc <= l_max; ++lc) {
        RowVec rhs = RowVec::Zero(lc == 0 ? spec.m0() : spec.m1());
        for (int n = nn; n <= m; ++n)
            rhs += weights[n - nn] * ctx.h_block(n, lc);
        RowVec lhs = pi_n.at(lc) - ctx.pi().at(lc);
        out.max_error = std::max(out.max_error, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    return out;
}

DiffDecomposition difference_decomposition(DeviationContext& ctx,
                                           const FiniteChainSpec& fspec,
                                           const LevelVector& pi_n, int k,
                                           int n_cap) {
    const ChainSpec& spec = ctx.spec();
    const int nn = fspec.n;
    if (k < 0 || k > nn - 1)
        throw ValidationError(
            "difference_decomposition: stated for k in [0, N-1]");
    if (k > ctx.l_max())
        throw ValidationError("difference_decomposition: k exceeds context l_max");

    const double ms = -ctx.sigma();
    DiffDecomposition out;

    double main_scale = (pi_n.v0 * spec.double_tail_b(nn - 1) * ones(spec.m1()))(0);
    for (int l = 1; l <= nn; ++l)
        main_scale +=
            (pi_n.at(l) * spec.double_tail_a(nn - l - 1) * ones(spec.m1()))(0);
    out.main = main_scale / ms * ctx.pi().at(k);

    // phi terms; with LastColumn the first two vanish identically
    ctx.ensure_powers(std::max(nn + 2, 8));
    const Matrix e_n_k = ctx.e_block(std::max(nn, std::max(k, 1)), k);
    RowVec phi = RowVec::Zero(e_n_k.cols());
    phi += pi_n.v0 * (fspec.aug_b - spec.tail_b(nn - 1)) * e_n_k;
    for (int l = 1; l <= nn; ++l)
        phi += pi_n.at(l) * (fspec.aug_a[nn - l] - spec.tail_a(nn - l - 1)) * e_n_k;

    double ce = max_abs(e_n_k) + 1.0;
    auto remainder = [&](int m) {
        double tail0 = (pi_n.v0 * spec.tail_b(m) * ones(spec.m1()))(0);
        for (int l = 1; l <= nn; ++l)
            tail0 += (pi_n.at(l) * spec.tail_a(m - l) * ones(spec.m1()))(0);
        return 2.0 * ce * tail0;
    };
    int m = nn + 4;
    while (remainder(m) > 1e-10) {
        m = m < 2 * nn ? 2 * nn : m * 2;
        if (m > n_cap)
            throw WindowError(
                "difference_decomposition: truncation bound stays above 1e-10");
    }
    out.n_trunc = m;
    ctx.ensure_powers(m + 1);
    for (int n = nn + 1; n <= m; ++n) {
        RowVec w = pi_n.v0 * spec.b(n);
        for (int l = 1; l <= nn; ++l) w += pi_n.at(l) * spec.a(n - l);
        phi += w * (e_n_k - ctx.e_block(n, k));
    }
    out.phi = phi;
    out.actual = pi_n.at(k) - ctx.pi().at(k);
    out.identity_error =
        (out.main + out.phi - out.actual).cwiseAbs().maxCoeff();
    return out;
}

DWindow deviation_d_window(DeviationContext& ctx, const DeviationWindow& win) {
    const ChainSpec& spec = ctx.spec();
    if (!spec.a_moment_finite(2) || !spec.b_moment_finite(2))
        throw ValidationError(
            "deviation_d_window: needs finite second moments of the increments");
    const LevelVector& pi = ctx.pi();
    const double ms = -ctx.sigma();
    const int km = win.k_max, lm = win.l_max;

    DWindow dw;
    dw.k_max = km;
    dw.l_max = lm;
    dw.aperiodic_window =
        pattern_period(assemble_p_window(spec, std::min(km, 20)).block) == 1;

    // stored tail of pi beyond the window
    RowVec s0 = pi.tail_vector(km);
    double s0e = s0.sum();
    double s1 = 0.0;
    for (int kp = km + 1; kp <= pi.trunc(); ++kp)
        s1 += kp * pi.levels[kp - 1].sum();

    dw.pi_h.resize(lm + 1);
    dw.tail_error.resize(lm + 1);
    for (int l = 0; l <= lm; ++l) {
        RowVec acc = pi.v0 * win.h0[l];
        for (int k = 1; k <= km; ++k) acc += pi.at(k) * win.h_at(k, l);
        const Matrix& plateau = win.e_at(km, l);
        acc += -s1 / ms * pi.at(l) + s0 * plateau;
        dw.pi_h[l] = acc;
        const double pmax = pi.at(l).size() ? pi.at(l).cwiseAbs().maxCoeff() : 0.0;
        dw.tail_error[l] = 2.0 * s0e * std::max(win.ce_drift[l] * win.ce[l], 1e-15) +
                           pi.tail_bound *
                               ((pi.trunc() + 1.0) / ms * pmax + win.ce[l]);
    }

    dw.d0.reserve(lm + 1);
    for (int l = 0; l <= lm; ++l)
        dw.d0.push_back(win.h0[l] - ones(spec.m0()) * dw.pi_h[l]);
    dw.d.assign(static_cast<size_t>(km) * (lm + 1), Matrix());
    for (int k = 1; k <= km; ++k)
        for (int l = 0; l <= lm; ++l)
            dw.d[(k - 1) * (lm + 1) + l] =
                win.h_at(k, l) - ones(spec.m1()) * dw.pi_h[l];
    return dw;
}

}  // namespace mg1
