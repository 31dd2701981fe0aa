#include "mg1/chain_spec.hpp"

#include "mg1/gth.hpp"
#include "mg1/power_sums.hpp"

#include <cmath>
#include <sstream>

namespace mg1 {

namespace {

void check_block(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                 const std::string& name) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << name << ": expected " << rows << "x" << cols << ", got "
           << m.rows() << "x" << m.cols();
        throw ValidationError(os.str());
    }
    if (m.size() > 0 && m.minCoeff() < -1e-12)
        throw ValidationError(name + ": negative entry");
}

}  // namespace

double AnalyticTail::w(long k) const {
    if (weight == TailWeight::Geometric) return std::pow(param, static_cast<double>(k));
    return std::pow(static_cast<double>(k), -param);
}

double AnalyticTail::w_tail(long from) const {
    if (weight == TailWeight::Geometric) return geo_tail_sum(param, from);
    return power_tail_sum(param, from);
}

double AnalyticTail::w_tail_m1(long from) const {
    if (weight == TailWeight::Geometric) return geo_tail_sum_m1(param, from);
    return power_tail_sum(param - 1.0, from);
}

double AnalyticTail::w_tail_m2(long from) const {
    if (weight == TailWeight::Geometric) return geo_tail_sum_m2(param, from);
    return power_tail_sum(param - 2.0, from);
}

ChainSpec::ChainSpec(int m0, int m1, std::map<int, Matrix> a_head,
                     std::map<int, Matrix> b_head, TailForm tail)
    : m0_(m0), m1_(m1), a_head_(std::move(a_head)), b_head_(std::move(b_head)),
      tail_(std::move(tail)) {
    if (m0_ < 1 || m1_ < 1) throw ValidationError("phase counts must be positive");
    for (const auto& [k, blk] : a_head_) {
        if (k < -1) throw ValidationError("A-block index below -1");
        check_block(blk, m1_, m1_, "A(" + std::to_string(k) + ")");
    }
    for (const auto& [k, blk] : b_head_) {
        if (k < -1) throw ValidationError("B-block index below -1");
        const Eigen::Index rows = k == -1 ? m1_ : m0_;
        const Eigen::Index cols = k <= -1 ? m0_ : (k == 0 ? m0_ : m1_);
        check_block(blk, rows, cols, "B(" + std::to_string(k) + ")");
    }
    if (auto* at = std::get_if<AnalyticTail>(&tail_)) {
        if (at->weight == TailWeight::Geometric) {
            if (!(at->param > 0.0 && at->param < 1.0))
                throw ValidationError("geometric tail ratio must lie in (0,1)");
        } else {
            if (!(at->param > 1.0))
                throw ValidationError("power-law exponent must exceed 1");
            if (at->a_start < 1 || at->b_start < 1)
                throw ValidationError("power-law tail must start at k >= 1");
        }
        if (at->b_start < 1) throw ValidationError("analytic B tail must start at k >= 1");
        check_block(at->a_coeff, m1_, m1_, "a_coeff");
        check_block(at->b_coeff, m0_, m1_, "b_coeff");
        for (const auto& [k, blk] : a_head_)
            if (k >= at->a_start)
                throw ValidationError("explicit A-block overlaps analytic tail");
        for (const auto& [k, blk] : b_head_)
            if (k >= at->b_start)
                throw ValidationError("explicit B-block overlaps analytic tail");
    } else {
        auto& fs = std::get<FiniteSupport>(tail_);
        fs.k_a = -1;
        fs.k_b = -1;
        for (const auto& [k, blk] : a_head_)
            if (blk.cwiseAbs().maxCoeff() > 0.0 && k > fs.k_a) fs.k_a = k;
        for (const auto& [k, blk] : b_head_)
            if (blk.cwiseAbs().maxCoeff() > 0.0 && k > fs.k_b) fs.k_b = k;
    }
}

bool ChainSpec::analytic() const {
    return std::holds_alternative<AnalyticTail>(tail_);
}

Matrix ChainSpec::a(int k) const {
    if (k < -1) throw ValidationError("A(k) needs k >= -1");
    if (auto it = a_head_.find(k); it != a_head_.end()) return it->second;
    if (auto* at = std::get_if<AnalyticTail>(&tail_); at && k >= at->a_start)
        return at->a_coeff * at->w(k);
    return Matrix::Zero(m1_, m1_);
}

Matrix ChainSpec::b(int k) const {
    if (k < -1) throw ValidationError("B(k) needs k >= -1");
    if (auto it = b_head_.find(k); it != b_head_.end()) return it->second;
    if (auto* at = std::get_if<AnalyticTail>(&tail_); at && k >= at->b_start)
        return at->b_coeff * at->w(k);
    const Eigen::Index rows = k == -1 ? m1_ : m0_;
    const Eigen::Index cols = k <= -1 ? m0_ : (k == 0 ? m0_ : m1_);
    return Matrix::Zero(rows, cols);
}

Matrix ChainSpec::tail_a(int k) const {
    if (k < -2) throw ValidationError("Abar(k) needs k >= -2");
    Matrix acc = Matrix::Zero(m1_, m1_);
    for (const auto& [j, blk] : a_head_)
        if (j > k) acc += blk;
    if (auto* at = std::get_if<AnalyticTail>(&tail_)) {
        long from = std::max<long>(k + 1, at->a_start);
        acc += at->a_coeff * at->w_tail(from);
    }
    return acc;
}

Matrix ChainSpec::tail_b(int k) const {
    if (k < 0) throw ValidationError("Bbar(k) needs k >= 0");
    Matrix acc = Matrix::Zero(m0_, m1_);
    for (const auto& [j, blk] : b_head_)
        if (j > k) acc += blk;
    if (auto* at = std::get_if<AnalyticTail>(&tail_)) {
        long from = std::max<long>(k + 1, at->b_start);
        acc += at->b_coeff * at->w_tail(from);
    }
    return acc;
}

Matrix ChainSpec::double_tail_a(int n) const {
    if (n < -1) throw ValidationError("AbarBar(n) needs n >= -1");
    if (!a_moment_finite(1))
        throw ValidationError("double tail of A diverges (first moment infinite)");
    Matrix acc = Matrix::Zero(m1_, m1_);
    for (const auto& [j, blk] : a_head_)
        if (j >= n + 2) acc += (j - n - 1) * blk;
    if (auto* at = std::get_if<AnalyticTail>(&tail_)) {
        long from = std::max<long>(n + 2, at->a_start);
        acc += at->a_coeff *
               (at->w_tail_m1(from) - (n + 1) * at->w_tail(from));
    }
    return acc;
}

Matrix ChainSpec::double_tail_b(int n) const {
    if (n < -1) throw ValidationError("BbarBar(n) needs n >= -1");
    if (!b_moment_finite(1))
        throw ValidationError("double tail of B diverges (first moment infinite)");
    Matrix acc = Matrix::Zero(m0_, m1_);
    for (const auto& [j, blk] : b_head_)
        if (j >= n + 2 && j >= 1) acc += (j - n - 1) * blk;
    if (auto* at = std::get_if<AnalyticTail>(&tail_)) {
        long from = std::max<long>(n + 2, at->b_start);
        acc += at->b_coeff *
               (at->w_tail_m1(from) - (n + 1) * at->w_tail(from));
    }
    return acc;
}

Matrix ChainSpec::a_sum() const {
    Matrix acc = Matrix::Zero(m1_, m1_);
    for (const auto& [j, blk] : a_head_) acc += blk;
    if (auto* at = std::get_if<AnalyticTail>(&tail_))
        acc += at->a_coeff * at->w_tail(at->a_start);
    return acc;
}

Matrix ChainSpec::a_first_moment() const {
    if (!a_moment_finite(1))
        throw ValidationError("first moment of A diverges");
    Matrix acc = Matrix::Zero(m1_, m1_);
    for (const auto& [j, blk] : a_head_) acc += j * blk;
    if (auto* at = std::get_if<AnalyticTail>(&tail_))
        acc += at->a_coeff * at->w_tail_m1(at->a_start);
    return acc;
}

ColVec ChainSpec::a_second_moment_e() const {
    if (!a_moment_finite(2))
        throw ValidationError("second moment of A diverges");
    Matrix acc = Matrix::Zero(m1_, m1_);
    for (const auto& [j, blk] : a_head_) acc += static_cast<double>(j) * j * blk;
    if (auto* at = std::get_if<AnalyticTail>(&tail_))
        acc += at->a_coeff * at->w_tail_m2(at->a_start);
    return acc * ones(m1_);
}

ColVec ChainSpec::b_rowsum() const {
    ColVec acc = ColVec::Zero(m0_);
    for (const auto& [j, blk] : b_head_)
        if (j >= 0) acc += blk * ones(blk.cols());
    if (auto* at = std::get_if<AnalyticTail>(&tail_))
        acc += at->b_coeff * ones(m1_) * at->w_tail(at->b_start);
    return acc;
}

Matrix ChainSpec::b_first_moment() const {
    if (!b_moment_finite(1))
        throw ValidationError("first moment of B diverges");
    Matrix acc = Matrix::Zero(m0_, m1_);
    for (const auto& [j, blk] : b_head_)
        if (j >= 1) acc += j * blk;
    if (auto* at = std::get_if<AnalyticTail>(&tail_))
        acc += at->b_coeff * at->w_tail_m1(at->b_start);
    return acc;
}

ColVec ChainSpec::b_second_moment_e() const {
    if (!b_moment_finite(2))
        throw ValidationError("second moment of B diverges");
    Matrix acc = Matrix::Zero(m0_, m1_);
    for (const auto& [j, blk] : b_head_)
        if (j >= 1) acc += static_cast<double>(j) * j * blk;
    if (auto* at = std::get_if<AnalyticTail>(&tail_))
        acc += at->b_coeff * at->w_tail_m2(at->b_start);
    return acc * ones(m1_);
}

bool ChainSpec::a_moment_finite(int order) const {
    if (auto* at = std::get_if<AnalyticTail>(&tail_))
        if (at->weight == TailWeight::PowerLaw && max_abs(at->a_coeff) > 0.0)
            return at->param > order + 1.0;
    return true;
}

bool ChainSpec::b_moment_finite(int order) const {
    if (auto* at = std::get_if<AnalyticTail>(&tail_))
        if (at->weight == TailWeight::PowerLaw && max_abs(at->b_coeff) > 0.0)
            return at->param > order + 1.0;
    return true;
}

int ChainSpec::a_support(double eps) const {
    if (auto* fs = std::get_if<FiniteSupport>(&tail_)) return std::max(fs->k_a, 0);
    long lo = 0, hi = 1;
    while (inf_norm(tail_a(static_cast<int>(hi))) >= eps) {
        lo = hi;
        hi *= 2;
        if (hi > (1L << 40)) throw WindowError("a_support: tail does not reach eps");
    }
    while (lo < hi) {
        long mid = (lo + hi) / 2;
        if (inf_norm(tail_a(static_cast<int>(mid))) < eps) hi = mid;
        else lo = mid + 1;
    }
    return static_cast<int>(hi);
}

int ChainSpec::b_support(double eps) const {
    if (auto* fs = std::get_if<FiniteSupport>(&tail_)) return std::max(fs->k_b, 0);
    long lo = 0, hi = 1;
    while (inf_norm(tail_b(static_cast<int>(hi))) >= eps) {
        lo = hi;
        hi *= 2;
        if (hi > (1L << 40)) throw WindowError("b_support: tail does not reach eps");
    }
    while (lo < hi) {
        long mid = (lo + hi) / 2;
        if (inf_norm(tail_b(static_cast<int>(mid))) < eps) hi = mid;
        else lo = mid + 1;
    }
    return static_cast<int>(hi);
}

RowVec ChainSpec::varpi() const { return gth_stationary(a_sum()); }

double ChainSpec::sigma() const { return (varpi() * beta_a())(0); }

double ChainSpec::a_rowsum_residual() const {
    return (a_sum() * ones(m1_) - ones(m1_)).cwiseAbs().maxCoeff();
}

double ChainSpec::b_rowsum_residual() const {
    return (b_rowsum() - ones(m0_)).cwiseAbs().maxCoeff();
}

double ChainSpec::boundary_residual() const {
    return (b(-1) * ones(m0_) - a(-1) * ones(m1_)).cwiseAbs().maxCoeff();
}

ValidationReport validate(const ChainSpec& spec) {
    ValidationReport rep;
    rep.a_rowsum_residual = spec.a_rowsum_residual();
    rep.b_rowsum_residual = spec.b_rowsum_residual();
    rep.boundary_residual = spec.boundary_residual();
    rep.b_first_moment_finite = spec.b_moment_finite(1);

    const double gate = 1e-9;
    std::ostringstream why;
    bool ok = true;
    if (rep.a_rowsum_residual > gate) {
        ok = false;
        why << "A row-sum residual " << rep.a_rowsum_residual << " exceeds " << gate << "; ";
    }
    if (rep.b_rowsum_residual > gate) {
        ok = false;
        why << "B row-sum residual " << rep.b_rowsum_residual << " exceeds " << gate << "; ";
    }
    if (rep.boundary_residual > gate) {
        ok = false;
        why << "B(-1)e != A(-1)e, residual " << rep.boundary_residual << "; ";
    }
    rep.a_irreducible = pattern_irreducible(spec.a_sum());
    if (!rep.a_irreducible) {
        ok = false;
        why << "A = sum A(k) is reducible; ";
    }
    if (ok) {
        rep.varpi = spec.varpi();
        rep.sigma = (rep.varpi * spec.beta_a())(0);
        rep.mean_drift_negative = rep.sigma < 0.0;
        rep.p_window_levels = 20;
        rep.p_irreducible_window =
            pattern_irreducible(assemble_p_window(spec, rep.p_window_levels).block);
    }
    rep.ok = ok;
    rep.detail = why.str();
    return rep;
}

int FiniteChainSpec::dim() const { return base.m0() + n * base.m1(); }

int FiniteChainSpec::level_offset(int k) const {
    return k == 0 ? 0 : base.m0() + (k - 1) * base.m1();
}

Matrix FiniteChainSpec::assemble() const {
    const int m0 = base.m0(), m1 = base.m1();
    Matrix p = Matrix::Zero(dim(), dim());
    // level-0 row
    p.block(0, 0, m0, m0) = base.b(0);
    for (int l = 1; l < n; ++l)
        p.block(0, level_offset(l), m0, m1) = base.b(l);
    p.block(0, level_offset(n), m0, m1) = aug_b;
    // repeating rows
    for (int k = 1; k <= n; ++k) {
        const int r = level_offset(k);
        if (k == 1) p.block(r, 0, m1, m0) = base.b(-1);
        for (int l = std::max(1, k - 1); l < n; ++l)
            p.block(r, level_offset(l), m1, m1) = base.a(l - k);
        p.block(r, level_offset(n), m1, m1) = aug_a[n - k];
    }
    return p;
}

FiniteChainSpec build_finite(const ChainSpec& spec, int n, AugScheme scheme,
                             const std::vector<Matrix>* custom_a,
                             const Matrix* custom_b) {
    if (n < 1) throw ValidationError("build_finite: n must be >= 1");
    FiniteChainSpec f{spec, n, scheme, {}, {}};
    if (scheme == AugScheme::LastColumn) {
        f.aug_a.reserve(n);
        for (int k = 0; k < n; ++k) f.aug_a.push_back(spec.tail_a(k - 1));
        f.aug_b = spec.tail_b(n - 1);
    } else {
        if (!custom_a || !custom_b || static_cast<int>(custom_a->size()) != n)
            throw ValidationError("build_finite: custom scheme needs n A-blocks and one B-block");
        const double gate = 1e-9;
        for (int k = 0; k < n; ++k) {
            check_block((*custom_a)[k], spec.m1(), spec.m1(),
                        "A^(N)(" + std::to_string(k) + ")");
            double res = ((*custom_a)[k] * ones(spec.m1()) -
                          spec.tail_a(k - 1) * ones(spec.m1()))
                             .cwiseAbs()
                             .maxCoeff();
            if (res > gate)
                throw ValidationError("custom A^(N)(" + std::to_string(k) +
                                      ") violates the row-sum constraint");
        }
        check_block(*custom_b, spec.m0(), spec.m1(), "B^(N)(N)");
        double res = (*custom_b * ones(spec.m1()) -
                      spec.tail_b(n - 1) * ones(spec.m1()))
                         .cwiseAbs()
                         .maxCoeff();
        if (res > gate)
            throw ValidationError("custom B^(N)(N) violates the row-sum constraint");
        f.aug_a = *custom_a;
        f.aug_b = *custom_b;
    }
    return f;
}

PWindow assemble_p_window(const ChainSpec& spec, int levels) {
    if (levels < 0) throw ValidationError("assemble_p_window: levels must be >= 0");
    const int m0 = spec.m0(), m1 = spec.m1();
    const int dim = m0 + levels * m1;
    auto offset = [&](int k) { return k == 0 ? 0 : m0 + (k - 1) * m1; };
    PWindow w;
    w.levels = levels;
    w.block = Matrix::Zero(dim, dim);
    w.deficiency = ColVec::Zero(dim);
    w.block.block(0, 0, m0, m0) = spec.b(0);
    for (int l = 1; l <= levels; ++l)
        w.block.block(0, offset(l), m0, m1) = spec.b(l);
    w.deficiency.head(m0) = spec.tail_b(levels) * ones(m1);
    for (int k = 1; k <= levels; ++k) {
        const int r = offset(k);
        if (k == 1) w.block.block(r, 0, m1, m0) = spec.b(-1);
        for (int l = k - 1; l <= levels; ++l)
            if (l >= 1) w.block.block(r, offset(l), m1, m1) = spec.a(l - k);
        w.deficiency.segment(r, m1) = spec.tail_a(levels - k) * ones(m1);
    }
    return w;
}

}  // namespace mg1
