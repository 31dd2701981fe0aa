#include "mg1/oracle.hpp"

#include "mg1/gth.hpp"
#include "mg1/parallel.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace mg1 {
namespace oracle {

RowVec lu_stationary(const Matrix& p) {
    const int n = static_cast<int>(p.rows());
    // replace one balance equation by the normalization
    Matrix sys = (p.transpose() - Matrix::Identity(n, n));
    sys.row(n - 1).setOnes();
    ColVec rhs = ColVec::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::PartialPivLU<Matrix> lu(sys);
    return lu.solve(rhs).transpose();
}

FirstPassage first_passage_solve(const ChainSpec& spec, int trunc_level) {
    if (trunc_level < 2)
        throw ValidationError("first_passage_solve: trunc_level must be >= 2");
    const int m0 = spec.m0(), m1 = spec.m1();
    const int t = trunc_level;
    const int dim = t * m1;  // levels 1..t
    auto off = [&](int k) { return (k - 1) * m1; };

    // reflected transition matrix among levels >= 1 (level-0 column dropped)
    Matrix tr = Matrix::Zero(dim, dim);
    for (int k = 1; k <= t; ++k) {
        for (int l = std::max(1, k - 1); l < t; ++l)
            tr.block(off(k), off(l), m1, m1) = spec.a(l - k);
        tr.block(off(k), off(t), m1, m1) = spec.tail_a(t - k - 1);
    }
    Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(dim, dim) - tr);
    ColVec u_all = lu.solve(ColVec::Ones(dim));

    FirstPassage fp;
    fp.u.resize(t + 1);
    for (int k = 1; k <= t; ++k) fp.u[k] = u_all.segment(off(k), m1);
    // one boundary step: u(0) = e + Sum_m B(m) u(m)
    const int msup = std::min(t, spec.b_support(1e-14));
    ColVec u0 = ones(m0);
    for (int m = 1; m <= msup; ++m) u0 += spec.b(m) * fp.u[m];
    fp.u[0] = u0;

    // reflection-bias bound: P(hit level >= t before 0) from levels <= t/2,
    // times a passage-time scale at the top
    Matrix interior = Matrix::Zero(dim, dim);
    for (int k = 1; k <= t; ++k)
        for (int l = std::max(1, k - 1); l < t; ++l)
            interior.block(off(k), off(l), m1, m1) = spec.a(l - k);
    ColVec reach = ColVec::Zero(dim);
    for (int k = 1; k <= t; ++k)
        reach.segment(off(k), m1) = spec.tail_a(t - k - 1) * ones(m1);
    Eigen::PartialPivLU<Matrix> lu2(Matrix::Identity(dim, dim) - interior);
    ColVec hit = lu2.solve(reach);
    double hmax = 0.0;
    for (int k = 1; k <= t / 2; ++k)
        hmax = std::max(hmax, hit.segment(off(k), m1).maxCoeff());
    fp.reflect_bound = hmax * 2.0 * u_all.maxCoeff();
    return fp;
}

DefinitionalH h_definitional(const ChainSpec& spec, int trunc_level,
                             int ref_phase, int window) {
    if (window < 1 || trunc_level < window + 2)
        throw ValidationError("h_definitional: need trunc_level > window + 1");
    auto fin = build_finite(spec, trunc_level);
    const Matrix p = fin.assemble();
    const int dim = static_cast<int>(p.rows());
    const int m0 = spec.m0(), m1 = spec.m1();
    RowVec pi_all = gth_stationary(p);

    const int ref = ref_phase;  // state (0, ref_phase)
    if (ref < 0 || ref >= m0)
        throw ValidationError("h_definitional: ref_phase out of range");
    Matrix p_noref = p;
    p_noref.col(ref).setZero();
    Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(dim, dim) - p_noref);

    // occupation of each window state before T_ref, and E[T_ref]
    const int wdim = m0 + window * m1;
    Matrix occ = lu.solve(Matrix::Identity(dim, dim).leftCols(wdim));
    ColVec t_ref = lu.solve(ColVec::Ones(dim));

    Matrix h_full = occ - t_ref * pi_all.head(wdim);

    DefinitionalH out;
    out.window = window;
    out.trunc = trunc_level;
    out.pi.v0 = pi_all.head(m0);
    for (int k = 1; k <= trunc_level; ++k)
        out.pi.levels.push_back(pi_all.segment(fin.level_offset(k), m1));
    out.pi.normalized = true;
    auto offset = [&](int k) { return k == 0 ? 0 : m0 + (k - 1) * m1; };
    auto size_of = [&](int k) { return k == 0 ? m0 : m1; };
    out.blocks.resize(static_cast<size_t>(window + 1) * (window + 1));
    for (int k = 0; k <= window; ++k)
        for (int l = 0; l <= window; ++l)
            out.blocks[k * (window + 1) + l] =
                h_full.block(offset(k), offset(l), size_of(k), size_of(l));

    // interior Poisson residual: rows whose support stays inside trunc
    const int maxjump = std::max(spec.a_support(1e-13), spec.b_support(1e-13));
    const int row_cap = std::max(1, trunc_level - maxjump - 1);
    Matrix res = (Matrix::Identity(dim, dim) - p) * h_full -
                 (Matrix::Identity(dim, dim).leftCols(wdim) -
                  ColVec::Ones(dim) * pi_all.head(wdim));
    const int rdim = m0 + row_cap * m1;
    out.poisson_residual = max_abs(res.topRows(rdim));
    return out;
}

namespace {

struct SplitMix {
    std::uint64_t state;
    explicit SplitMix(std::uint64_t s) : state(s) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

struct Rng {
    std::uint64_t s[4];
    explicit Rng(std::uint64_t seed) {
        SplitMix sm(seed);
        for (auto& x : s) x = sm.next();
    }
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t next() {  // xoshiro256++
        const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }
    double uniform() {  // [0, 1)
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
};

double draw_service(const ServiceDist& svc, Rng& rng) {
    switch (svc.kind) {
        case ServiceDist::Kind::Exponential: return rng.exponential(svc.mu);
        case ServiceDist::Kind::Deterministic: return svc.det;
        case ServiceDist::Kind::Pareto:
            return svc.scale * (std::pow(1.0 - rng.uniform(), -1.0 / svc.shape) - 1.0);
        case ServiceDist::Kind::PhaseType: {
            const int n = static_cast<int>(svc.ph_t.rows());
            double u = rng.uniform(), acc = 0.0;
            int ph = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += svc.ph_alpha(i);
                if (u < acc) {
                    ph = i;
                    break;
                }
            }
            double t = 0.0;
            while (true) {
                const double rate = -svc.ph_t(ph, ph);
                t += rng.exponential(rate);
                double v = rng.uniform() * rate;
                double run = 0.0;
                int nxt = -1;
                for (int j = 0; j < n; ++j) {
                    if (j == ph) continue;
                    run += svc.ph_t(ph, j);
                    if (v < run) {
                        nxt = j;
                        break;
                    }
                }
                if (nxt < 0) return t;  // absorbed
                ph = nxt;
            }
        }
    }
    return 0.0;
}

long simulate_chunk(const MapSpec& map, const ServiceDist& svc, int n,
                    long arrivals, Rng rng) {
    const int m = map.m();
    const long capacity = n + 1;
    int phase = 0;
    long q = 0;
    bool busy = false;
    double remaining = 0.0;
    long lost = 0;
    long seen = 0;
    while (seen < arrivals) {
        const double rate = -map.lambda0(phase, phase);
        const double t_map = rng.exponential(rate);
        if (busy && remaining <= t_map) {
            // service completes first; MAP memoryless, so redraw afterwards
            if (--q > 0) remaining = draw_service(svc, rng);
            else busy = false;
            continue;
        }
        if (busy) remaining -= t_map;
        // MAP event: hidden transition or arrival
        double v = rng.uniform() * rate;
        double run = 0.0;
        bool arrival = false;
        bool chosen = false;
        int nxt = phase;
        for (int j = 0; j < m && !chosen; ++j) {
            if (j != phase) {
                run += map.lambda0(phase, j);
                if (v < run) {
                    nxt = j;
                    chosen = true;
                    break;
                }
            }
            run += map.lambda1(phase, j);
            if (v < run) {
                nxt = j;
                arrival = true;
                chosen = true;
            }
        }
        if (!chosen) continue;  // roundoff sliver at the top of the cdf
        phase = nxt;
        if (!arrival) continue;
        ++seen;
        if (q >= capacity) {
            ++lost;
        } else {
            ++q;
            if (!busy) {
                busy = true;
                remaining = draw_service(svc, rng);
            }
        }
    }
    return lost;
}

}  // namespace

McLoss mc_queue(const MapSpec& map, const ServiceDist& svc, int n,
                long arrivals, std::uint64_t seed) {
    if (arrivals < 100000)
        throw ValidationError("mc_queue: need at least 1e5 arrivals");
    constexpr int kChunks = 16;
    const long per = arrivals / kChunks;
    std::vector<long> lost(kChunks, 0);
    detail::parallel_for(kChunks, [&](std::size_t c) {
        SplitMix sm(seed);
        const std::uint64_t chunk_seed = sm.next() + 0x1000 * (c + 1);
        long todo = per + (static_cast<long>(c) == kChunks - 1
                               ? arrivals - per * kChunks
                               : 0);
        lost[c] = simulate_chunk(map, svc, n, todo, Rng(chunk_seed));
    });
    McLoss out;
    out.arrivals = arrivals;
    for (long l : lost) out.lost += l;
    out.estimate = static_cast<double>(out.lost) / arrivals;
    const double p = out.estimate;
    out.std_error = std::max(std::sqrt(p * (1.0 - p) / arrivals),
                             std::sqrt(static_cast<double>(out.lost) + 1.0) / arrivals);
    return out;
}

McOccupation r_occupation(const ChainSpec& spec, int k, long paths,
                          std::uint64_t seed) {
    if (k < 1) throw ValidationError("r_occupation: k must be >= 1");
    const int m1 = spec.m1();
    // sampling table for the homogeneous increments
    const int sup = spec.a_support(1e-12);
    std::vector<Matrix> a_cdf;  // cumulative over (m, j)
    std::vector<int> jumps;
    for (int m = -1; m <= sup; ++m) {
        a_cdf.push_back(spec.a(m));
        jumps.push_back(m);
    }

    McOccupation out;
    out.paths = paths;
    out.estimate = Matrix::Zero(m1, m1);
    out.std_error = Matrix::Zero(m1, m1);
    for (int i = 0; i < m1; ++i) {
        std::vector<double> sum(m1, 0.0), sumsq(m1, 0.0);
        SplitMix sm(seed + 77777 * (i + 1));
        Rng rng(sm.next());
        for (long pth = 0; pth < paths; ++pth) {
            int phase = i;
            long tau = -k;  // level relative to the target n+k
            std::vector<double> visits(m1, 0.0);
            for (int step = 0; step < 100000; ++step) {
                double u = rng.uniform();
                double run = 0.0;
                int jump = jumps.back(), nxt = m1 - 1;
                bool found = false;
                for (size_t t = 0; t < a_cdf.size() && !found; ++t)
                    for (int j = 0; j < m1 && !found; ++j) {
                        run += a_cdf[t](phase, j);
                        if (u < run) {
                            jump = jumps[t];
                            nxt = j;
                            found = true;
                        }
                    }
                tau += jump;
                phase = nxt;
                if (tau == 0) visits[phase] += 1.0;
                if (tau <= -1) break;
            }
            for (int j = 0; j < m1; ++j) {
                sum[j] += visits[j];
                sumsq[j] += visits[j] * visits[j];
            }
        }
        for (int j = 0; j < m1; ++j) {
            const double mean = sum[j] / paths;
            const double var = std::max(0.0, sumsq[j] / paths - mean * mean);
            out.estimate(i, j) = mean;
            out.std_error(i, j) = std::sqrt(var / paths);
        }
    }
    return out;
}

PowerSums power_partial_sums(const Matrix& p, const RowVec& pi, long n_max) {
    const int n = static_cast<int>(p.rows());
    const Matrix epi = ColVec::Ones(n) * pi;
    PowerSums out;
    out.d = Matrix::Identity(n, n) - epi;
    Matrix pow = Matrix::Identity(n, n);
    const double initial = 1.0;
    bool cesaro = false;
    Matrix cesaro_acc = out.d;
    long cesaro_terms = 1;
    for (long it = 1; it <= n_max; ++it) {
        pow = pow * p;
        Matrix inc = pow - epi;
        const double norm = max_abs(inc);
        out.n_used = it;
        out.last_increment = norm;
        out.d += inc;
        if (cesaro) {
            cesaro_acc += out.d;
            ++cesaro_terms;
        }
        if (norm < 1e-13) break;
        if (!cesaro && it == std::min<long>(2000, std::max<long>(n_max / 2, 2)) &&
            norm > 0.1 * initial) {
            cesaro = true;  // oscillating powers; average the partial sums
            cesaro_acc = out.d;
            cesaro_terms = 1;
        }
    }
    if (cesaro) {
        out.d = cesaro_acc / static_cast<double>(cesaro_terms);
        out.cesaro = true;
    }
    return out;
}

}  // namespace oracle
}  // namespace mg1
