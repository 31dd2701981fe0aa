#include "mg1/map_queue.hpp"

#include "mg1/gth.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mg1 {

MapSpec::MapSpec(Matrix l0, Matrix l1)
    : lambda0(std::move(l0)), lambda1(std::move(l1)) {
    const int n = static_cast<int>(lambda0.rows());
    if (lambda0.cols() != n || lambda1.rows() != n || lambda1.cols() != n)
        throw ValidationError("MapSpec: matrices must be square and same size");
    for (int i = 0; i < n; ++i) {
        if (lambda0(i, i) >= 0.0)
            throw ValidationError("MapSpec: Lambda0 diagonal must be negative");
        for (int j = 0; j < n; ++j) {
            if (i != j && lambda0(i, j) < 0.0)
                throw ValidationError("MapSpec: Lambda0 off-diagonal must be >= 0");
            if (lambda1(i, j) < 0.0)
                throw ValidationError("MapSpec: Lambda1 must be nonnegative");
        }
    }
    const ColVec rows = generator() * ones(n);
    if (rows.cwiseAbs().maxCoeff() > 1e-12)
        throw ValidationError("MapSpec: (Lambda0 + Lambda1)e must vanish");
    if (n > 1 && !pattern_irreducible(generator()))
        throw ValidationError("MapSpec: generator is reducible");
    if (!(rate() > 0.0)) throw ValidationError("MapSpec: arrival rate must be positive");
}

RowVec MapSpec::varpi() const {
    const int n = m();
    double theta = 0.0;
    for (int i = 0; i < n; ++i) theta = std::max(theta, -generator()(i, i));
    Matrix p = Matrix::Identity(n, n) + generator() / (1.05 * theta + 1e-30);
    return gth_stationary(p);
}

double MapSpec::rate() const { return (varpi() * lambda1 * ones(m()))(0); }

ServiceDist ServiceDist::exponential(double mu) {
    if (!(mu > 0.0)) throw ValidationError("exponential service: mu must be > 0");
    ServiceDist s;
    s.kind = Kind::Exponential;
    s.mu = mu;
    return s;
}

ServiceDist ServiceDist::deterministic(double b) {
    if (!(b > 0.0)) throw ValidationError("deterministic service: b must be > 0");
    ServiceDist s;
    s.kind = Kind::Deterministic;
    s.det = b;
    return s;
}

ServiceDist ServiceDist::pareto(double shape, double scale) {
    if (!(shape > 1.0) || !(scale > 0.0))
        throw ValidationError("pareto service: need shape > 1 and scale > 0");
    ServiceDist s;
    s.kind = Kind::Pareto;
    s.shape = shape;
    s.scale = scale;
    return s;
}

ServiceDist ServiceDist::phase_type(RowVec alpha, Matrix t) {
    ServiceDist s;
    s.kind = Kind::PhaseType;
    s.ph_alpha = std::move(alpha);
    s.ph_t = std::move(t);
    if (s.ph_t.rows() != s.ph_t.cols() || s.ph_alpha.size() != s.ph_t.rows())
        throw ValidationError("phase-type service: inconsistent dimensions");
    if (std::abs(s.ph_alpha.sum() - 1.0) > 1e-12)
        throw ValidationError("phase-type service: alpha must sum to 1");
    return s;
}

double ServiceDist::mean() const {
    switch (kind) {
        case Kind::Exponential: return 1.0 / mu;
        case Kind::Deterministic: return det;
        case Kind::Pareto: return scale / (shape - 1.0);
        case Kind::PhaseType: {
            Eigen::PartialPivLU<Matrix> lu(-ph_t);
            return (ph_alpha * lu.solve(ones(ph_t.rows())))(0);
        }
    }
    return 0.0;
}

bool ServiceDist::second_moment_finite() const {
    return kind != Kind::Pareto || shape > 2.0;
}

double ServiceDist::survivor(double x) const {
    if (x < 0.0) return 1.0;
    switch (kind) {
        case Kind::Exponential: return std::exp(-mu * x);
        case Kind::Deterministic: return x < det ? 1.0 : 0.0;
        case Kind::Pareto: return std::pow(1.0 + x / scale, -shape);
        case Kind::PhaseType: {
            // alpha exp(T x) e by scaled uniformized series
            const int n = static_cast<int>(ph_t.rows());
            double theta = 0.0;
            for (int i = 0; i < n; ++i) theta = std::max(theta, -ph_t(i, i));
            Matrix p = Matrix::Identity(n, n) + ph_t / theta;
            RowVec v = ph_alpha;
            RowVec acc = RowVec::Zero(n);
            double logw = -theta * x;  // log Poisson weight, j = 0
            for (int j = 0; j < 10000; ++j) {
                if (j > 0) logw += std::log(theta * x) - std::log(double(j));
                acc += std::exp(logw) * v;
                v = v * p;
                if (j > theta * x && std::exp(logw) < 1e-18) break;
            }
            return std::min(1.0, std::max(0.0, acc.sum()));
        }
    }
    return 0.0;
}

double ServiceDist::equilibrium_tail(double x) const {
    if (x <= 0.0) return 1.0;
    switch (kind) {
        case Kind::Exponential: return std::exp(-mu * x);
        case Kind::Deterministic: return std::max(0.0, 1.0 - x / det);
        case Kind::Pareto: return std::pow(1.0 + x / scale, 1.0 - shape);
        case Kind::PhaseType: {
            // equilibrium PH has alpha_re proportional to alpha (-T)^{-1}
            Eigen::PartialPivLU<Matrix> lu(Matrix(-ph_t.transpose()));
            RowVec w = lu.solve(ph_alpha.transpose()).transpose();
            ServiceDist tmp = *this;
            tmp.ph_alpha = w / w.sum();
            return tmp.survivor(x);
        }
    }
    return 0.0;
}

bool ServiceDist::equilibrium_subexponential() const {
    return kind == Kind::Pareto;
}

bool ServiceDist::sqrt_equilibrium_long_tailed() const {
    return kind == Kind::Pareto;
}

std::string ServiceDist::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Exponential: os << "exponential(mu=" << mu << ")"; break;
        case Kind::Deterministic: os << "deterministic(b=" << det << ")"; break;
        case Kind::Pareto: os << "pareto(shape=" << shape << ",scale=" << scale << ")"; break;
        case Kind::PhaseType: os << "phase-type(" << ph_t.rows() << " phases)"; break;
    }
    return os.str();
}

namespace {

// Poisson-mixture weights w_j = E[ e^{-theta S} (theta S)^j / j! ].
std::vector<double> poisson_mixture_weights(const ServiceDist& svc, double theta,
                                            double tol, long j_cap) {
    std::vector<double> w;
    switch (svc.kind) {
        case ServiceDist::Kind::Exponential: {
            const double q = theta / (theta + svc.mu);
            double term = svc.mu / (theta + svc.mu);
            double total = 0.0;
            while (total < 1.0 - tol && static_cast<long>(w.size()) < j_cap) {
                w.push_back(term);
                total += term;
                term *= q;
            }
            break;
        }
        case ServiceDist::Kind::Deterministic: {
            const double lt = theta * svc.det;
            double logw = -lt;
            double total = 0.0;
            for (long j = 0; total < 1.0 - tol && j < j_cap; ++j) {
                if (j > 0) logw += std::log(lt) - std::log(double(j));
                const double val = std::exp(logw);
                w.push_back(val);
                total += val;
            }
            break;
        }
        case ServiceDist::Kind::PhaseType: {
            const int n = static_cast<int>(svc.ph_t.rows());
            Eigen::PartialPivLU<Matrix> lu(theta * Matrix::Identity(n, n) - svc.ph_t);
            ColVec t_exit = -svc.ph_t * ones(n);
            ColVec y = lu.solve(t_exit);
            double total = 0.0;
            while (total < 1.0 - tol && static_cast<long>(w.size()) < j_cap) {
                const double val = (svc.ph_alpha * y)(0);
                w.push_back(val);
                total += val;
                y = theta * lu.solve(y);
            }
            break;
        }
        case ServiceDist::Kind::Pareto: {
            // adaptive panel quadrature on [0, x*], Gauss-Legendre 32,
            // with the x > x* remainder below tol by choice of x*
            static const double node[16] = {
                0.0483076656877383162, 0.1444719615827964934, 0.2392873622521370745,
                0.3318686022821276497, 0.4213512761306353454, 0.5068999089322293900,
                0.5877157572407623290, 0.6630442669302152009, 0.7321821187402896804,
                0.7944837959679424069, 0.8493676137325699701, 0.8963211557660521240,
                0.9349060759377396892, 0.9647622555875064307, 0.9856115115452683354,
                0.9972638618494815635};
            static const double wt[16] = {
                0.0965400885147278006, 0.0956387200792748594, 0.0938443990808045654,
                0.0911738786957638847, 0.0876520930044038111, 0.0833119242269467552,
                0.0781938957870703065, 0.0723457941088485062, 0.0658222227763618468,
                0.0586840934785355471, 0.0509980592623761762, 0.0428358980222266807,
                0.0342738629130214331, 0.0253920653092620595, 0.0162743947309056706,
                0.0070186100094700966};
            const double xstar =
                svc.scale * (std::pow(tol, -1.0 / svc.shape) - 1.0);
            const long jmax = static_cast<long>(
                std::min<double>(static_cast<double>(j_cap),
                                 theta * xstar + 12.0 * std::sqrt(theta * xstar + 9.0) + 32.0));
            w.assign(jmax + 1, 0.0);
            const double h = 4.0 / theta;
            const long panels = static_cast<long>(xstar / h) + 1;
            for (long p = 0; p < panels; ++p) {
                const double a = p * h, b = std::min(xstar, (p + 1) * h);
                if (a >= b) break;
                const double c = 0.5 * (a + b), r = 0.5 * (b - a);
                for (int q = 0; q < 32; ++q) {
                    const double x = q < 16 ? c - r * node[q] : c + r * node[q - 16];
                    const double gw = r * wt[q % 16];
                    const double dens = svc.shape / svc.scale *
                                        std::pow(1.0 + x / svc.scale, -svc.shape - 1.0);
                    const double quad = gw * dens;
                    // windowed Poisson pmf around theta x
                    const double lt = theta * x;
                    const long j0 = std::min<long>(jmax, static_cast<long>(lt));
                    double logp0 = -lt + j0 * std::log(std::max(lt, 1e-300)) -
                                   std::lgamma(double(j0) + 1.0);
                    double pj = std::exp(logp0);
                    for (long j = j0; j <= jmax; ++j) {  // upward
                        w[j] += quad * pj;
                        pj *= lt / double(j + 1);
                        if (pj < 1e-20 && j > j0 + 4) break;
                    }
                    pj = std::exp(logp0);
                    for (long j = j0 - 1; j >= 0; --j) {  // downward
                        pj *= double(j + 1) / std::max(lt, 1e-300);
                        w[static_cast<size_t>(j)] += quad * pj;
                        if (pj < 1e-20 && j < j0 - 4) break;
                    }
                }
            }
            break;
        }
    }
    if (w.empty()) throw ConvergenceError("poisson_mixture_weights: empty", 0.0);
    return w;
}

}  // namespace

EmbeddedChain embed_chain(const MapSpec& map, const ServiceDist& svc, int k_max,
                          double tol) {
    const int m = map.m();
    const double beta1 = svc.mean();
    const double lambda = map.rate();
    const double rho = lambda * beta1;
    if (!(rho < 1.0)) {
        std::ostringstream os;
        os << "embed_chain: rho = " << rho << " must be below 1";
        throw ValidationError(os.str());
    }

    double theta = 0.0;
    for (int i = 0; i < m; ++i) theta = std::max(theta, -map.lambda0(i, i));
    theta *= 1.05;
    const Matrix k0 = Matrix::Identity(m, m) + map.lambda0 / theta;
    const Matrix k1 = map.lambda1 / theta;

    auto w = poisson_mixture_weights(svc, theta, tol, 4000000);
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= wsum;  // exact unit mass after truncation
    const long jmax = static_cast<long>(w.size()) - 1;
    if (k_max < 0) k_max = static_cast<int>(std::min<long>(jmax, 4096));

    // counting coefficients C(n) = Sum_j w_j [z^n] (K0 + z K1)^j
    const int n_store = k_max + 2;  // n = 0..k_max+1
    std::vector<Matrix> c(n_store, Matrix::Zero(m, m));
    std::vector<Matrix> d_prev(1, Matrix::Identity(m, m));
    c[0] += w[0] * d_prev[0];
    Matrix a_total = w[0] * Matrix::Identity(m, m);
    Matrix kpow = Matrix::Identity(m, m);
    const Matrix ksum = k0 + k1;
    for (long j = 1; j <= jmax; ++j) {
        const int width = static_cast<int>(std::min<long>(j, n_store - 1));
        std::vector<Matrix> d_cur(width + 1);
        for (int n = 0; n <= width; ++n) {
            d_cur[n] = (n < static_cast<int>(d_prev.size()))
                           ? Matrix(d_prev[n] * k0)
                           : Matrix::Zero(m, m);
            if (n >= 1 && n - 1 < static_cast<int>(d_prev.size()))
                d_cur[n] += d_prev[n - 1] * k1;
        }
        kpow = kpow * ksum;
        a_total += w[j] * kpow;
        if (w[j] > 0.0)
            for (int n = 0; n <= width; ++n) c[n] += w[j] * d_cur[n];
        d_prev = std::move(d_cur);
    }

    // fold the invisible beyond-k_max mass into the last block
    Matrix seen = Matrix::Zero(m, m);
    for (const auto& blk : c) seen += blk;
    Matrix fold = a_total - seen;
    const double fold_mass = inf_norm(fold);
    c[n_store - 1] += fold.cwiseMax(0.0);

    std::map<int, Matrix> a_head, b_head;
    for (int n = 0; n < n_store; ++n) a_head[n - 1] = c[n];
    Eigen::PartialPivLU<Matrix> lu(-map.lambda0);
    const Matrix u = lu.solve(map.lambda1);
    b_head[-1] = a_head[-1];
    for (int kk = 0; kk <= k_max + 1; ++kk) b_head[kk] = u * a_head[kk - 1];

    EmbeddedChain out{ChainSpec(m, m, std::move(a_head), std::move(b_head),
                                FiniteSupport{}),
                      rho, 0.0, 0.0, fold_mass, k_max};
    out.sigma = out.spec.sigma();
    out.rho_identity_residual = std::abs(out.sigma - (rho - 1.0));
    return out;
}

double loss_exact(const MapSpec& map, const ServiceDist& svc,
                  const EmbeddedChain& embedded, int n) {
    if (n < 1) throw ValidationError("loss_exact: N must be >= 1");
    if (embedded.k_max < n + 1)
        throw ValidationError("loss_exact: embedded chain truncated below N");
    LevelVector pin = solve_finite(build_finite(embedded.spec, n));
    Eigen::PartialPivLU<Matrix> lu(-map.lambda0);
    const double idle = (pin.v0 * lu.solve(ones(map.m())))(0);
    const double beta1 = svc.mean();
    const double p0 = idle / (idle + beta1);
    const double loss = 1.0 - (1.0 - p0) / embedded.rho;
    return std::min(1.0, std::max(0.0, loss));
}

double loss_exact(const MapSpec& map, const ServiceDist& svc, int n) {
    EmbeddedChain embedded = embed_chain(map, svc, n + 64);
    return loss_exact(map, svc, embedded, n);
}

double loss_asymptotic(const MapSpec& map, const ServiceDist& svc, int n) {
    if (n < 0) throw ValidationError("loss_asymptotic: N must be >= 0");
    if (!svc.equilibrium_subexponential())
        throw InapplicableError(
            "loss_asymptotic: needs a subexponential equilibrium service tail "
            "(" + svc.describe() + " is not)");
    if (!svc.second_moment_finite())
        throw InapplicableError(
            "loss_asymptotic: needs E[S^2] < infinity (shape must exceed 2)");
    const double rho = map.rate() * svc.mean();
    const double tail = svc.equilibrium_tail(n / map.rate());
    return rho * tail / (1.0 + rho * tail);
}

double lambda_identity(const MapSpec& map, const ServiceDist& svc,
                       const EmbeddedChain& embedded, const LevelVector& pi) {
    (void)embedded;
    Eigen::PartialPivLU<Matrix> lu(-map.lambda0);
    const double idle = (pi.v0 * lu.solve(ones(map.m())))(0);
    return std::abs(1.0 / map.rate() - idle - svc.mean());
}

}  // namespace mg1
