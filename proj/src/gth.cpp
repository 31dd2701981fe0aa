#include "mg1/gth.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

namespace mg1 {

namespace {

// Tarjan-style SCC via two BFS passes per component (Kosaraju).
std::vector<std::vector<int>> strongly_connected(const Matrix& p) {
    const int n = static_cast<int>(p.rows());
    std::vector<std::vector<int>> adj(n), radj(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (p(i, j) > 0.0 && i != j) {
                adj[i].push_back(j);
                radj[j].push_back(i);
            }
    std::vector<int> order;
    order.reserve(n);
    std::vector<char> seen(n, 0);
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        // iterative post-order
        std::vector<std::pair<int, size_t>> stack{{s, 0}};
        seen[s] = 1;
        while (!stack.empty()) {
            auto& [v, idx] = stack.back();
            if (idx < adj[v].size()) {
                int w = adj[v][idx++];
                if (!seen[w]) {
                    seen[w] = 1;
                    stack.emplace_back(w, 0);
                }
            } else {
                order.push_back(v);
                stack.pop_back();
            }
        }
    }
    std::vector<int> comp(n, -1);
    int nc = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (comp[*it] >= 0) continue;
        std::vector<int> bfs{*it};
        comp[*it] = nc;
        while (!bfs.empty()) {
            int v = bfs.back();
            bfs.pop_back();
            for (int w : radj[v])
                if (comp[w] < 0) {
                    comp[w] = nc;
                    bfs.push_back(w);
                }
        }
        ++nc;
    }
    std::vector<std::vector<int>> classes(nc);
    for (int i = 0; i < n; ++i) classes[comp[i]].push_back(i);
    return classes;
}

}  // namespace

std::vector<std::vector<int>> closed_classes(const Matrix& p) {
    const int n = static_cast<int>(p.rows());
    auto classes = strongly_connected(p);
    std::vector<int> comp(n);
    for (size_t c = 0; c < classes.size(); ++c)
        for (int v : classes[c]) comp[v] = static_cast<int>(c);
    std::vector<std::vector<int>> closed;
    for (auto& cls : classes) {
        bool leaves = false;
        for (int v : cls) {
            for (int j = 0; j < n && !leaves; ++j)
                if (p(v, j) > 0.0 && comp[j] != comp[v]) leaves = true;
            if (leaves) break;
        }
        if (!leaves) {
            std::sort(cls.begin(), cls.end());
            closed.push_back(cls);
        }
    }
    return closed;
}

bool pattern_irreducible(const Matrix& p) {
    return strongly_connected(p).size() == 1;
}

RowVec gth_stationary(const Matrix& p) {
    const int n = static_cast<int>(p.rows());
    if (p.cols() != n) throw ValidationError("gth: matrix must be square");
    if (n == 1) {
        RowVec x(1);
        x(0) = 1.0;
        return x;
    }
    auto closed = closed_classes(p);
    if (closed.size() != 1) {
        std::ostringstream os;
        os << "gth: " << closed.size() << " closed communicating classes:";
        for (const auto& cls : closed) {
            os << " {";
            for (size_t i = 0; i < cls.size(); ++i) os << (i ? "," : "") << cls[i];
            os << "}";
        }
        throw ValidationError(os.str());
    }
    if (closed[0].size() != static_cast<size_t>(n)) {
        // Transient states exist; the stationary vector is supported on
        // the closed class. Solve there and pad with zeros.
        const auto& cls = closed[0];
        const int m = static_cast<int>(cls.size());
        Matrix q(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) q(i, j) = p(cls[i], cls[j]);
        RowVec sub = gth_stationary(q);
        RowVec x = RowVec::Zero(n);
        for (int i = 0; i < m; ++i) x(cls[i]) = sub(i);
        return x;
    }

    Matrix w = p;
    std::vector<double> pivot(n, 0.0);
    for (int k = n - 1; k >= 1; --k) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += w(k, j);
        pivot[k] = s;
        for (int j = 0; j < k; ++j) w(k, j) /= s;
        // rank-one update keeps all quantities nonnegative (no subtraction)
        for (int i = 0; i < k; ++i) {
            const double wik = w(i, k);
            if (wik == 0.0) continue;
            for (int j = 0; j < k; ++j) w(i, j) += wik * w(k, j);
        }
    }
    RowVec x = RowVec::Zero(n);
    x(0) = 1.0;
    for (int k = 1; k < n; ++k) {
        double acc = 0.0;
        for (int i = 0; i < k; ++i) acc += x(i) * w(i, k);
        x(k) = acc / pivot[k];
    }
    x /= x.sum();
    return x;
}

}  // namespace mg1
