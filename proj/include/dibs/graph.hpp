#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dibs/random.hpp"

namespace dibs {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Adjacency matrices are d x d with zero diagonal; entry (i, j) refers to the
// edge i -> j. Hard graphs hold {0, 1}, soft (relaxed) graphs values in [0, 1].

/// True iff the hard graph has a topological order (Kahn's algorithm).
inline bool is_acyclic(const Mat& g) {
    const int d = static_cast<int>(g.rows());
    std::vector<int> indeg(d, 0);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            if (i != j && g(i, j) != 0.0) ++indeg[j];
    std::vector<int> stack;
    stack.reserve(d);
    for (int j = 0; j < d; ++j)
        if (indeg[j] == 0) stack.push_back(j);
    int seen = 0;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        ++seen;
        for (int v = 0; v < d; ++v) {
            if (v != u && g(u, v) != 0.0 && --indeg[v] == 0) stack.push_back(v);
        }
    }
    return seen == d;
}

/// Topological order of a DAG; throws on cyclic input.
inline std::vector<int> topological_order(const Mat& g) {
    const int d = static_cast<int>(g.rows());
    std::vector<int> indeg(d, 0), order;
    order.reserve(d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            if (i != j && g(i, j) != 0.0) ++indeg[j];
    std::vector<int> stack;
    for (int j = 0; j < d; ++j)
        if (indeg[j] == 0) stack.push_back(j);
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        order.push_back(u);
        for (int v = 0; v < d; ++v)
            if (v != u && g(u, v) != 0.0 && --indeg[v] == 0) stack.push_back(v);
    }
    if (static_cast<int>(order.size()) != d)
        throw std::invalid_argument("topological_order: graph is cyclic");
    return order;
}

/// A^e for integer e >= 0 by repeated squaring.
inline Mat matrix_power(Mat a, int e) {
    const int d = static_cast<int>(a.rows());
    Mat result = Mat::Identity(d, d);
    while (e > 0) {
        if (e & 1) result = (result * a).eval();
        e >>= 1;
        if (e > 0) a = (a * a).eval();
    }
    return result;
}

/// Cyclicity h(g) = tr[(I + g/d)^d] - d. Exactly 0 on hard DAGs, > 0 on hard
/// cyclic graphs; defined for soft g as well.
inline double acyclicity_penalty(const Mat& g) {
    const int d = static_cast<int>(g.rows());
    const Mat a = Mat::Identity(d, d) + g / static_cast<double>(d);
    return matrix_power(a, d).trace() - static_cast<double>(d);
}

/// Gradient of the cyclicity: ((I + g/d)^(d-1))^T.
inline Mat acyclicity_penalty_grad(const Mat& g) {
    const int d = static_cast<int>(g.rows());
    const Mat a = Mat::Identity(d, d) + g / static_cast<double>(d);
    return matrix_power(a, d - 1).transpose();
}

// ---------------------------------------------------------------------------
// Essential graphs (CPDAGs)

/// Partially directed representation of a Markov equivalence class.
struct Cpdag {
    int d = 0;
    std::set<std::pair<int, int>> directed;    // ordered (i, j): i -> j
    std::set<std::pair<int, int>> undirected;  // stored with i < j

    bool operator==(const Cpdag& other) const {
        return d == other.d && directed == other.directed && undirected == other.undirected;
    }
    bool operator!=(const Cpdag& other) const { return !(*this == other); }
    bool operator<(const Cpdag& other) const {
        if (d != other.d) return d < other.d;
        if (directed != other.directed) return directed < other.directed;
        return undirected < other.undirected;
    }
};

namespace detail {

// Edge marks over the skeleton during orientation: 0 none, 1 i->j, 2 undirected.
struct PdagWork {
    int d;
    std::vector<int> mark;  // d*d, mark[i*d+j] == 1 means i->j compelled

    explicit PdagWork(int dd) : d(dd), mark(dd * dd, 0) {}
    bool adjacent(int i, int j) const { return mark[i * d + j] != 0 || mark[j * d + i] != 0; }
    bool has_directed(int i, int j) const { return mark[i * d + j] == 1; }
    bool has_undirected(int i, int j) const { return mark[i * d + j] == 2; }
    void orient(int i, int j) {
        mark[i * d + j] = 1;
        mark[j * d + i] = 0;
    }
};

// Orientation rules applied to closure. The input is always the pattern of a
// DAG (skeleton + v-structures), for which rules 1-3 are complete.
inline void meek_closure(PdagWork& w) {
    const int d = w.d;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                if (!w.has_undirected(i, j)) continue;
                bool orient_ij = false;
                // R1: k -> i, i - j, k and j non-adjacent  =>  i -> j
                for (int k = 0; k < d && !orient_ij; ++k)
                    if (w.has_directed(k, i) && !w.adjacent(k, j)) orient_ij = true;
                // R2: i -> k -> j and i - j  =>  i -> j
                for (int k = 0; k < d && !orient_ij; ++k)
                    if (w.has_directed(i, k) && w.has_directed(k, j)) orient_ij = true;
                // R3: i - k1 -> j, i - k2 -> j, k1 and k2 non-adjacent  =>  i -> j
                for (int k1 = 0; k1 < d && !orient_ij; ++k1) {
                    if (!(w.has_undirected(i, k1) && w.has_directed(k1, j))) continue;
                    for (int k2 = k1 + 1; k2 < d && !orient_ij; ++k2) {
                        if (!(w.has_undirected(i, k2) && w.has_directed(k2, j))) continue;
                        if (!w.adjacent(k1, k2)) orient_ij = true;
                    }
                }
                if (orient_ij) {
                    w.orient(i, j);
                    changed = true;
                }
            }
        }
    }
}

}  // namespace detail

/// Essential graph of the input DAG's Markov equivalence class: v-structures
/// are compelled, remaining edges oriented by the closure rules or left
/// undirected. Two DAGs map to equal Cpdags iff they are Markov equivalent.
inline Cpdag dag_to_cpdag(const Mat& g) {
    const int d = static_cast<int>(g.rows());
    if (!is_acyclic(g)) throw std::invalid_argument("dag_to_cpdag: input is cyclic");

    detail::PdagWork w(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && g(i, j) != 0.0) {
                w.mark[i * d + j] = 2;
                w.mark[j * d + i] = 2;
            }
    // Compel colliders i -> k <- j with i, j non-adjacent.
    for (int k = 0; k < d; ++k) {
        for (int i = 0; i < d; ++i) {
            if (i == k || g(i, k) == 0.0) continue;
            for (int j = i + 1; j < d; ++j) {
                if (j == k || g(j, k) == 0.0) continue;
                if (g(i, j) == 0.0 && g(j, i) == 0.0) {
                    w.orient(i, k);
                    w.orient(j, k);
                }
            }
        }
    }
    detail::meek_closure(w);

    Cpdag out;
    out.d = d;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (w.has_directed(i, j)) out.directed.insert({i, j});
            if (i < j && w.has_undirected(i, j) && w.has_undirected(j, i))
                out.undirected.insert({i, j});
        }
    }
    return out;
}

/// Structural Hamming distance between essential graphs: one count per node
/// pair whose mark (absent / i->j / j->i / undirected) differs.
inline int shd(const Cpdag& a, const Cpdag& b) {
    if (a.d != b.d) throw std::invalid_argument("shd: dimension mismatch");
    const int d = a.d;
    auto mark_of = [d](const Cpdag& c, int i, int j) -> int {
        if (c.directed.count({i, j})) return 1;
        if (c.directed.count({j, i})) return 2;
        if (c.undirected.count({std::min(i, j), std::max(i, j)})) return 3;
        return 0;
    };
    int dist = 0;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (mark_of(a, i, j) != mark_of(b, i, j)) ++dist;
    return dist;
}

// ---------------------------------------------------------------------------
// Random graphs and graph priors

struct GraphPriorSpec {
    enum class Kind { ErdosRenyi, ScaleFree };
    Kind kind = Kind::ErdosRenyi;
    double q = 0.0;  // edge probability (Erdos-Renyi only)

    static GraphPriorSpec erdos_renyi(double q) { return {Kind::ErdosRenyi, q}; }
    /// q = 4/(d-1), giving 2d edges in expectation.
    static GraphPriorSpec erdos_renyi_default(int d) {
        return {Kind::ErdosRenyi, std::min(1.0, 4.0 / (d - 1))};
    }
    static GraphPriorSpec scale_free() { return {Kind::ScaleFree, 0.0}; }
};

/// Random DAG. Erdos-Renyi: uniform node order, each compatible edge kept
/// independently with probability q. Scale-free: preferential attachment with
/// 2 out-edges per arriving node, oriented new -> old.
inline Mat sample_random_dag(const GraphPriorSpec& spec, int d, Rng& rng) {
    if (d < 2) throw std::invalid_argument("sample_random_dag: d must be >= 2");
    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    for (int i = d - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);

    Mat g = Mat::Zero(d, d);
    if (spec.kind == GraphPriorSpec::Kind::ErdosRenyi) {
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b)
                if (spec.q >= 1.0 || rng.bernoulli(spec.q)) g(order[a], order[b]) = 1.0;
    } else {
        std::vector<double> weight(d, 0.0);  // degree + 1 attachment weight
        for (int pos = 1; pos < d; ++pos) {
            const int arriving = order[pos];
            const int m = std::min(2, pos);
            std::set<int> targets;
            while (static_cast<int>(targets.size()) < m) {
                double total = 0.0;
                for (int p = 0; p < pos; ++p)
                    if (!targets.count(order[p])) total += weight[order[p]] + 1.0;
                double r = rng.uniform() * total;
                for (int p = 0; p < pos; ++p) {
                    const int cand = order[p];
                    if (targets.count(cand)) continue;
                    r -= weight[cand] + 1.0;
                    if (r <= 0.0) {
                        targets.insert(cand);
                        break;
                    }
                }
            }
            for (int t : targets) {
                g(arriving, t) = 1.0;
                weight[arriving] += 1.0;
                weight[t] += 1.0;
            }
        }
    }
    return g;
}

/// Unnormalized log prior over graphs; accepts soft matrices so it can be
/// composed into the latent prior through the edge-probability matrix.
inline double log_graph_prior(const Mat& g, const GraphPriorSpec& spec) {
    const int d = static_cast<int>(g.rows());
    if (spec.kind == GraphPriorSpec::Kind::ErdosRenyi) {
        if (!(spec.q > 0.0 && spec.q < 1.0))
            throw std::invalid_argument("log_graph_prior: q must be in (0, 1)");
        const double norm1 = g.sum();
        const double pairs = 0.5 * d * (d - 1);
        return norm1 * std::log(spec.q) + (pairs - norm1) * std::log(1.0 - spec.q);
    }
    // Scale-free: -3 * sum_i log(1 + in-degree(i)), in-degree = column sum.
    double lp = 0.0;
    for (int i = 0; i < d; ++i) lp -= 3.0 * std::log(1.0 + g.col(i).sum());
    return lp;
}

/// Entrywise gradient of log_graph_prior at a soft matrix.
inline Mat log_graph_prior_grad(const Mat& g, const GraphPriorSpec& spec) {
    const int d = static_cast<int>(g.rows());
    Mat grad(d, d);
    if (spec.kind == GraphPriorSpec::Kind::ErdosRenyi) {
        if (!(spec.q > 0.0 && spec.q < 1.0))
            throw std::invalid_argument("log_graph_prior_grad: q must be in (0, 1)");
        grad.setConstant(std::log(spec.q) - std::log(1.0 - spec.q));
    } else {
        for (int i = 0; i < d; ++i) grad.col(i).setConstant(-3.0 / (1.0 + g.col(i).sum()));
    }
    grad.diagonal().setZero();
    return grad;
}

}  // namespace dibs
