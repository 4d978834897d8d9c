#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "dibs/graph.hpp"
#include "dibs/latent.hpp"
#include "dibs/random.hpp"

namespace dibs::testing {

/// Central finite difference of a scalar function of one matrix entry.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Entrywise central finite differences of f with respect to a matrix.
inline Mat fd_matrix_grad(const std::function<double(const Mat&)>& f, const Mat& at,
                          double h = 1e-6) {
    Mat grad(at.rows(), at.cols());
    Mat x = at;
    for (int i = 0; i < at.rows(); ++i) {
        for (int j = 0; j < at.cols(); ++j) {
            const double orig = x(i, j);
            x(i, j) = orig + h;
            const double up = f(x);
            x(i, j) = orig - h;
            const double down = f(x);
            x(i, j) = orig;
            grad(i, j) = (up - down) / (2.0 * h);
        }
    }
    return grad;
}

/// Finite differences of f with respect to a latent embedding.
inline Latent fd_latent_grad(const std::function<double(const Latent&)>& f, const Latent& at,
                             double h = 1e-6) {
    Latent grad = Latent::zeros_like(at);
    Latent x = at;
    for (int i = 0; i < at.u.rows(); ++i) {
        for (int j = 0; j < at.u.cols(); ++j) {
            const double orig = x.u(i, j);
            x.u(i, j) = orig + h;
            const double up = f(x);
            x.u(i, j) = orig - h;
            const double down = f(x);
            x.u(i, j) = orig;
            grad.u(i, j) = (up - down) / (2.0 * h);
        }
    }
    if (at.kind == LatentKind::Bilinear) {
        for (int i = 0; i < at.v.rows(); ++i) {
            for (int j = 0; j < at.v.cols(); ++j) {
                const double orig = x.v(i, j);
                x.v(i, j) = orig + h;
                const double up = f(x);
                x.v(i, j) = orig - h;
                const double down = f(x);
                x.v(i, j) = orig;
                grad.v(i, j) = (up - down) / (2.0 * h);
            }
        }
    }
    return grad;
}

/// All directed graphs (not only DAGs) on d nodes; exponential, keep d <= 3.
inline std::vector<Mat> enumerate_all_digraphs(int d) {
    const int slots = d * (d - 1);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) pairs.push_back({i, j});
    std::vector<Mat> graphs;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << slots); ++bits) {
        Mat g = Mat::Zero(d, d);
        for (int s = 0; s < slots; ++s)
            if (bits & (std::uint64_t{1} << s)) g(pairs[s].first, pairs[s].second) = 1.0;
        graphs.push_back(std::move(g));
    }
    return graphs;
}

/// Probability of a hard graph under the edge-probability matrix.
inline double graph_prob(const Mat& g, const Mat& probs) {
    double p = 1.0;
    const int d = static_cast<int>(g.rows());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) p *= g(i, j) != 0.0 ? probs(i, j) : 1.0 - probs(i, j);
    return p;
}

/// Exact grad_z E_{p(G|Z)}[f(G)] by enumerating every directed graph.
inline Latent exact_expectation_grad(const Latent& z, double alpha,
                                     const std::function<double(const Mat&)>& f) {
    const int d = z.d();
    const Mat probs = edge_prob_matrix(z, alpha);
    Latent total = Latent::zeros_like(z);
    for (const Mat& g : enumerate_all_digraphs(d)) {
        const double w = f(g) * graph_prob(g, probs);
        Latent sc = grad_log_graph_given_z(g, z, alpha);
        sc *= w;
        total += sc;
    }
    return total;
}

/// Number of labeled DAGs on n nodes by the alternating recurrence
/// a_n = sum_k (-1)^(k+1) C(n,k) 2^(k(n-k)) a_(n-k).
inline long long dag_count_recurrence(int n) {
    std::vector<long long> a(n + 1, 0);
    a[0] = 1;
    auto binom = [](int nn, int kk) {
        long long r = 1;
        for (int i = 1; i <= kk; ++i) r = r * (nn - kk + i) / i;
        return r;
    };
    for (int m = 1; m <= n; ++m) {
        long long total = 0;
        for (int k = 1; k <= m; ++k) {
            const long long term = binom(m, k) * (1LL << (k * (m - k))) * a[m - k];
            total += (k % 2 == 1) ? term : -term;
        }
        a[m] = total;
    }
    return a[n];
}

/// Adaptive Simpson quadrature on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline Mat gaussian_data(int n, int d, Rng& rng) {
    Mat x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
    return x;
}

inline Latent random_latent(int d, int k, Rng& rng, double scale = 1.0,
                            LatentKind kind = LatentKind::Bilinear) {
    Latent z;
    z.kind = kind;
    if (kind == LatentKind::Bilinear) {
        z.u = Mat(k, d);
        z.v = Mat(k, d);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < d; ++j) {
                z.u(i, j) = scale * rng.normal();
                z.v(i, j) = scale * rng.normal();
            }
    } else {
        z.u = Mat(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) z.u(i, j) = scale * rng.normal();
        z.v = Mat();
    }
    return z;
}

inline Mat random_soft_matrix(int d, Rng& rng) {
    Mat g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = i == j ? 0.0 : rng.uniform();
    return g;
}

inline Mat random_dag(int d, double p, Rng& rng) {
    return sample_random_dag(GraphPriorSpec::erdos_renyi(p), d, rng);
}

inline Mat random_cyclic_graph(int d, Rng& rng) {
    while (true) {
        Mat g = Mat::Zero(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j && rng.bernoulli(0.4)) g(i, j) = 1.0;
        if (!is_acyclic(g)) return g;
    }
}

}  // namespace dibs::testing
