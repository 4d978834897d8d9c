#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>

#include "dibs/graph.hpp"
#include "dibs/random.hpp"

namespace dibs {

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

enum class LatentKind {
    Bilinear,  // edge logit (i, j) is the inner product u_i . v_j
    Scalar,    // edge logit (i, j) is the matrix entry u(i, j); v unused
};

/// Latent graph representation Z. Bilinear: u, v are k x d with one column
/// per node. Scalar ablation: u is d x d and v is empty.
struct Latent {
    Mat u;
    Mat v;
    LatentKind kind = LatentKind::Bilinear;

    int d() const {
        return kind == LatentKind::Bilinear ? static_cast<int>(u.cols())
                                            : static_cast<int>(u.rows());
    }
    int k() const { return kind == LatentKind::Bilinear ? static_cast<int>(u.rows()) : 1; }

    /// Matrix of raw edge logits u_i . v_j (or u(i, j) in scalar mode).
    Mat logits() const {
        if (kind == LatentKind::Bilinear) return u.transpose() * v;
        return u;
    }

    /// Pull a logit-space gradient back onto (u, v).
    Latent chain_from_logits(const Mat& dlogits) const {
        Latent g;
        g.kind = kind;
        if (kind == LatentKind::Bilinear) {
            g.u = v * dlogits.transpose();
            g.v = u * dlogits;
        } else {
            g.u = dlogits;
            g.v = Mat();
        }
        return g;
    }

    static Latent zeros_like(const Latent& z) {
        Latent g;
        g.kind = z.kind;
        g.u = Mat::Zero(z.u.rows(), z.u.cols());
        g.v = z.kind == LatentKind::Bilinear ? Mat::Zero(z.v.rows(), z.v.cols()) : Mat();
        return g;
    }

    Latent& operator+=(const Latent& o) {
        u += o.u;
        if (kind == LatentKind::Bilinear) v += o.v;
        return *this;
    }
    Latent& operator*=(double s) {
        u *= s;
        if (kind == LatentKind::Bilinear) v *= s;
        return *this;
    }
    double squared_norm() const {
        return u.squaredNorm() + (kind == LatentKind::Bilinear ? v.squaredNorm() : 0.0);
    }
    double dot(const Latent& o) const {
        double r = u.cwiseProduct(o.u).sum();
        if (kind == LatentKind::Bilinear) r += v.cwiseProduct(o.v).sum();
        return r;
    }
    bool all_finite() const {
        return u.allFinite() && (kind != LatentKind::Bilinear || v.allFinite());
    }
};

/// Annealing and prior state: edge sharpness alpha, acyclicity strength beta,
/// relaxation temperature tau, prior scale sigma_z.
struct TemperatureState {
    double alpha = 1.0;
    double beta = 0.0;
    double tau = 1.0;
    double sigma_z = 1.0;

    static TemperatureState with_default_sigma(double alpha, double beta, int k) {
        TemperatureState s;
        s.alpha = alpha;
        s.beta = beta;
        s.sigma_z = 1.0 / std::sqrt(static_cast<double>(k));
        return s;
    }

    void validate() const {
        if (!(alpha > 0.0) || !(tau > 0.0) || !(sigma_z > 0.0) || beta < 0.0)
            throw std::invalid_argument("TemperatureState: require alpha, tau, sigma_z > 0 and beta >= 0");
    }
};

/// Edge probabilities sigmoid(alpha * logit), zero diagonal.
inline Mat edge_prob_matrix(const Latent& z, double alpha) {
    Mat p = z.logits();
    const int d = z.d();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) p(i, j) = (i == j) ? 0.0 : sigmoid(alpha * p(i, j));
    return p;
}

/// Independent Bernoulli draw of a hard graph from the edge probabilities.
/// Entries are consumed in row-major order for reproducibility.
inline Mat sample_graph(const Latent& z, double alpha, Rng& rng) {
    const Mat logits = z.logits();
    const int d = z.d();
    Mat g = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) g(i, j) = rng.bernoulli(sigmoid(alpha * logits(i, j))) ? 1.0 : 0.0;
    return g;
}

/// The single graph implied by Z in the zero-temperature limit:
/// edge (i, j) present iff its logit is strictly positive.
inline Mat limit_graph(const Latent& z) {
    const Mat logits = z.logits();
    const int d = z.d();
    Mat g = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && logits(i, j) > 0.0) g(i, j) = 1.0;
    return g;
}

/// Relaxed reparameterized sample: entries sigmoid_tau(l_ij + alpha * logit),
/// zero diagonal. l must be i.i.d. Logistic(0, 1); thresholding the result at
/// 0.5 recovers an exact hard sample of p(G | Z).
inline Mat gumbel_soft_sample(const Latent& z, double alpha, double tau, const Mat& logistic_noise) {
    const Mat logits = z.logits();
    const int d = z.d();
    Mat g = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) g(i, j) = sigmoid(tau * (logistic_noise(i, j) + alpha * logits(i, j)));
    return g;
}

inline Mat sample_logistic_matrix(int d, Rng& rng) {
    Mat l(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) l(i, j) = rng.logistic();
    return l;
}

/// Exact gradient of log p(g | z) for a hard graph g: per entry
/// alpha * (g_ij - sigmoid(alpha * logit_ij)) pulled back onto (u, v).
inline Latent grad_log_graph_given_z(const Mat& g, const Latent& z, double alpha) {
    const Mat logits = z.logits();
    const int d = z.d();
    Mat dlogits = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) dlogits(i, j) = alpha * (g(i, j) - sigmoid(alpha * logits(i, j)));
    return z.chain_from_logits(dlogits);
}

/// Score of the latent prior:
///   -beta * grad_z E_{p(G|Z)}[h(G)]  -  Z / sigma_z^2
/// with the expectation gradient estimated by the reparameterized relaxation
/// (mc_samples soft draws). An optional graph prior contributes
/// grad_z log f(G_alpha(Z)) through the edge-probability matrix.
inline Latent latent_prior_score(const Latent& z, const TemperatureState& state, int mc_samples,
                                 Rng& rng, const std::optional<GraphPriorSpec>& graph_prior = {}) {
    state.validate();
    if (mc_samples < 1) throw std::invalid_argument("latent_prior_score: mc_samples >= 1");
    const int d = z.d();
    const Mat logits = z.logits();

    Mat dlogits_acc = Mat::Zero(d, d);
    if (state.beta > 0.0) {
        for (int s = 0; s < mc_samples; ++s) {
            const Mat noise = sample_logistic_matrix(d, rng);
            Mat soft = Mat::Zero(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    if (i != j) soft(i, j) = sigmoid(state.tau * (noise(i, j) + state.alpha * logits(i, j)));
            const Mat dh = acyclicity_penalty_grad(soft);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    if (i != j)
                        dlogits_acc(i, j) += dh(i, j) * state.tau * soft(i, j) * (1.0 - soft(i, j)) * state.alpha;
        }
        dlogits_acc *= -state.beta / static_cast<double>(mc_samples);
    }

    if (graph_prior) {
        Mat p = Mat::Zero(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) p(i, j) = sigmoid(state.alpha * logits(i, j));
        const Mat dprior = log_graph_prior_grad(p, *graph_prior);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) dlogits_acc(i, j) += dprior(i, j) * state.alpha * p(i, j) * (1.0 - p(i, j));
    }

    Latent score = z.chain_from_logits(dlogits_acc);
    const double inv_var = 1.0 / (state.sigma_z * state.sigma_z);
    score.u -= inv_var * z.u;
    if (z.kind == LatentKind::Bilinear) score.v -= inv_var * z.v;
    return score;
}

/// Gaussian-factor draw of the latent prior, used for particle initialization.
inline Latent sample_latent_prior(int d, int k, double sigma_z, LatentKind kind, Rng& rng) {
    Latent z;
    z.kind = kind;
    if (kind == LatentKind::Bilinear) {
        z.u = Mat(k, d);
        z.v = Mat(k, d);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < d; ++j) z.u(i, j) = rng.normal(0.0, sigma_z);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < d; ++j) z.v(i, j) = rng.normal(0.0, sigma_z);
    } else {
        z.u = Mat(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) z.u(i, j) = rng.normal(0.0, sigma_z);
        z.v = Mat();
    }
    return z;
}

}  // namespace dibs
