#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dibs/bn_models.hpp"
#include "dibs/graph.hpp"

namespace dibs {

/// Normal-Wishart hyperparameters for the BGe marginal likelihood. Zero
/// values are resolved against the node count at scorer construction:
/// alpha_omega defaults to d + 2 and the diagonal Wishart inverse scale to
/// t = alpha_mu * (alpha_omega - d - 1) / (alpha_mu + 1).
struct BgeHyper {
    double alpha_mu = 1.0;
    double alpha_omega = 0.0;
    double t_scale = 0.0;
};

/// Closed-form Gaussian marginal likelihood that scores Markov equivalent
/// DAGs equally. The score decomposes over node families
///     log p(D | G) = sum_j [ log p(d_{Pa_j + j}) - log p(d_{Pa_j}) ]
/// which makes single-edge moves cheap: only the affected families change.
/// Subset log-determinants of the posterior matrix R are cached by bitmask.
class BgeScorer {
public:
    explicit BgeScorer(const Mat& data, BgeHyper hyper = {}) {
        n_ = static_cast<int>(data.rows());
        d_ = static_cast<int>(data.cols());
        if (n_ < 1) throw std::invalid_argument("BgeScorer: need at least one observation");
        hyper_ = hyper;
        if (hyper_.alpha_omega == 0.0) hyper_.alpha_omega = d_ + 2.0;
        if (hyper_.t_scale == 0.0)
            hyper_.t_scale = hyper_.alpha_mu * (hyper_.alpha_omega - d_ - 1.0) / (hyper_.alpha_mu + 1.0);
        if (!(hyper_.alpha_mu > 0.0))
            throw std::invalid_argument("BgeScorer: alpha_mu must be positive");
        if (!(hyper_.alpha_omega > d_ + 1.0))
            throw std::invalid_argument("BgeScorer: alpha_omega must exceed d + 1");

        // Posterior matrix R = T + S_N + (N a_mu / (N + a_mu)) xbar xbar^T
        // for prior mean zero and T = t I.
        const Vec xbar = data.colwise().mean().transpose();
        Mat centered = data;
        centered.rowwise() -= xbar.transpose();
        r_ = Mat::Identity(d_, d_) * hyper_.t_scale;
        r_ += centered.transpose() * centered;
        r_ += (n_ * hyper_.alpha_mu / (n_ + hyper_.alpha_mu)) * (xbar * xbar.transpose());
    }

    int d() const { return d_; }
    int n() const { return n_; }
    const BgeHyper& hyper() const { return hyper_; }

    static std::uint64_t parent_mask(const Mat& g, int node) {
        std::uint64_t mask = 0;
        const int d = static_cast<int>(g.rows());
        for (int i = 0; i < d; ++i)
            if (i != node && g(i, node) != 0.0) mask |= (std::uint64_t{1} << i);
        return mask;
    }

    /// log p(d_{Pa + node}) - log p(d_{Pa}) for one node family.
    double log_family_score(int node, std::uint64_t parents) const {
        const int l = popcount(parents);
        const double n = n_;
        const double am = hyper_.alpha_mu;
        const double aw = hyper_.alpha_omega;
        const double df_prior = aw - d_ + l + 1.0;
        const double df_post = n + df_prior;
        double score = -0.5 * n * std::log(M_PI) + 0.5 * (std::log(am) - std::log(n + am));
        score += std::lgamma(0.5 * df_post) - std::lgamma(0.5 * df_prior);
        score += 0.5 * (aw - d_ + 2.0 * l + 1.0) * std::log(hyper_.t_scale);
        score += 0.5 * (df_post - 1.0) * logdet(parents);
        score -= 0.5 * df_post * logdet(parents | (std::uint64_t{1} << node));
        return score;
    }

    double log_marginal(const Mat& g) const {
        if (static_cast<int>(g.rows()) != d_)
            throw std::invalid_argument("BgeScorer: dimension mismatch");
        if (!is_acyclic(g)) throw std::invalid_argument("BgeScorer: graph is cyclic");
        double total = 0.0;
        for (int j = 0; j < d_; ++j) total += log_family_score(j, parent_mask(g, j));
        return total;
    }

    /// Marginal over a subset of node families; used for interventional data
    /// where intervened nodes' factors are removed.
    double log_marginal_skipping(const Mat& g, const std::vector<int>& skip) const {
        if (!is_acyclic(g)) throw std::invalid_argument("BgeScorer: graph is cyclic");
        std::vector<bool> s(d_, false);
        for (int t : skip) {
            if (t < 0 || t >= d_) throw std::invalid_argument("BgeScorer: skip index out of range");
            s[t] = true;
        }
        double total = 0.0;
        for (int j = 0; j < d_; ++j)
            if (!s[j]) total += log_family_score(j, parent_mask(g, j));
        return total;
    }

private:
    static int popcount(std::uint64_t x) {
        int c = 0;
        while (x) {
            x &= x - 1;
            ++c;
        }
        return c;
    }

    double logdet(std::uint64_t mask) const {
        if (mask == 0) return 0.0;
        {
            std::lock_guard<std::mutex> lock(*cache_mu_);
            auto it = logdet_cache_.find(mask);
            if (it != logdet_cache_.end()) return it->second;
        }
        std::vector<int> idx;
        for (int i = 0; i < d_; ++i)
            if (mask & (std::uint64_t{1} << i)) idx.push_back(i);
        const int l = static_cast<int>(idx.size());
        Mat sub(l, l);
        for (int a = 0; a < l; ++a)
            for (int b = 0; b < l; ++b) sub(a, b) = r_(idx[a], idx[b]);
        const Eigen::LLT<Mat> llt(sub);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("BgeScorer: posterior matrix not positive definite");
        double ld = 0.0;
        for (int a = 0; a < l; ++a) ld += 2.0 * std::log(llt.matrixL()(a, a));
        {
            std::lock_guard<std::mutex> lock(*cache_mu_);
            if (logdet_cache_.size() > (1u << 20)) logdet_cache_.clear();
            logdet_cache_.emplace(mask, ld);
        }
        return ld;
    }

    int n_ = 0;
    int d_ = 0;
    BgeHyper hyper_;
    Mat r_;
    mutable std::unordered_map<std::uint64_t, double> logdet_cache_;
    mutable std::unique_ptr<std::mutex> cache_mu_ = std::make_unique<std::mutex>();
};

inline double bge_log_marginal(const Dataset& data, const Mat& g, BgeHyper hyper = {}) {
    return BgeScorer(data.x, hyper).log_marginal(g);
}

// ---------------------------------------------------------------------------
// Conjugate evidence for the explicit linear Gaussian model: with standard
// normal weight priors and known noise, each node's marginal is a Gaussian
//     X_j | X_Pa  ~  N(0, sigma^2 I_N + X_Pa X_Pa^T)
// evaluated with the Woodbury identity on the parent Gram matrix. This is the
// exact integral of p(Theta) p(D | G, Theta) over the masked weights.
class LinGaussEvidence {
public:
    LinGaussEvidence(const Mat& data, double sigma_sq) : x_(data), sigma_sq_(sigma_sq) {
        if (!(sigma_sq > 0.0)) throw std::invalid_argument("LinGaussEvidence: sigma_sq > 0");
        n_ = static_cast<int>(data.rows());
        d_ = static_cast<int>(data.cols());
    }

    double log_family_score(int node, std::uint64_t parents) const {
        const std::uint64_t key = (static_cast<std::uint64_t>(node) << 56) ^ parents;
        {
            std::lock_guard<std::mutex> lock(*cache_mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        std::vector<int> idx;
        for (int i = 0; i < d_; ++i)
            if (parents & (std::uint64_t{1} << i)) idx.push_back(i);
        const int l = static_cast<int>(idx.size());
        const Vec y = x_.col(node);
        double logdet_cov;
        double quad;
        if (l == 0) {
            logdet_cov = n_ * std::log(sigma_sq_);
            quad = y.squaredNorm() / sigma_sq_;
        } else {
            Mat f(n_, l);
            for (int a = 0; a < l; ++a) f.col(a) = x_.col(idx[a]);
            const Mat gram = Mat::Identity(l, l) * sigma_sq_ + f.transpose() * f;
            const Eigen::LLT<Mat> llt(gram);
            double ld_gram = 0.0;
            for (int a = 0; a < l; ++a) ld_gram += 2.0 * std::log(llt.matrixL()(a, a));
            logdet_cov = (n_ - l) * std::log(sigma_sq_) + ld_gram;
            const Vec fty = f.transpose() * y;
            quad = (y.squaredNorm() - fty.dot(llt.solve(fty))) / sigma_sq_;
        }
        const double score = -0.5 * (n_ * std::log(2.0 * M_PI) + logdet_cov + quad);
        std::lock_guard<std::mutex> lock(*cache_mu_);
        cache_.emplace(key, score);
        return score;
    }

    double log_marginal(const Mat& g) const {
        if (!is_acyclic(g)) throw std::invalid_argument("LinGaussEvidence: graph is cyclic");
        double total = 0.0;
        for (int j = 0; j < d_; ++j) total += log_family_score(j, BgeScorer::parent_mask(g, j));
        return total;
    }

    double log_marginal_skipping(const Mat& g, const std::vector<int>& skip) const {
        if (!is_acyclic(g)) throw std::invalid_argument("LinGaussEvidence: graph is cyclic");
        std::vector<bool> s(d_, false);
        for (int t : skip) s[t] = true;
        double total = 0.0;
        for (int j = 0; j < d_; ++j)
            if (!s[j]) total += log_family_score(j, BgeScorer::parent_mask(g, j));
        return total;
    }

private:
    Mat x_;
    double sigma_sq_;
    int n_ = 0;
    int d_ = 0;
    mutable std::unordered_map<std::uint64_t, double> cache_;
    mutable std::unique_ptr<std::mutex> cache_mu_ = std::make_unique<std::mutex>();
};

}  // namespace dibs
