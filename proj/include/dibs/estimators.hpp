#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dibs/bn_models.hpp"
#include "dibs/graph.hpp"
#include "dibs/latent.hpp"
#include "dibs/logsumexp.hpp"
#include "dibs/random.hpp"

namespace dibs {

struct EstimatorConfig {
    enum class Kind { ScoreFunction, GumbelSoftmax };
    Kind kind = Kind::GumbelSoftmax;
    int mc_samples = 128;
    double baseline = 0.0;     // score-function control constant b
    double tau = 1.0;          // relaxation temperature
    bool hard_forward = false; // evaluate gradients at hard samples, chain through soft

    void validate() const {
        if (mc_samples < 1) throw std::invalid_argument("EstimatorConfig: mc_samples >= 1");
        if (!(tau > 0.0)) throw std::invalid_argument("EstimatorConfig: tau > 0");
    }
};

/// Score-function (likelihood-ratio) estimate of grad_z E_{p(G|Z)}[f(G)]:
///   mean over samples of (f(G) - b) * grad_z log p(G | Z).
/// Unbiased for any constant b; works for arbitrary real-valued f on hard
/// graphs, no differentiability required.
template <class F>
Latent score_function_grad(const Latent& z, double alpha, F&& f_eval,
                           const EstimatorConfig& config, Rng& rng) {
    config.validate();
    const int d = z.d();
    const Mat logits = z.logits();
    Mat probs(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) probs(i, j) = (i == j) ? 0.0 : sigmoid(alpha * logits(i, j));

    Mat dlogits = Mat::Zero(d, d);
    Mat g = Mat::Zero(d, d);
    for (int s = 0; s < config.mc_samples; ++s) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) g(i, j) = rng.bernoulli(probs(i, j)) ? 1.0 : 0.0;
        const double weight = f_eval(static_cast<const Mat&>(g)) - config.baseline;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) dlogits(i, j) += weight * alpha * (g(i, j) - probs(i, j));
    }
    dlogits /= static_cast<double>(config.mc_samples);
    return z.chain_from_logits(dlogits);
}

/// Reparameterized (relaxed) estimate of grad_z E_{p(G|Z)}[f(G)] for f with a
/// gradient on soft graphs: mean over logistic draws of
///   grad_G f |_{G_tau(L, Z)} . grad_z G_tau(L, Z).
/// Biased for finite tau. The callable must be invocable as
///   double f(const Mat& g, Mat& grad_g_out).
/// With hard_forward set, f is evaluated at the thresholded (Gumbel-max) hard
/// sample while the chain rule keeps the soft relaxation's derivative.
template <class F>
Latent gumbel_softmax_grad(const Latent& z, double alpha, F&& f_eval,
                           const EstimatorConfig& config, Rng& rng) {
    config.validate();
    const int d = z.d();
    const Mat logits = z.logits();
    Mat dlogits = Mat::Zero(d, d);
    Mat soft(d, d), grad_g(d, d);
    for (int s = 0; s < config.mc_samples; ++s) {
        soft.setZero();
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j)
                    soft(i, j) = sigmoid(config.tau * (rng.logistic() + alpha * logits(i, j)));
        grad_g.setZero();
        if (config.hard_forward) {
            Mat hard = (soft.array() > 0.5).cast<double>();
            hard.diagonal().setZero();
            f_eval(static_cast<const Mat&>(hard), grad_g);
        } else {
            f_eval(static_cast<const Mat&>(soft), grad_g);
        }
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j)
                    dlogits(i, j) +=
                        grad_g(i, j) * config.tau * soft(i, j) * (1.0 - soft(i, j)) * alpha;
    }
    dlogits /= static_cast<double>(config.mc_samples);
    return z.chain_from_logits(dlogits);
}

// ---------------------------------------------------------------------------
// Posterior scores (the gradients SVGD transports along)

/// Score of the marginal latent posterior,
///   grad_z log p(Z | D) = grad_z log p(Z) + grad_z E[p(D|G)] / E[p(D|G)],
/// with the ratio term estimated by the score-function estimator on a shared
/// set of hard graph samples, entirely in log space. The model callable
/// returns log p(D | G) for hard G and may return -inf (e.g. cyclic graphs
/// under a marginal likelihood defined only on DAGs); such samples carry no
/// weight. If every sample is scored -inf the ratio term is zero.
template <class LogMarginal>
Latent marginal_posterior_score(const Latent& z, LogMarginal&& log_marginal,
                                const std::optional<GraphPriorSpec>& graph_prior,
                                const TemperatureState& state, const EstimatorConfig& config,
                                Rng& rng) {
    config.validate();
    state.validate();
    const int d = z.d();
    const Mat logits = z.logits();
    Mat probs(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) probs(i, j) = (i == j) ? 0.0 : sigmoid(state.alpha * logits(i, j));

    const int S = config.mc_samples;
    std::vector<Mat> samples(S, Mat::Zero(d, d));
    std::vector<double> log_lik(S);
    for (int s = 0; s < S; ++s) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) samples[s](i, j) = rng.bernoulli(probs(i, j)) ? 1.0 : 0.0;
        log_lik[s] = log_marginal(static_cast<const Mat&>(samples[s]));
    }

    Mat dlogits = Mat::Zero(d, d);
    if (config.baseline == 0.0) {
        const Vec w = softmax_weights(log_lik);
        for (int s = 0; s < S; ++s) {
            if (w[s] == 0.0) continue;
            dlogits += (w[s] * state.alpha) * (samples[s] - probs);
        }
    } else {
        // Signed log-sum-exp ratio with the baseline term folded in:
        // numerator entries (exp(l_s) - b) c_s expand to 2S signed terms.
        const double log_b = std::log(std::abs(config.baseline));
        const double sign_b = config.baseline > 0.0 ? 1.0 : -1.0;
        std::vector<double> log_abs(2 * S), signs(2 * S);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                if (i == j) continue;
                for (int s = 0; s < S; ++s) {
                    const double c = state.alpha * (samples[s](i, j) - probs(i, j));
                    const double lc = std::log(std::abs(c));
                    const double sc = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
                    log_abs[s] = log_lik[s] + lc;
                    signs[s] = sc;
                    log_abs[S + s] = log_b + lc;
                    signs[S + s] = -sign_b * sc;
                }
                const SignedLog num = signed_logsumexp(log_abs, signs);
                const double den = logsumexp(log_lik);
                dlogits(i, j) = den == kNegInf ? 0.0 : num.sign * std::exp(num.log_abs - den);
            }
        }
    }
    dlogits.diagonal().setZero();

    Latent score = latent_prior_score(z, state, config.mc_samples, rng, graph_prior);
    score += z.chain_from_logits(dlogits);
    return score;
}

/// Joint model requirements for joint_posterior_score and the SVGD runner:
///   int d() const;
///   int param_dim() const;
///   double log_lik(const Mat& g, const Vec& theta) const;          // hard or soft g
///   void soft_batch(const std::vector<Mat>& gs, const Vec& theta,
///                   std::vector<double>& log_lik, std::vector<Mat>& grad_g) const;
///   void hard_batch(const std::vector<Mat>& gs, const Vec& theta,
///                   std::vector<double>& log_lik, std::vector<Vec>& grad_theta) const;
struct JointScore {
    Latent dz;
    Vec dtheta;
};

/// Scores of the joint latent posterior (graph embedding and parameters).
/// The Z ratio uses the relaxed reparameterization over soft samples; because
/// p(Theta | G) is graph-independent at full dimensionality it cancels from
/// the self-normalized weights. The Theta ratio is self-normalized over a
/// shared set of hard graph samples.
template <class Model>
JointScore joint_posterior_score(const Latent& z, const Vec& theta, const Model& model,
                                 const std::optional<GraphPriorSpec>& graph_prior,
                                 const TemperatureState& state, const EstimatorConfig& config,
                                 Rng& rng) {
    config.validate();
    state.validate();
    const int d = z.d();
    if (model.d() != d) throw std::invalid_argument("joint_posterior_score: dimension mismatch");
    const Mat logits = z.logits();
    const int S = config.mc_samples;

    // Z-gradient: soft relaxed samples.
    std::vector<Mat> soft(S, Mat::Zero(d, d));
    for (int s = 0; s < S; ++s)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j)
                    soft[s](i, j) = sigmoid(config.tau * (rng.logistic() + state.alpha * logits(i, j)));

    std::vector<double> log_lik_soft(S);
    std::vector<Mat> grad_g(S);
    if (config.hard_forward) {
        std::vector<Mat> hard(S);
        for (int s = 0; s < S; ++s) {
            hard[s] = (soft[s].array() > 0.5).cast<double>();
            hard[s].diagonal().setZero();
        }
        model.soft_batch(hard, theta, log_lik_soft, grad_g);
    } else {
        model.soft_batch(soft, theta, log_lik_soft, grad_g);
    }
    const Vec wz = softmax_weights(log_lik_soft);
    Mat dlogits = Mat::Zero(d, d);
    for (int s = 0; s < S; ++s) {
        if (wz[s] == 0.0) continue;
        dlogits.array() += wz[s] * grad_g[s].array() * config.tau * soft[s].array() *
                           (1.0 - soft[s].array()) * state.alpha;
    }
    dlogits.diagonal().setZero();

    // Theta-gradient: hard samples, self-normalized ratio.
    Mat probs(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) probs(i, j) = (i == j) ? 0.0 : sigmoid(state.alpha * logits(i, j));
    std::vector<Mat> hard(S, Mat::Zero(d, d));
    for (int s = 0; s < S; ++s)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) hard[s](i, j) = rng.bernoulli(probs(i, j)) ? 1.0 : 0.0;
    std::vector<double> log_lik_hard(S);
    std::vector<Vec> grad_theta(S);
    model.hard_batch(hard, theta, log_lik_hard, grad_theta);
    const Vec wt = softmax_weights(log_lik_hard);

    JointScore out;
    out.dtheta = std_normal_score(theta);
    for (int s = 0; s < S; ++s)
        if (wt[s] != 0.0) out.dtheta += wt[s] * grad_theta[s];

    out.dz = latent_prior_score(z, state, config.mc_samples, rng, graph_prior);
    out.dz += z.chain_from_logits(dlogits);
    return out;
}

// ---------------------------------------------------------------------------
// Concrete joint models

/// Linear Gaussian joint model with batched likelihood evaluation: the per-
/// sample masked-weight products are stacked into two wide matrix products
/// per batch. An optional row subset with rescaling supports minibatching.
class LinGaussJointModel {
public:
    LinGaussJointModel(Mat data, double sigma_sq, double scale = 1.0)
        : x_(std::move(data)), sigma_sq_(sigma_sq), scale_(scale) {
        if (!(sigma_sq_ > 0.0)) throw std::invalid_argument("LinGaussJointModel: sigma_sq > 0");
        if (x_.rows() < 1) throw std::invalid_argument("LinGaussJointModel: empty data");
    }

    int d() const { return static_cast<int>(x_.cols()); }
    int n() const { return static_cast<int>(x_.rows()); }
    int param_dim() const { return d() * d(); }

    LinGaussJointModel subset(const std::vector<int>& rows) const {
        Mat sub(static_cast<int>(rows.size()), x_.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<int>(r)) = x_.row(rows[r]);
        const double scale = static_cast<double>(x_.rows()) / static_cast<double>(rows.size());
        return LinGaussJointModel(std::move(sub), sigma_sq_, scale);
    }

    double log_lik(const Mat& g, const Vec& theta) const {
        const int dd = d();
        const Mat w = g.cwiseProduct(reshape(theta));
        const double rss = (x_ - x_ * w).squaredNorm();
        return scale_ * (detail::gauss_const(n() * dd, sigma_sq_) - rss / (2.0 * sigma_sq_));
    }

    void soft_batch(const std::vector<Mat>& gs, const Vec& theta, std::vector<double>& log_lik,
                    std::vector<Mat>& grad_g) const {
        const Mat th = reshape(theta);
        const int S = static_cast<int>(gs.size());
        const int dd = d();
        Mat wcat(dd, dd * S);
        for (int s = 0; s < S; ++s) wcat.middleCols(s * dd, dd) = gs[s].cwiseProduct(th);
        Mat resid = -(x_ * wcat);
        for (int s = 0; s < S; ++s) resid.middleCols(s * dd, dd) += x_;
        const Mat dwcat = x_.transpose() * resid;
        log_lik.resize(S);
        grad_g.resize(S);
        const double c = detail::gauss_const(n() * dd, sigma_sq_);
        for (int s = 0; s < S; ++s) {
            log_lik[s] = scale_ * (c - resid.middleCols(s * dd, dd).squaredNorm() / (2.0 * sigma_sq_));
            grad_g[s] = (scale_ / sigma_sq_) * dwcat.middleCols(s * dd, dd).cwiseProduct(th);
            grad_g[s].diagonal().setZero();
        }
    }

    void hard_batch(const std::vector<Mat>& gs, const Vec& theta, std::vector<double>& log_lik,
                    std::vector<Vec>& grad_theta) const {
        const Mat th = reshape(theta);
        const int S = static_cast<int>(gs.size());
        const int dd = d();
        Mat wcat(dd, dd * S);
        for (int s = 0; s < S; ++s) wcat.middleCols(s * dd, dd) = gs[s].cwiseProduct(th);
        Mat resid = -(x_ * wcat);
        for (int s = 0; s < S; ++s) resid.middleCols(s * dd, dd) += x_;
        const Mat dwcat = x_.transpose() * resid;
        log_lik.resize(S);
        grad_theta.resize(S);
        const double c = detail::gauss_const(n() * dd, sigma_sq_);
        for (int s = 0; s < S; ++s) {
            log_lik[s] = scale_ * (c - resid.middleCols(s * dd, dd).squaredNorm() / (2.0 * sigma_sq_));
            Mat dth = (scale_ / sigma_sq_) * dwcat.middleCols(s * dd, dd).cwiseProduct(gs[s]);
            dth.diagonal().setZero();
            grad_theta[s] = Vec(dd * dd);
            for (int i = 0; i < dd; ++i)
                for (int j = 0; j < dd; ++j) grad_theta[s](i * dd + j) = dth(i, j);
        }
    }

    double sigma_sq() const { return sigma_sq_; }

private:
    Mat reshape(const Vec& theta) const {
        const int dd = d();
        Mat th(dd, dd);
        for (int i = 0; i < dd; ++i)
            for (int j = 0; j < dd; ++j) th(i, j) = theta(i * dd + j);
        return th;
    }

    Mat x_;
    double sigma_sq_;
    double scale_;
};

/// Per-node feed-forward joint model; batch members loop over samples.
class FfnJointModel {
public:
    FfnJointModel(Mat data, FfnArch arch, double sigma_sq, double scale = 1.0)
        : x_(std::move(data)), arch_(std::move(arch)), sigma_sq_(sigma_sq), scale_(scale) {
        if (!(sigma_sq_ > 0.0)) throw std::invalid_argument("FfnJointModel: sigma_sq > 0");
    }

    int d() const { return arch_.d; }
    int n() const { return static_cast<int>(x_.rows()); }
    int param_dim() const { return arch_.total_params(); }

    FfnJointModel subset(const std::vector<int>& rows) const {
        Mat sub(static_cast<int>(rows.size()), x_.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<int>(r)) = x_.row(rows[r]);
        const double scale = static_cast<double>(x_.rows()) / static_cast<double>(rows.size());
        return FfnJointModel(std::move(sub), arch_, sigma_sq_, scale);
    }

    double log_lik(const Mat& g, const Vec& theta) const {
        const FfnParams p = unflatten_ffn(theta, arch_, sigma_sq_);
        return scale_ * ffn_log_lik(Dataset(x_), g, p);
    }

    void soft_batch(const std::vector<Mat>& gs, const Vec& theta, std::vector<double>& log_lik,
                    std::vector<Mat>& grad_g) const {
        const FfnParams p = unflatten_ffn(theta, arch_, sigma_sq_);
        const Dataset data(x_);
        const int S = static_cast<int>(gs.size());
        log_lik.resize(S);
        grad_g.resize(S);
        for (int s = 0; s < S; ++s) {
            auto [dg, dp] = ffn_grads(data, gs[s], p);
            log_lik[s] = scale_ * ffn_log_lik(data, gs[s], p);
            grad_g[s] = scale_ * dg;
        }
    }

    void hard_batch(const std::vector<Mat>& gs, const Vec& theta, std::vector<double>& log_lik,
                    std::vector<Vec>& grad_theta) const {
        const FfnParams p = unflatten_ffn(theta, arch_, sigma_sq_);
        const Dataset data(x_);
        const int S = static_cast<int>(gs.size());
        log_lik.resize(S);
        grad_theta.resize(S);
        for (int s = 0; s < S; ++s) {
            auto [dg, dp] = ffn_grads(data, gs[s], p);
            log_lik[s] = scale_ * ffn_log_lik(data, gs[s], p);
            grad_theta[s] = scale_ * flatten(dp);
        }
    }

    const FfnArch& arch() const { return arch_; }
    double sigma_sq() const { return sigma_sq_; }

private:
    Mat x_;
    FfnArch arch_;
    double sigma_sq_;
    double scale_;
};

}  // namespace dibs
