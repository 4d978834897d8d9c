#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dibs/graph.hpp"
#include "dibs/random.hpp"

namespace dibs {

// ---------------------------------------------------------------------------
// Datasets

/// N x d observation matrix, optionally carrying intervention targets whose
/// columns were clamped during generation.
struct Dataset {
    Mat x;
    std::vector<int> targets;
    double clamp_value = 0.0;

    Dataset() = default;
    explicit Dataset(Mat m) : x(std::move(m)) {
        if (x.rows() < 1) throw std::invalid_argument("Dataset: need at least one observation");
        if (!x.allFinite()) throw std::invalid_argument("Dataset: non-finite values");
    }
    Dataset(Mat m, std::vector<int> tg, double value) : Dataset(std::move(m)) {
        targets = std::move(tg);
        clamp_value = value;
        for (int t : targets)
            if (t < 0 || t >= d()) throw std::invalid_argument("Dataset: target index out of range");
    }

    int n() const { return static_cast<int>(x.rows()); }
    int d() const { return static_cast<int>(x.cols()); }
};

// ---------------------------------------------------------------------------
// Linear Gaussian BNs:  x ~ N((G o Theta)^T x, sigma^2 I)

struct LinGaussParams {
    Mat theta;              // d x d edge weights; masked by the graph
    double sigma_sq = 0.1;  // shared observation noise variance
};

namespace detail {
inline double gauss_const(int count, double sigma_sq) {
    return -0.5 * count * std::log(2.0 * M_PI * sigma_sq);
}
}  // namespace detail

/// Log likelihood under the mask parameterization; g may be hard or soft.
/// If skip is non-null, factors of the listed nodes are omitted (their
/// observed values still feed their children).
inline double lingauss_log_lik(const Dataset& data, const Mat& g, const LinGaussParams& params,
                               const std::vector<int>* skip = nullptr) {
    const int d = data.d();
    if (g.rows() != d || params.theta.rows() != d)
        throw std::invalid_argument("lingauss_log_lik: shape mismatch");
    if (!(params.sigma_sq > 0.0))
        throw std::invalid_argument("lingauss_log_lik: sigma_sq must be positive");
    const Mat w = g.cwiseProduct(params.theta);
    const Mat resid = data.x - data.x * w;
    std::vector<bool> keep(d, true);
    if (skip)
        for (int t : *skip) keep[t] = false;
    double rss = 0.0;
    int kept = 0;
    for (int j = 0; j < d; ++j) {
        if (!keep[j]) continue;
        rss += resid.col(j).squaredNorm();
        ++kept;
    }
    return detail::gauss_const(data.n() * kept, params.sigma_sq) - rss / (2.0 * params.sigma_sq);
}

/// Exact gradients of lingauss_log_lik with respect to the (soft) mask and
/// the weights. Diagonal entries are zeroed: self-loops are not modeled.
inline std::pair<Mat, Mat> lingauss_grads(const Dataset& data, const Mat& g,
                                          const LinGaussParams& params) {
    const int d = data.d();
    if (g.rows() != d || params.theta.rows() != d)
        throw std::invalid_argument("lingauss_grads: shape mismatch");
    const Mat w = g.cwiseProduct(params.theta);
    const Mat resid = data.x - data.x * w;
    const Mat dw = data.x.transpose() * resid / params.sigma_sq;
    Mat dg = dw.cwiseProduct(params.theta);
    Mat dtheta = dw.cwiseProduct(g);
    dg.diagonal().setZero();
    dtheta.diagonal().setZero();
    return {dg, dtheta};
}

// ---------------------------------------------------------------------------
// Nonlinear Gaussian BNs: per-node feed-forward networks on masked inputs,
// rectifier activations on all but the output layer.

struct FfnLayer {
    Mat w;
    Vec b;
};

struct FfnNodeParams {
    std::vector<FfnLayer> layers;
};

struct FfnParams {
    std::vector<FfnNodeParams> nodes;
    double sigma_sq = 0.1;
};

/// Layer widths for the per-node networks; dims = {d, hidden..., 1}.
struct FfnArch {
    int d = 0;
    std::vector<int> dims;

    static FfnArch dense(int d, int hidden = 5) { return {d, {d, hidden, 1}}; }

    int params_per_node() const {
        int p = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) p += dims[l + 1] * (dims[l] + 1);
        return p;
    }
    int total_params() const { return d * params_per_node(); }
};

inline FfnParams ffn_zero_params(const FfnArch& arch, double sigma_sq = 0.1) {
    FfnParams p;
    p.sigma_sq = sigma_sq;
    p.nodes.resize(arch.d);
    for (auto& node : p.nodes) {
        for (std::size_t l = 0; l + 1 < arch.dims.size(); ++l) {
            node.layers.push_back({Mat::Zero(arch.dims[l + 1], arch.dims[l]),
                                   Vec::Zero(arch.dims[l + 1])});
        }
    }
    return p;
}

namespace detail {

inline double ffn_forward(const FfnNodeParams& node, const Vec& input,
                          std::vector<Vec>* pre = nullptr, std::vector<Vec>* act = nullptr) {
    Vec a = input;
    if (act) act->push_back(a);
    const std::size_t n_layers = node.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Vec zl = node.layers[l].w * a + node.layers[l].b;
        if (pre) pre->push_back(zl);
        if (l + 1 < n_layers) {
            a = zl.cwiseMax(0.0);
            if (act) act->push_back(a);
        } else {
            a = zl;
        }
    }
    return a(0);
}

}  // namespace detail

/// Log likelihood of the nonlinear Gaussian BN; node i's mean is its network
/// applied to column-masked inputs g(:, i) o x. Accepts soft masks.
inline double ffn_log_lik(const Dataset& data, const Mat& g, const FfnParams& params,
                          const std::vector<int>* skip = nullptr) {
    const int d = data.d();
    if (g.rows() != d || static_cast<int>(params.nodes.size()) != d)
        throw std::invalid_argument("ffn_log_lik: shape mismatch");
    std::vector<bool> keep(d, true);
    if (skip)
        for (int t : *skip) keep[t] = false;
    double rss = 0.0;
    int kept = 0;
    for (int j = 0; j < d; ++j) {
        if (!keep[j]) continue;
        ++kept;
        for (int n = 0; n < data.n(); ++n) {
            const Vec masked = g.col(j).cwiseProduct(data.x.row(n).transpose());
            const double mean = detail::ffn_forward(params.nodes[j], masked);
            const double r = data.x(n, j) - mean;
            rss += r * r;
        }
    }
    return detail::gauss_const(data.n() * kept, params.sigma_sq) - rss / (2.0 * params.sigma_sq);
}

/// Hand-rolled backprop through the masked inputs. Returns the gradient with
/// respect to the (soft) mask and with respect to every weight and bias.
inline std::pair<Mat, FfnParams> ffn_grads(const Dataset& data, const Mat& g,
                                           const FfnParams& params) {
    const int d = data.d();
    if (g.rows() != d || static_cast<int>(params.nodes.size()) != d)
        throw std::invalid_argument("ffn_grads: shape mismatch");
    Mat dg = Mat::Zero(d, d);
    FfnParams grad;
    grad.sigma_sq = params.sigma_sq;
    grad.nodes.resize(d);
    for (int j = 0; j < d; ++j)
        for (const auto& layer : params.nodes[j].layers)
            grad.nodes[j].layers.push_back({Mat::Zero(layer.w.rows(), layer.w.cols()),
                                            Vec::Zero(layer.b.size())});

    for (int j = 0; j < d; ++j) {
        const auto& node = params.nodes[j];
        auto& gnode = grad.nodes[j];
        const std::size_t n_layers = node.layers.size();
        for (int n = 0; n < data.n(); ++n) {
            std::vector<Vec> pre, act;
            const Vec masked = g.col(j).cwiseProduct(data.x.row(n).transpose());
            const double mean = detail::ffn_forward(node, masked, &pre, &act);
            const double dout = (data.x(n, j) - mean) / params.sigma_sq;

            Vec delta(1);
            delta(0) = dout;
            for (int l = static_cast<int>(n_layers) - 1; l >= 0; --l) {
                gnode.layers[l].w += delta * act[l].transpose();
                gnode.layers[l].b += delta;
                Vec da = node.layers[l].w.transpose() * delta;
                if (l > 0) {
                    delta = da.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
                } else {
                    // da is now the gradient at the masked input.
                    dg.col(j) += da.cwiseProduct(data.x.row(n).transpose());
                }
            }
        }
    }
    dg.diagonal().setZero();
    return {dg, grad};
}

// ---------------------------------------------------------------------------
// Parameter prior: independent standard normals over every entry, at full
// graph-independent dimensionality.

inline double std_normal_log_prob(const Vec& flat) {
    return -0.5 * flat.size() * std::log(2.0 * M_PI) - 0.5 * flat.squaredNorm();
}

inline Vec std_normal_score(const Vec& flat) { return -flat; }

// ---------------------------------------------------------------------------
// Flat parameter transport (SVGD and MCMC move parameters as plain vectors)

inline Vec flatten(const LinGaussParams& p) {
    const int d = static_cast<int>(p.theta.rows());
    Vec out(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out(i * d + j) = p.theta(i, j);
    return out;
}

inline LinGaussParams unflatten_lingauss(const Vec& flat, int d, double sigma_sq) {
    LinGaussParams p;
    p.sigma_sq = sigma_sq;
    p.theta = Mat(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) p.theta(i, j) = flat(i * d + j);
    return p;
}

inline Vec flatten(const FfnParams& p) {
    int total = 0;
    for (const auto& node : p.nodes)
        for (const auto& layer : node.layers)
            total += static_cast<int>(layer.w.size() + layer.b.size());
    Vec out(total);
    int at = 0;
    for (const auto& node : p.nodes) {
        for (const auto& layer : node.layers) {
            for (int r = 0; r < layer.w.rows(); ++r)
                for (int c = 0; c < layer.w.cols(); ++c) out(at++) = layer.w(r, c);
            for (int r = 0; r < layer.b.size(); ++r) out(at++) = layer.b(r);
        }
    }
    return out;
}

inline FfnParams unflatten_ffn(const Vec& flat, const FfnArch& arch, double sigma_sq) {
    FfnParams p = ffn_zero_params(arch, sigma_sq);
    int at = 0;
    for (auto& node : p.nodes) {
        for (auto& layer : node.layers) {
            for (int r = 0; r < layer.w.rows(); ++r)
                for (int c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = flat(at++);
            for (int r = 0; r < layer.b.size(); ++r) layer.b(r) = flat(at++);
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Interventional likelihood: factors of intervened nodes are removed; their
// clamped values still feed their children.

inline double interventional_log_lik(const Dataset& data_int, const Mat& g,
                                     const LinGaussParams& params) {
    for (int t : data_int.targets)
        if (t < 0 || t >= data_int.d())
            throw std::invalid_argument("interventional_log_lik: target out of range");
    if (static_cast<int>(data_int.targets.size()) == data_int.d()) return 0.0;
    return lingauss_log_lik(data_int, g, params, &data_int.targets);
}

inline double interventional_log_lik(const Dataset& data_int, const Mat& g,
                                     const FfnParams& params) {
    for (int t : data_int.targets)
        if (t < 0 || t >= data_int.d())
            throw std::invalid_argument("interventional_log_lik: target out of range");
    if (static_cast<int>(data_int.targets.size()) == data_int.d()) return 0.0;
    return ffn_log_lik(data_int, g, params, &data_int.targets);
}

// ---------------------------------------------------------------------------
// Ancestral sampling

struct ClampSpec {
    std::vector<int> targets;
    double value = 0.0;
};

namespace detail {

template <class MeanFn>
Dataset ancestral_sample_impl(const Mat& g, double sigma_sq, int n, Rng& rng,
                              const std::optional<ClampSpec>& clamp, MeanFn&& mean_of) {
    const int d = static_cast<int>(g.rows());
    const std::vector<int> order = topological_order(g);
    std::vector<bool> clamped(d, false);
    double clamp_value = 0.0;
    if (clamp) {
        clamp_value = clamp->value;
        for (int t : clamp->targets) {
            if (t < 0 || t >= d) throw std::invalid_argument("ancestral_sample: target out of range");
            clamped[t] = true;
        }
    }
    Mat x(n, d);
    const double noise_sd = std::sqrt(sigma_sq);
    Vec row = Vec::Zero(d);
    for (int s = 0; s < n; ++s) {
        row.setZero();
        for (int node : order) {
            if (clamped[node]) {
                row(node) = clamp_value;
            } else {
                row(node) = mean_of(node, row) + noise_sd * rng.normal();
            }
        }
        x.row(s) = row.transpose();
    }
    if (clamp) return Dataset(std::move(x), clamp->targets, clamp_value);
    return Dataset(std::move(x));
}

}  // namespace detail

/// Draw n observations from the BN in topological order; clamped nodes are
/// fixed to the given value and excluded from stochastic generation.
inline Dataset ancestral_sample(const Mat& g, const LinGaussParams& params, int n, Rng& rng,
                                const std::optional<ClampSpec>& clamp = {}) {
    const Mat w = g.cwiseProduct(params.theta);
    return detail::ancestral_sample_impl(
        g, params.sigma_sq, n, rng, clamp,
        [&](int node, const Vec& row) { return w.col(node).dot(row); });
}

inline Dataset ancestral_sample(const Mat& g, const FfnParams& params, int n, Rng& rng,
                                const std::optional<ClampSpec>& clamp = {}) {
    return detail::ancestral_sample_impl(
        g, params.sigma_sq, n, rng, clamp, [&](int node, const Vec& row) {
            const Vec masked = g.col(node).cwiseProduct(row);
            return detail::ffn_forward(params.nodes[node], masked);
        });
}

/// Ground-truth parameters for synthetic tasks: standard normal over all
/// entries, matching the inference-time prior.
inline LinGaussParams sample_lingauss_params(int d, double sigma_sq, Rng& rng) {
    LinGaussParams p;
    p.sigma_sq = sigma_sq;
    p.theta = Mat(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) p.theta(i, j) = rng.normal();
    return p;
}

inline FfnParams sample_ffn_params(const FfnArch& arch, double sigma_sq, Rng& rng) {
    FfnParams p = ffn_zero_params(arch, sigma_sq);
    for (auto& node : p.nodes) {
        for (auto& layer : node.layers) {
            for (int r = 0; r < layer.w.rows(); ++r)
                for (int c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = rng.normal();
            for (int r = 0; r < layer.b.size(); ++r) layer.b(r) = rng.normal();
        }
    }
    return p;
}

}  // namespace dibs
