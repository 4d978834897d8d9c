#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dibs/bge.hpp"
#include "dibs/graph.hpp"
#include "dibs/logsumexp.hpp"

namespace dibs {

/// Posterior approximation as a weighted set of BN samples. Weights are
/// normalized; plain (unweighted) particle sets carry uniform weights.
struct WeightedPosterior {
    std::vector<Mat> graphs;
    std::vector<Vec> params;  // empty, or one flat parameter vector per graph
    Vec weights;

    int size() const { return static_cast<int>(graphs.size()); }
    bool joint() const { return !params.empty(); }

    void validate() const {
        if (graphs.empty()) throw std::invalid_argument("WeightedPosterior: empty");
        if (weights.size() != size()) throw std::invalid_argument("WeightedPosterior: weight count");
        if (!params.empty() && static_cast<int>(params.size()) != size())
            throw std::invalid_argument("WeightedPosterior: param count");
        if (std::abs(weights.sum() - 1.0) > 1e-9)
            throw std::invalid_argument("WeightedPosterior: weights must sum to one");
    }

    static WeightedPosterior uniform(std::vector<Mat> graphs, std::vector<Vec> params = {}) {
        WeightedPosterior p;
        p.graphs = std::move(graphs);
        p.params = std::move(params);
        p.weights = Vec::Constant(p.size(), 1.0 / p.size());
        p.validate();
        return p;
    }

    /// Softmax of the log joints, with duplicate (graph, params) entries
    /// merged by summing their mass.
    static WeightedPosterior weighted(const std::vector<Mat>& graphs, const std::vector<Vec>& params,
                                      const std::vector<double>& log_joint) {
        if (graphs.empty()) throw std::invalid_argument("WeightedPosterior: empty");
        const Vec w = softmax_weights(log_joint);
        auto same = [](const auto& a, const auto& b) {
            return a.rows() == b.rows() && a.cols() == b.cols() && a.cwiseEqual(b).all();
        };
        WeightedPosterior p;
        for (int i = 0; i < static_cast<int>(graphs.size()); ++i) {
            int found = -1;
            for (int j = 0; j < p.size(); ++j) {
                if (same(p.graphs[j], graphs[i]) &&
                    (params.empty() || same(p.params[j], params[i]))) {
                    found = j;
                    break;
                }
            }
            if (found >= 0) {
                p.weights(found) += w(i);
            } else {
                p.graphs.push_back(graphs[i]);
                if (!params.empty()) p.params.push_back(params[i]);
                Vec nw(p.size());
                nw.head(p.size() - 1) = p.weights;
                nw(p.size() - 1) = w(i);
                p.weights = nw;
            }
        }
        p.weights /= p.weights.sum();
        p.validate();
        return p;
    }
};

/// Posterior-expected structural Hamming distance between essential graphs.
inline double expected_shd(const WeightedPosterior& post, const Mat& g_star) {
    post.validate();
    if (g_star.rows() != post.graphs.front().rows())
        throw std::invalid_argument("expected_shd: dimension mismatch");
    const Cpdag target = dag_to_cpdag(g_star);
    double total = 0.0;
    for (int i = 0; i < post.size(); ++i)
        total += post.weights(i) * shd(dag_to_cpdag(post.graphs[i]), target);
    return total;
}

/// Marginal edge probabilities: entry (i, j) is the weighted proportion of
/// posterior graphs containing i -> j.
inline Mat edge_marginals(const WeightedPosterior& post) {
    post.validate();
    const int d = static_cast<int>(post.graphs.front().rows());
    Mat m = Mat::Zero(d, d);
    for (int i = 0; i < post.size(); ++i) m += post.weights(i) * post.graphs[i];
    m.diagonal().setZero();
    return m;
}

/// Weighted probability that both directed edges are present.
inline double pairwise_edge_marginal(const WeightedPosterior& post, std::pair<int, int> e1,
                                     std::pair<int, int> e2) {
    post.validate();
    double total = 0.0;
    for (int i = 0; i < post.size(); ++i)
        if (post.graphs[i](e1.first, e1.second) != 0.0 && post.graphs[i](e2.first, e2.second) != 0.0)
            total += post.weights(i);
    return total;
}

/// AUROC of the d(d-1) off-diagonal edge predictions against the ground
/// truth, by the rank statistic with midranks for ties. Undefined (nullopt)
/// when the ground truth has no positive or no negative entries.
inline std::optional<double> auroc(const Mat& marginals, const Mat& g_star) {
    const int d = static_cast<int>(g_star.rows());
    if (marginals.rows() != d) throw std::invalid_argument("auroc: dimension mismatch");
    std::vector<std::pair<double, int>> scored;
    scored.reserve(d * (d - 1));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) scored.push_back({marginals(i, j), g_star(i, j) != 0.0 ? 1 : 0});
    const long positives = std::count_if(scored.begin(), scored.end(),
                                         [](const auto& s) { return s.second == 1; });
    const long negatives = static_cast<long>(scored.size()) - positives;
    if (positives == 0 || negatives == 0) return std::nullopt;

    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < scored.size()) {
        std::size_t j = i;
        while (j < scored.size() && scored[j].first == scored[i].first) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (scored[k].second == 1) rank_sum_pos += midrank;
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * positives * (positives + 1.0);
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

/// Posterior-expected negative log likelihood: -sum_m w_m log f(G_m, Theta_m)
/// for a caller-provided per-sample log likelihood (marginal evaluators
/// ignore the parameter argument).
inline double neg_log_lik(const WeightedPosterior& post,
                          const std::function<double(const Mat&, const Vec*)>& log_lik) {
    post.validate();
    double total = 0.0;
    for (int i = 0; i < post.size(); ++i) {
        const Vec* theta = post.joint() ? &post.params[i] : nullptr;
        total += post.weights(i) * log_lik(post.graphs[i], theta);
    }
    return -total;
}

/// Interventional variant: the average of the per-dataset expected negative
/// log likelihoods over the provided interventional sets.
inline double neg_interventional_log_lik(
    const WeightedPosterior& post, int n_datasets,
    const std::function<double(int, const Mat&, const Vec*)>& log_lik_for_set) {
    if (n_datasets < 1) throw std::invalid_argument("neg_interventional_log_lik: no datasets");
    double total = 0.0;
    for (int s = 0; s < n_datasets; ++s)
        total += neg_log_lik(post, [&](const Mat& g, const Vec* t) { return log_lik_for_set(s, g, t); });
    return total / n_datasets;
}

// ---------------------------------------------------------------------------
// Exhaustive exact posterior for small d

/// All DAGs on d nodes (d <= 5; the count grows super-exponentially).
inline std::vector<Mat> enumerate_all_dags(int d) {
    if (d < 1 || d > 5) throw std::invalid_argument("enumerate_all_dags: d must be in [1, 5]");
    std::array<std::pair<int, int>, 20> slots{};  // at most 5 * 4 ordered pairs
    int pairs = 0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) slots[pairs++] = {i, j};
    std::vector<Mat> dags;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << pairs); ++bits) {
        Mat g = Mat::Zero(d, d);
        for (int s = 0; s < pairs; ++s)
            if (bits & (std::uint64_t{1} << s)) g(slots[s].first, slots[s].second) = 1.0;
        if (is_acyclic(g)) dags.push_back(std::move(g));
    }
    return dags;
}

/// Ground-truth posterior over all DAGs at small d: every graph scored by its
/// unnormalized log posterior and normalized in log space.
template <class LogMarginal>
WeightedPosterior exact_posterior_oracle(int d, LogMarginal&& log_marginal,
                                         const std::optional<GraphPriorSpec>& prior = {}) {
    std::vector<Mat> dags = enumerate_all_dags(d);
    std::vector<double> log_post(dags.size());
    for (std::size_t i = 0; i < dags.size(); ++i) {
        log_post[i] = log_marginal(static_cast<const Mat&>(dags[i]));
        if (prior) log_post[i] += log_graph_prior(dags[i], *prior);
    }
    WeightedPosterior post;
    post.graphs = std::move(dags);
    post.weights = softmax_weights(log_post);
    post.validate();
    return post;
}

inline WeightedPosterior exact_posterior_bge(const Mat& data,
                                             const std::optional<GraphPriorSpec>& prior = {},
                                             BgeHyper hyper = {}) {
    const BgeScorer scorer(data, hyper);
    return exact_posterior_oracle(static_cast<int>(data.cols()),
                                  [&](const Mat& g) { return scorer.log_marginal(g); }, prior);
}

inline WeightedPosterior exact_posterior_lingauss(const Mat& data, double sigma_sq,
                                                  const std::optional<GraphPriorSpec>& prior = {}) {
    const LinGaussEvidence ev(data, sigma_sq);
    return exact_posterior_oracle(static_cast<int>(data.cols()),
                                  [&](const Mat& g) { return ev.log_marginal(g); }, prior);
}

}  // namespace dibs
