#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dibs/bge.hpp"
#include "dibs/bn_models.hpp"
#include "dibs/graph.hpp"
#include "dibs/random.hpp"

namespace dibs {

struct McmcConfig {
    long burn_in = 100000;
    long thinning = 10000;
    int samples = 30;
    double proposal_scale = 0.1;  // parameter random-walk standard deviation

    void validate() const {
        if (burn_in < 0 || thinning < 1 || samples < 1)
            throw std::invalid_argument("McmcConfig: counts must be positive");
        if (!(proposal_scale > 0.0))
            throw std::invalid_argument("McmcConfig: proposal_scale must be positive");
    }
};

struct McmcStats {
    long steps = 0;
    long accepted = 0;
    long param_steps = 0;     // Gibbs only
    long param_accepted = 0;

    double acceptance_rate() const { return steps > 0 ? double(accepted) / steps : 0.0; }
    double param_acceptance_rate() const {
        return param_steps > 0 ? double(param_accepted) / param_steps : 0.0;
    }
};

namespace detail {

enum class EdgeMove { Add, Delete, Reverse };

/// Is `to` reachable from `from` along directed edges, optionally treating
/// one edge as removed?
inline bool reachable(const Mat& g, int from, int to, int skip_i = -1, int skip_j = -1) {
    const int d = static_cast<int>(g.rows());
    if (from == to) return true;
    std::vector<bool> seen(d, false);
    std::vector<int> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < d; ++v) {
            if (seen[v] || g(u, v) == 0.0) continue;
            if (u == skip_i && v == skip_j) continue;
            if (v == to) return true;
            seen[v] = true;
            stack.push_back(v);
        }
    }
    return false;
}

struct EdgeProposal {
    bool valid = false;
    EdgeMove move = EdgeMove::Add;
    int i = 0, j = 0;
};

/// A uniformly random (ordered pair, move type). Inapplicable or cycle-
/// creating proposals come back invalid; the chain then stays put, which
/// keeps the proposal kernel symmetric without neighborhood counting.
inline EdgeProposal propose_edge_move(const Mat& g, int d, Rng& rng) {
    EdgeProposal p;
    p.i = rng.uniform_int(d);
    p.j = rng.uniform_int(d - 1);
    if (p.j >= p.i) ++p.j;
    p.move = static_cast<EdgeMove>(rng.uniform_int(3));
    switch (p.move) {
        case EdgeMove::Add:
            p.valid = g(p.i, p.j) == 0.0 && g(p.j, p.i) == 0.0 && !reachable(g, p.j, p.i);
            break;
        case EdgeMove::Delete:
            p.valid = g(p.i, p.j) != 0.0;
            break;
        case EdgeMove::Reverse:
            p.valid = g(p.i, p.j) != 0.0 && !reachable(g, p.i, p.j, p.i, p.j);
            break;
    }
    return p;
}

inline void apply_edge_move(Mat& g, const EdgeProposal& p) {
    switch (p.move) {
        case EdgeMove::Add:
            g(p.i, p.j) = 1.0;
            break;
        case EdgeMove::Delete:
            g(p.i, p.j) = 0.0;
            break;
        case EdgeMove::Reverse:
            g(p.i, p.j) = 0.0;
            g(p.j, p.i) = 1.0;
            break;
    }
}

inline double log_prior_or_zero(const Mat& g, const std::optional<GraphPriorSpec>& prior) {
    return prior ? log_graph_prior(g, *prior) : 0.0;
}

}  // namespace detail

/// Metropolis-Hastings over DAGs with single-edge additions, deletions, and
/// reversals; the neighborhood-size ratio is taken as one. The Bayes factor
/// touches only the node families affected by the move (the target node for
/// add/delete, both endpoints for a reversal). The visitor sees the current
/// graph after every step.
template <class FamilyScorer, class Visitor>
McmcStats structure_mcmc_walk(const FamilyScorer& scorer, const std::optional<GraphPriorSpec>& prior,
                              int d, long steps, std::uint64_t seed, Visitor&& visit) {
    Rng rng(seed);
    Mat g = Mat::Zero(d, d);
    McmcStats stats;
    for (long step = 0; step < steps; ++step) {
        ++stats.steps;
        const auto p = detail::propose_edge_move(g, d, rng);
        if (p.valid) {
            Mat g2 = g;
            detail::apply_edge_move(g2, p);
            double delta = 0.0;
            delta += scorer.log_family_score(p.j, BgeScorer::parent_mask(g2, p.j)) -
                     scorer.log_family_score(p.j, BgeScorer::parent_mask(g, p.j));
            if (p.move == detail::EdgeMove::Reverse)
                delta += scorer.log_family_score(p.i, BgeScorer::parent_mask(g2, p.i)) -
                         scorer.log_family_score(p.i, BgeScorer::parent_mask(g, p.i));
            if (prior)
                delta += detail::log_prior_or_zero(g2, prior) - detail::log_prior_or_zero(g, prior);
            if (delta >= 0.0 || std::log(rng.uniform()) < delta) {
                g = std::move(g2);
                ++stats.accepted;
            }
        }
        visit(static_cast<const Mat&>(g), step);
    }
    return stats;
}

/// Burn-in, then one retained sample per thinning interval.
template <class FamilyScorer>
std::vector<Mat> structure_mcmc(const FamilyScorer& scorer, const std::optional<GraphPriorSpec>& prior,
                                int d, const McmcConfig& config, std::uint64_t seed,
                                McmcStats* stats_out = nullptr) {
    config.validate();
    std::vector<Mat> samples;
    samples.reserve(config.samples);
    const long total = config.burn_in + config.thinning * static_cast<long>(config.samples);
    McmcStats stats = structure_mcmc_walk(scorer, prior, d, total, seed,
                                          [&](const Mat& g, long step) {
                                              if (step >= config.burn_in &&
                                                  (step - config.burn_in + 1) % config.thinning == 0 &&
                                                  static_cast<int>(samples.size()) < config.samples)
                                                  samples.push_back(g);
                                          });
    if (stats_out) *stats_out = stats;
    return samples;
}

// ---------------------------------------------------------------------------
// Joint-posterior chains. The model contract matches the SVGD joint models:
// log_lik(g, theta_flat) plus param_dim(). The target density is
//   p(G) p(Theta) p(D | G, Theta)
// with the standard-normal parameter prior at full dimensionality.

struct JointChainResult {
    std::vector<Mat> graphs;
    std::vector<Vec> thetas;
    McmcStats stats;
};

/// Metropolis-Hastings with a simultaneous proposal: one edge move and a
/// Gaussian random walk on all parameters in the same step.
template <class Model>
JointChainResult mh_joint(const Model& model, const std::optional<GraphPriorSpec>& prior,
                          const McmcConfig& config, std::uint64_t seed) {
    config.validate();
    const int d = model.d();
    Rng rng(seed);
    Mat g = Mat::Zero(d, d);
    Vec theta = Vec::Zero(model.param_dim());
    double log_target = detail::log_prior_or_zero(g, prior) + std_normal_log_prob(theta) +
                        model.log_lik(g, theta);

    JointChainResult out;
    const long total = config.burn_in + config.thinning * static_cast<long>(config.samples);
    for (long step = 0; step < total; ++step) {
        ++out.stats.steps;
        const auto p = detail::propose_edge_move(g, d, rng);
        Mat g2 = g;
        if (p.valid) detail::apply_edge_move(g2, p);
        Vec theta2 = theta;
        for (int i = 0; i < theta2.size(); ++i) theta2(i) += config.proposal_scale * rng.normal();
        if (p.valid) {
            const double lt2 = detail::log_prior_or_zero(g2, prior) + std_normal_log_prob(theta2) +
                               model.log_lik(g2, theta2);
            if (lt2 - log_target >= 0.0 || std::log(rng.uniform()) < lt2 - log_target) {
                g = std::move(g2);
                theta = std::move(theta2);
                log_target = lt2;
                ++out.stats.accepted;
            }
        }
        if (step >= config.burn_in && (step - config.burn_in + 1) % config.thinning == 0 &&
            static_cast<int>(out.graphs.size()) < config.samples) {
            out.graphs.push_back(g);
            out.thetas.push_back(theta);
        }
    }
    return out;
}

/// Metropolis-within-Gibbs: alternate an edge move given the parameters and a
/// parameter random walk given the graph.
template <class Model>
JointChainResult gibbs_joint(const Model& model, const std::optional<GraphPriorSpec>& prior,
                             const McmcConfig& config, std::uint64_t seed) {
    config.validate();
    const int d = model.d();
    Rng rng(seed);
    Mat g = Mat::Zero(d, d);
    Vec theta = Vec::Zero(model.param_dim());
    double log_target = detail::log_prior_or_zero(g, prior) + std_normal_log_prob(theta) +
                        model.log_lik(g, theta);

    JointChainResult out;
    const long total = config.burn_in + config.thinning * static_cast<long>(config.samples);
    for (long step = 0; step < total; ++step) {
        // Structure move.
        ++out.stats.steps;
        const auto p = detail::propose_edge_move(g, d, rng);
        if (p.valid) {
            Mat g2 = g;
            detail::apply_edge_move(g2, p);
            const double lt2 = detail::log_prior_or_zero(g2, prior) + std_normal_log_prob(theta) +
                               model.log_lik(g2, theta);
            if (lt2 - log_target >= 0.0 || std::log(rng.uniform()) < lt2 - log_target) {
                g = std::move(g2);
                log_target = lt2;
                ++out.stats.accepted;
            }
        }
        // Parameter move.
        ++out.stats.param_steps;
        Vec theta2 = theta;
        for (int i = 0; i < theta2.size(); ++i) theta2(i) += config.proposal_scale * rng.normal();
        const double lt2 = detail::log_prior_or_zero(g, prior) + std_normal_log_prob(theta2) +
                           model.log_lik(g, theta2);
        if (lt2 - log_target >= 0.0 || std::log(rng.uniform()) < lt2 - log_target) {
            theta = std::move(theta2);
            log_target = lt2;
            ++out.stats.param_accepted;
        }
        if (step >= config.burn_in && (step - config.burn_in + 1) % config.thinning == 0 &&
            static_cast<int>(out.graphs.size()) < config.samples) {
            out.graphs.push_back(g);
            out.thetas.push_back(theta);
        }
    }
    return out;
}

}  // namespace dibs
