#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <utility>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dibs/bge.hpp"
#include "dibs/bn_models.hpp"
#include "dibs/estimators.hpp"
#include "dibs/graph.hpp"
#include "dibs/mcmc.hpp"
#include "dibs/metrics.hpp"
#include "dibs/parallel.hpp"
#include "dibs/random.hpp"
#include "dibs/svgd.hpp"

namespace dibs {

enum class ModelFamily { LinGauss, Ffn };
enum class GraphKind { ErdosRenyi, ScaleFree };

struct InstanceSpec {
    ModelFamily family = ModelFamily::LinGauss;
    GraphKind kind = GraphKind::ErdosRenyi;
    int d = 20;
    double edge_prob = 0.0;  // 0 resolves to 4/(d-1)
    double sigma_sq = 0.1;
    int hidden = 5;  // FFN hidden width
    int n_train = 100;
    int n_heldout = 100;
    int n_interv_sets = 10;
    int n_interv = 100;
    double interv_frac = 0.1;

    GraphPriorSpec graph_prior() const {
        if (kind == GraphKind::ScaleFree) return GraphPriorSpec::scale_free();
        return edge_prob > 0.0 ? GraphPriorSpec::erdos_renyi(edge_prob)
                               : GraphPriorSpec::erdos_renyi_default(d);
    }
};

/// A fully regenerable synthetic benchmark task: ground truth BN plus the
/// training, held-out, and interventional datasets drawn from it.
struct BenchmarkInstance {
    InstanceSpec spec;
    std::uint64_t seed = 0;
    std::string preset;  // nonempty for fixed presets
    Mat g_star;
    Vec theta_flat;
    Dataset train;
    Dataset heldout;
    std::vector<Dataset> interv;

    FfnArch arch() const { return FfnArch::dense(spec.d, spec.hidden); }

    LinGaussParams lingauss_params() const {
        return unflatten_lingauss(theta_flat, spec.d, spec.sigma_sq);
    }
    FfnParams ffn_params() const { return unflatten_ffn(theta_flat, arch(), spec.sigma_sq); }
};

namespace detail {

inline std::vector<int> random_targets(int d, double frac, Rng& rng) {
    const int count = std::max(1, static_cast<int>(std::lround(frac * d)));
    std::vector<int> idx(d);
    for (int i = 0; i < d; ++i) idx[i] = i;
    for (int i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.uniform_int(d - i)]);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

template <class Params>
void fill_instance_data(BenchmarkInstance& inst, const Params& params) {
    Rng rng_train(derive_seed(inst.seed, 3));
    inst.train = ancestral_sample(inst.g_star, params, inst.spec.n_train, rng_train);
    Rng rng_heldout(derive_seed(inst.seed, 4));
    inst.heldout = ancestral_sample(inst.g_star, params, inst.spec.n_heldout, rng_heldout);
    inst.interv.clear();
    for (int s = 0; s < inst.spec.n_interv_sets; ++s) {
        Rng rng_t(derive_seed(inst.seed, 5, s));
        ClampSpec clamp{random_targets(inst.spec.d, inst.spec.interv_frac, rng_t), 0.0};
        Rng rng_d(derive_seed(inst.seed, 6, s));
        inst.interv.push_back(ancestral_sample(inst.g_star, params, inst.spec.n_interv, rng_d, clamp));
    }
}

}  // namespace detail

/// Ground-truth DAG from the random-graph model, parameters from the
/// standard-normal generator, all datasets by ancestral sampling.
inline BenchmarkInstance generate_instance(const InstanceSpec& spec, std::uint64_t seed) {
    BenchmarkInstance inst;
    inst.spec = spec;
    inst.seed = seed;
    Rng rng_g(derive_seed(seed, 1));
    inst.g_star = sample_random_dag(spec.graph_prior(), spec.d, rng_g);
    Rng rng_p(derive_seed(seed, 2));
    if (spec.family == ModelFamily::LinGauss) {
        const LinGaussParams params = sample_lingauss_params(spec.d, spec.sigma_sq, rng_p);
        inst.theta_flat = flatten(params);
        detail::fill_instance_data(inst, params);
    } else {
        const FfnParams params = sample_ffn_params(inst.arch(), spec.sigma_sq, rng_p);
        inst.theta_flat = flatten(params);
        detail::fill_instance_data(inst, params);
    }
    return inst;
}

/// Fixed 4-node linear Gaussian preset: a diamond x0 -> {x1, x2} -> x3 with
/// weights 2, -2, 3, 1 and unit noise. Its v-structure is identifiable while
/// the two upper edge directions are not, which makes it the reference task
/// for uncertainty calibration against the exact posterior.
inline BenchmarkInstance diamond4_instance(std::uint64_t seed, int n_train = 100,
                                           int n_heldout = 100, int n_interv_sets = 10,
                                           int n_interv = 100) {
    BenchmarkInstance inst;
    inst.preset = "diamond4";
    inst.spec.family = ModelFamily::LinGauss;
    inst.spec.d = 4;
    inst.spec.sigma_sq = 1.0;
    inst.spec.n_train = n_train;
    inst.spec.n_heldout = n_heldout;
    inst.spec.n_interv_sets = n_interv_sets;
    inst.spec.n_interv = n_interv;
    inst.seed = seed;
    inst.g_star = Mat::Zero(4, 4);
    inst.g_star(0, 1) = 1.0;
    inst.g_star(0, 2) = 1.0;
    inst.g_star(1, 3) = 1.0;
    inst.g_star(2, 3) = 1.0;
    LinGaussParams params;
    params.sigma_sq = 1.0;
    params.theta = Mat::Zero(4, 4);
    params.theta(0, 1) = 2.0;
    params.theta(0, 2) = -2.0;
    params.theta(1, 3) = 3.0;
    params.theta(2, 3) = 1.0;
    inst.theta_flat = flatten(params);
    detail::fill_instance_data(inst, params);
    return inst;
}

// ---------------------------------------------------------------------------
// Benchmark driver

struct RunSettings {
    std::string mode = "joint";  // "marginal" (BGe) or "joint" (model family)
    DibsConfig dibs;
    McmcConfig mcmc;
    BgeHyper bge;
    bool use_graph_prior = true;  // pass the generating prior to inference
};

struct MetricRecord {
    std::string method;
    std::uint64_t seed = 0;
    std::optional<double> e_shd;
    std::optional<double> auroc;
    std::optional<double> neg_ll;
    std::optional<double> neg_ill;
    std::optional<double> runtime_s;
    std::optional<std::string> error;
};

namespace detail {

inline std::uint64_t method_tag(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

/// One SVGD run, returned under both weightings: (uniform particles,
/// joint-density-weighted particles).
inline std::pair<WeightedPosterior, WeightedPosterior> run_dibs_both(
    const BenchmarkInstance& inst, const RunSettings& settings, int threads = 1) {
    const std::uint64_t seed = derive_seed(inst.seed, detail::method_tag("dibs"));
    const bool marginal = settings.mode == "marginal";
    DibsConfig config = settings.dibs;
    config.threads = threads;
    config.graph_prior = settings.use_graph_prior
                             ? std::optional<GraphPriorSpec>(inst.spec.graph_prior())
                             : std::nullopt;
    if (marginal) {
        const BgeScorer scorer(inst.train.x, settings.bge);
        auto log_marginal = [&](const Mat& g) {
            return is_acyclic(g) ? scorer.log_marginal(g) : kNegInf;
        };
        const MarginalRun run = run_marginal(log_marginal, inst.spec.d, config, seed);
        return {WeightedPosterior::uniform(run.graphs),
                WeightedPosterior::weighted(run.graphs, {}, run.log_joint)};
    }
    if (inst.spec.family == ModelFamily::LinGauss) {
        const LinGaussJointModel model(inst.train.x, inst.spec.sigma_sq);
        const JointRun run = run_joint(model, config, seed);
        return {WeightedPosterior::uniform(run.graphs, run.thetas),
                WeightedPosterior::weighted(run.graphs, run.thetas, run.log_joint)};
    }
    const FfnJointModel model(inst.train.x, inst.arch(), inst.spec.sigma_sq);
    const JointRun run = run_joint(model, config, seed);
    return {WeightedPosterior::uniform(run.graphs, run.thetas),
            WeightedPosterior::weighted(run.graphs, run.thetas, run.log_joint)};
}

/// Run one inference method on one instance. "dibs" returns the uniform
/// particle mixture, "dibs_plus" the joint-density-weighted one from the same
/// kind of run.
inline WeightedPosterior run_method(const std::string& method, const BenchmarkInstance& inst,
                                    const RunSettings& settings, int threads = 1) {
    const std::uint64_t seed = derive_seed(inst.seed, detail::method_tag(
        method == "dibs_plus" ? "dibs" : method));
    const bool marginal = settings.mode == "marginal";
    const std::optional<GraphPriorSpec> prior =
        settings.use_graph_prior ? std::optional<GraphPriorSpec>(inst.spec.graph_prior())
                                 : std::nullopt;

    if (method == "empty_graph") {
        std::vector<Mat> graphs{Mat::Zero(inst.spec.d, inst.spec.d)};
        if (marginal) return WeightedPosterior::uniform(std::move(graphs));
        return WeightedPosterior::uniform(std::move(graphs),
                                          {Vec::Zero(inst.theta_flat.size())});
    }

    if (method == "dibs" || method == "dibs_plus") {
        const auto both = run_dibs_both(inst, settings, threads);
        return method == "dibs" ? both.first : both.second;
    }

    if (method == "mcmc") {
        if (!marginal) throw std::invalid_argument("structure MCMC requires marginal mode");
        const BgeScorer scorer(inst.train.x, settings.bge);
        const std::vector<Mat> samples = structure_mcmc(scorer, prior, inst.spec.d, settings.mcmc, seed);
        return WeightedPosterior::uniform(samples);
    }

    if (method == "mh_mcmc" || method == "gibbs_mcmc") {
        if (marginal) throw std::invalid_argument(method + " requires joint mode");
        JointChainResult chain;
        if (inst.spec.family == ModelFamily::LinGauss) {
            const LinGaussJointModel model(inst.train.x, inst.spec.sigma_sq);
            chain = method == "mh_mcmc" ? mh_joint(model, prior, settings.mcmc, seed)
                                        : gibbs_joint(model, prior, settings.mcmc, seed);
        } else {
            const FfnJointModel model(inst.train.x, inst.arch(), inst.spec.sigma_sq);
            chain = method == "mh_mcmc" ? mh_joint(model, prior, settings.mcmc, seed)
                                        : gibbs_joint(model, prior, settings.mcmc, seed);
        }
        return WeightedPosterior::uniform(chain.graphs, chain.thetas);
    }

    throw std::invalid_argument("unknown method: " + method);
}

/// Metric suite for one posterior on one instance.
inline MetricRecord evaluate_posterior(const std::string& method, const WeightedPosterior& post,
                                       const BenchmarkInstance& inst, const RunSettings& settings,
                                       const std::vector<std::string>& metrics) {
    MetricRecord rec;
    rec.method = method;
    rec.seed = inst.seed;
    const bool marginal = settings.mode == "marginal";
    auto wants = [&](const char* name) {
        return std::find(metrics.begin(), metrics.end(), name) != metrics.end();
    };

    if (wants("e_shd")) rec.e_shd = expected_shd(post, inst.g_star);
    if (wants("auroc")) rec.auroc = auroc(edge_marginals(post), inst.g_star);

    if (wants("neg_ll")) {
        if (marginal) {
            const BgeScorer scorer(inst.heldout.x, settings.bge);
            rec.neg_ll = neg_log_lik(
                post, [&](const Mat& g, const Vec*) { return scorer.log_marginal(g); });
        } else if (inst.spec.family == ModelFamily::LinGauss) {
            rec.neg_ll = neg_log_lik(post, [&](const Mat& g, const Vec* t) {
                return lingauss_log_lik(inst.heldout, g,
                                        unflatten_lingauss(*t, inst.spec.d, inst.spec.sigma_sq));
            });
        } else {
            rec.neg_ll = neg_log_lik(post, [&](const Mat& g, const Vec* t) {
                return ffn_log_lik(inst.heldout, g, unflatten_ffn(*t, inst.arch(), inst.spec.sigma_sq));
            });
        }
    }

    if (wants("neg_ill") && !inst.interv.empty()) {
        if (marginal) {
            std::vector<BgeScorer> scorers;
            scorers.reserve(inst.interv.size());
            for (const auto& ds : inst.interv) scorers.emplace_back(ds.x, settings.bge);
            rec.neg_ill = neg_interventional_log_lik(
                post, static_cast<int>(inst.interv.size()), [&](int s, const Mat& g, const Vec*) {
                    return scorers[s].log_marginal_skipping(g, inst.interv[s].targets);
                });
        } else if (inst.spec.family == ModelFamily::LinGauss) {
            rec.neg_ill = neg_interventional_log_lik(
                post, static_cast<int>(inst.interv.size()), [&](int s, const Mat& g, const Vec* t) {
                    return interventional_log_lik(
                        inst.interv[s], g, unflatten_lingauss(*t, inst.spec.d, inst.spec.sigma_sq));
                });
        } else {
            rec.neg_ill = neg_interventional_log_lik(
                post, static_cast<int>(inst.interv.size()), [&](int s, const Mat& g, const Vec* t) {
                    return interventional_log_lik(inst.interv[s], g,
                                                  unflatten_ffn(*t, inst.arch(), inst.spec.sigma_sq));
                });
        }
    }
    return rec;
}

struct BenchmarkReport {
    std::vector<MetricRecord> records;  // instance-major, method order preserved
};

/// Every method on every instance; a method failure is recorded in its
/// record, not fatal for the rest of the run. Wall-clock timing is opt-in so
/// the default report is reproducible byte for byte.
inline BenchmarkReport run_benchmark(const std::vector<std::string>& methods,
                                     const std::vector<BenchmarkInstance>& instances,
                                     const RunSettings& settings,
                                     const std::vector<std::string>& metrics, int threads = 1,
                                     bool wall_clock = false) {
    if (methods.empty() || instances.empty())
        throw std::invalid_argument("run_benchmark: need at least one method and instance");
    BenchmarkReport report;
    report.records.resize(methods.size() * instances.size());
    const int outer = std::min<int>(threads, static_cast<int>(instances.size()));
    const int inner = std::max(1, threads / outer);
    parallel_for(static_cast<int>(instances.size()), outer, [&](int ii) {
        const BenchmarkInstance& inst = instances[ii];
        // One SVGD run per instance serves both dibs and dibs_plus records.
        std::optional<std::pair<WeightedPosterior, WeightedPosterior>> dibs_runs;
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const std::string& method = methods[mi];
            MetricRecord& rec = report.records[ii * methods.size() + mi];
            const auto start = std::chrono::steady_clock::now();
            try {
                WeightedPosterior post;
                if (method == "dibs" || method == "dibs_plus") {
                    if (!dibs_runs) dibs_runs = run_dibs_both(inst, settings, inner);
                    post = method == "dibs" ? dibs_runs->first : dibs_runs->second;
                } else {
                    post = run_method(method, inst, settings, inner);
                }
                rec = evaluate_posterior(method, post, inst, settings, metrics);
            } catch (const std::exception& e) {
                rec.method = method;
                rec.seed = inst.seed;
                rec.error = e.what();
            }
            if (wall_clock) {
                const auto stop = std::chrono::steady_clock::now();
                rec.runtime_s = std::chrono::duration<double>(stop - start).count();
            }
        }
    });
    return report;
}

/// Median and quartiles of one metric over an ordered set of values.
struct Quartiles {
    double q25 = 0.0, median = 0.0, q75 = 0.0;
    int count = 0;
};

inline Quartiles quartiles(std::vector<double> values) {
    Quartiles q;
    q.count = static_cast<int>(values.size());
    if (values.empty()) return q;
    std::sort(values.begin(), values.end());
    auto at = [&](double frac) {
        const double pos = frac * (values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - lo) * (values[hi] - values[lo]);
    };
    q.q25 = at(0.25);
    q.median = at(0.5);
    q.q75 = at(0.75);
    return q;
}

}  // namespace dibs
