#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dibs/estimators.hpp"
#include "dibs/graph.hpp"
#include "dibs/latent.hpp"
#include "dibs/logsumexp.hpp"
#include "dibs/parallel.hpp"
#include "dibs/random.hpp"

namespace dibs {

// Substream tags for deterministic seeding; fixed so that a reference
// implementation (e.g. in tests) can reproduce a run's exact draws.
namespace svgd_streams {
inline constexpr std::uint64_t kInitZ = 0x5a01;
inline constexpr std::uint64_t kInitTheta = 0x5a02;
inline constexpr std::uint64_t kScore = 0x5a03;
inline constexpr std::uint64_t kCyclicity = 0x5a04;
inline constexpr std::uint64_t kMinibatch = 0x5a05;
}  // namespace svgd_streams

struct KernelSpec {
    double gamma_z = 1.0;
    double gamma_theta = 1.0;

    void validate() const {
        if (!(gamma_z > 0.0) || !(gamma_theta > 0.0))
            throw std::invalid_argument("KernelSpec: bandwidths must be positive");
    }
};

/// Additive squared-exponential kernel over latent (and parameter) particles.
/// Marginal mode (null thetas) drops the parameter term.
inline double kernel_eval(const Latent& za, const Vec* ta, const Latent& zb, const Vec* tb,
                          const KernelSpec& spec) {
    spec.validate();
    double dz = (za.u - zb.u).squaredNorm();
    if (za.kind == LatentKind::Bilinear) dz += (za.v - zb.v).squaredNorm();
    double k = std::exp(-dz / spec.gamma_z);
    if (ta && tb) k += std::exp(-(*ta - *tb).squaredNorm() / spec.gamma_theta);
    return k;
}

/// Gradient of kernel_eval with respect to the first argument.
inline void kernel_grad_first(const Latent& za, const Vec* ta, const Latent& zb, const Vec* tb,
                              const KernelSpec& spec, Latent& dz_out, Vec* dtheta_out) {
    spec.validate();
    double dz = (za.u - zb.u).squaredNorm();
    if (za.kind == LatentKind::Bilinear) dz += (za.v - zb.v).squaredNorm();
    const double kz = std::exp(-dz / spec.gamma_z);
    dz_out.kind = za.kind;
    dz_out.u = (-2.0 / spec.gamma_z) * kz * (za.u - zb.u);
    dz_out.v = za.kind == LatentKind::Bilinear
                   ? Mat((-2.0 / spec.gamma_z) * kz * (za.v - zb.v))
                   : Mat();
    if (ta && tb && dtheta_out) {
        const double kt = std::exp(-(*ta - *tb).squaredNorm() / spec.gamma_theta);
        *dtheta_out = (-2.0 / spec.gamma_theta) * kt * (*ta - *tb);
    }
}

/// Annealing and step-size schedule. Inverse temperatures grow linearly in
/// the 1-based iteration index: alpha_t = alpha_slope * t, beta_t =
/// beta_slope * t, so both are positive from the first update on.
struct ScheduleSpec {
    double alpha_slope = 0.2;
    double beta_slope = 1.0;
    int iterations = 3000;
    double learning_rate = 0.005;
    double rmsprop_decay = 0.9;
    double rmsprop_eps = 1e-8;
    double tau = 1.0;

    void validate() const {
        if (alpha_slope < 0.0 || beta_slope < 0.0 || iterations < 0)
            throw std::invalid_argument("ScheduleSpec: negative schedule");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("ScheduleSpec: learning_rate > 0");
    }
    double alpha_at(int t) const { return std::max(alpha_slope * (t + 1), 1e-12); }
    double beta_at(int t) const { return beta_slope * (t + 1); }
};

struct DibsConfig {
    int particles = 30;
    int latent_dim = 0;  // 0 resolves to d
    LatentKind latent_kind = LatentKind::Bilinear;
    EstimatorConfig estimator;
    ScheduleSpec schedule;
    KernelSpec kernel;
    std::optional<GraphPriorSpec> graph_prior;
    std::optional<int> minibatch;  // joint mode only
    int threads = 1;
    int log_every = 0;  // 0 disables progress logging
    std::ostream* progress = nullptr;
};

/// The object SVGD transports: latent particles, optional parameter
/// particles, and per-particle adaptive step-size state.
struct ParticleEnsemble {
    std::vector<Latent> latents;
    std::vector<Vec> params;       // empty in marginal mode
    std::vector<Latent> opt_z;     // RMSProp mean-square accumulators
    std::vector<Vec> opt_theta;
    int iteration = 0;

    int size() const { return static_cast<int>(latents.size()); }
    bool joint() const { return !params.empty(); }
};

namespace detail {

inline void rmsprop_update(Mat& x, Mat& acc, const Mat& grad, const ScheduleSpec& s) {
    acc = s.rmsprop_decay * acc + (1.0 - s.rmsprop_decay) * grad.cwiseProduct(grad);
    x += s.learning_rate * grad.cwiseQuotient((acc.array() + s.rmsprop_eps).sqrt().matrix());
}

inline void rmsprop_update(Vec& x, Vec& acc, const Vec& grad, const ScheduleSpec& s) {
    acc = s.rmsprop_decay * acc + (1.0 - s.rmsprop_decay) * grad.cwiseProduct(grad);
    x += s.learning_rate * grad.cwiseQuotient((acc.array() + s.rmsprop_eps).sqrt().matrix());
}

}  // namespace detail

/// One synchronous SVGD transport step: every phi is computed from the
/// pre-update ensemble, then all particles move through the adaptive rule.
inline void svgd_step(ParticleEnsemble& ensemble, const std::vector<Latent>& score_z,
                      const std::vector<Vec>& score_theta, const KernelSpec& kernel,
                      const ScheduleSpec& schedule) {
    const int m_count = ensemble.size();
    const bool joint = ensemble.joint();
    for (int m = 0; m < m_count; ++m) {
        if (!score_z[m].all_finite() || (joint && !score_theta[m].allFinite())) {
            std::ostringstream msg;
            msg << "svgd_step: non-finite score for particle " << m << " at iteration "
                << ensemble.iteration;
            throw std::runtime_error(msg.str());
        }
    }

    std::vector<Latent> phi_z(m_count);
    std::vector<Vec> phi_t(joint ? m_count : 0);
    Latent kgrad_z;
    Vec kgrad_t;
    for (int m = 0; m < m_count; ++m) {
        Latent acc_z = Latent::zeros_like(ensemble.latents[m]);
        Vec acc_t = joint ? Vec(Vec::Zero(ensemble.params[m].size())) : Vec();
        for (int k = 0; k < m_count; ++k) {
            const Vec* tk = joint ? &ensemble.params[k] : nullptr;
            const Vec* tm = joint ? &ensemble.params[m] : nullptr;
            const double kv = kernel_eval(ensemble.latents[k], tk, ensemble.latents[m], tm, kernel);
            kernel_grad_first(ensemble.latents[k], tk, ensemble.latents[m], tm, kernel, kgrad_z,
                              joint ? &kgrad_t : nullptr);
            // The kernel gradient is taken in particle k and evaluated at the
            // target m, so it points away from k: the repulsive force.
            acc_z.u += kv * score_z[k].u + kgrad_z.u;
            if (acc_z.kind == LatentKind::Bilinear) acc_z.v += kv * score_z[k].v + kgrad_z.v;
            if (joint) acc_t += kv * score_theta[k] + kgrad_t;
        }
        acc_z *= 1.0 / m_count;
        phi_z[m] = std::move(acc_z);
        if (joint) phi_t[m] = acc_t / m_count;
    }

    for (int m = 0; m < m_count; ++m) {
        detail::rmsprop_update(ensemble.latents[m].u, ensemble.opt_z[m].u, phi_z[m].u, schedule);
        if (ensemble.latents[m].kind == LatentKind::Bilinear)
            detail::rmsprop_update(ensemble.latents[m].v, ensemble.opt_z[m].v, phi_z[m].v, schedule);
        if (joint)
            detail::rmsprop_update(ensemble.params[m], ensemble.opt_theta[m], phi_t[m], schedule);
    }
    ++ensemble.iteration;
}

/// Softmax of per-particle unnormalized log joint densities.
inline Vec dibs_plus_weights(const std::vector<double>& log_joint) {
    if (log_joint.empty()) throw std::invalid_argument("dibs_plus_weights: empty input");
    return softmax_weights(log_joint);
}

struct MarginalRun {
    std::vector<Mat> graphs;        // acyclic finalized particles
    std::vector<double> log_joint;  // log p(G, D) per retained particle
    std::vector<Latent> latents;
    int discarded = 0;
};

struct JointRun {
    std::vector<Mat> graphs;
    std::vector<Vec> thetas;
    std::vector<double> log_joint;  // log p(G, Theta, D)
    std::vector<Latent> latents;
    int discarded = 0;
};

namespace detail {

inline double mean_expected_cyclicity(const std::vector<Latent>& latents, double alpha,
                                      int mc_samples, std::uint64_t seed, int iteration) {
    double total = 0.0;
    for (std::size_t m = 0; m < latents.size(); ++m) {
        Rng rng(derive_seed(seed, svgd_streams::kCyclicity, iteration, m));
        double acc = 0.0;
        for (int s = 0; s < mc_samples; ++s)
            acc += acyclicity_penalty(sample_graph(latents[m], alpha, rng));
        total += acc / mc_samples;
    }
    return total / static_cast<double>(latents.size());
}

template <class LogJointFn>
void progress_line(const DibsConfig& config, const std::vector<Latent>& latents, int t,
                   double alpha, std::uint64_t seed, LogJointFn&& log_joint_of) {
    if (!config.progress || config.log_every <= 0 || t % config.log_every != 0) return;
    const double cyc = mean_expected_cyclicity(latents, alpha, std::min(config.estimator.mc_samples, 32),
                                               seed, t);
    double lj_sum = 0.0;
    int lj_count = 0;
    for (std::size_t m = 0; m < latents.size(); ++m) {
        const Mat g = limit_graph(latents[m]);
        if (!is_acyclic(g)) continue;
        lj_sum += log_joint_of(static_cast<int>(m), g);
        ++lj_count;
    }
    const double lj = lj_count > 0 ? lj_sum / lj_count : std::nan("");
    (*config.progress) << t << "," << cyc << "," << lj << "\n";
}

inline std::vector<int> minibatch_rows(int n, int batch, std::uint64_t seed, int t) {
    Rng rng(derive_seed(seed, svgd_streams::kMinibatch, t));
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    const int b = std::min(batch, n);
    for (int i = 0; i < b; ++i) std::swap(idx[i], idx[i + rng.uniform_int(n - i)]);
    idx.resize(b);
    return idx;
}

}  // namespace detail

/// DiBS with SVGD for the marginal posterior over graphs. The model callable
/// returns log p(D | G) on hard graphs (-inf allowed, e.g. for cyclic samples
/// under a DAG-only marginal likelihood). Particles are initialized from the
/// Gaussian factor of the latent prior, transported for schedule.iterations
/// synchronous steps under the annealed temperatures, then finalized to their
/// limit graphs; particles with cyclic limit graphs are discarded.
template <class LogMarginal>
MarginalRun run_marginal(LogMarginal&& log_marginal, int d, const DibsConfig& config,
                         std::uint64_t seed) {
    config.schedule.validate();
    config.kernel.validate();
    const int k = config.latent_dim > 0 ? config.latent_dim : d;
    const double sigma_z = 1.0 / std::sqrt(static_cast<double>(k));
    const int m_count = config.particles;
    if (m_count < 1) throw std::invalid_argument("run_marginal: need at least one particle");

    ParticleEnsemble ens;
    ens.latents.reserve(m_count);
    for (int m = 0; m < m_count; ++m) {
        Rng rng(derive_seed(seed, svgd_streams::kInitZ, m));
        ens.latents.push_back(sample_latent_prior(d, k, sigma_z, config.latent_kind, rng));
        ens.opt_z.push_back(Latent::zeros_like(ens.latents.back()));
    }

    std::vector<Latent> scores(m_count);
    const std::vector<Vec> no_theta;
    for (int t = 0; t < config.schedule.iterations; ++t) {
        TemperatureState state;
        state.alpha = config.schedule.alpha_at(t);
        state.beta = config.schedule.beta_at(t);
        state.tau = config.schedule.tau;
        state.sigma_z = sigma_z;
        parallel_for(m_count, config.threads, [&](int m) {
            Rng rng(derive_seed(seed, svgd_streams::kScore, t, m));
            scores[m] = marginal_posterior_score(ens.latents[m], log_marginal, config.graph_prior,
                                                 state, config.estimator, rng);
        });
        detail::progress_line(config, ens.latents, t, state.alpha, seed, [&](int, const Mat& g) {
            double lj = log_marginal(g);
            if (config.graph_prior) lj += log_graph_prior(g, *config.graph_prior);
            return lj;
        });
        svgd_step(ens, scores, no_theta, config.kernel, config.schedule);
    }

    MarginalRun out;
    for (int m = 0; m < m_count; ++m) {
        const Mat g = limit_graph(ens.latents[m]);
        if (!is_acyclic(g)) {
            ++out.discarded;
            continue;
        }
        double lj = log_marginal(g);
        if (config.graph_prior) lj += log_graph_prior(g, *config.graph_prior);
        out.graphs.push_back(g);
        out.log_joint.push_back(lj);
        out.latents.push_back(ens.latents[m]);
    }
    if (out.graphs.empty())
        throw std::runtime_error("run_marginal: every particle finalized to a cyclic graph");
    return out;
}

/// DiBS with SVGD for the joint posterior over graphs and parameters
/// (Model contract documented at joint_posterior_score).
template <class Model>
JointRun run_joint(const Model& model, const DibsConfig& config, std::uint64_t seed) {
    config.schedule.validate();
    config.kernel.validate();
    const int d = model.d();
    const int k = config.latent_dim > 0 ? config.latent_dim : d;
    const double sigma_z = 1.0 / std::sqrt(static_cast<double>(k));
    const int m_count = config.particles;
    if (m_count < 1) throw std::invalid_argument("run_joint: need at least one particle");
    if (model.n() < 1) throw std::invalid_argument("run_joint: empty dataset");

    ParticleEnsemble ens;
    for (int m = 0; m < m_count; ++m) {
        Rng rng_z(derive_seed(seed, svgd_streams::kInitZ, m));
        ens.latents.push_back(sample_latent_prior(d, k, sigma_z, config.latent_kind, rng_z));
        ens.opt_z.push_back(Latent::zeros_like(ens.latents.back()));
        Rng rng_t(derive_seed(seed, svgd_streams::kInitTheta, m));
        Vec theta(model.param_dim());
        for (int i = 0; i < theta.size(); ++i) theta(i) = rng_t.normal();
        ens.params.push_back(theta);
        ens.opt_theta.push_back(Vec::Zero(theta.size()));
    }

    std::vector<Latent> scores_z(m_count);
    std::vector<Vec> scores_t(m_count);
    for (int t = 0; t < config.schedule.iterations; ++t) {
        TemperatureState state;
        state.alpha = config.schedule.alpha_at(t);
        state.beta = config.schedule.beta_at(t);
        state.tau = config.schedule.tau;
        state.sigma_z = sigma_z;

        std::optional<Model> batch_model;
        if (config.minibatch && *config.minibatch < model.n())
            batch_model = model.subset(detail::minibatch_rows(model.n(), *config.minibatch, seed, t));
        const Model& active = batch_model ? *batch_model : model;

        parallel_for(m_count, config.threads, [&](int m) {
            Rng rng(derive_seed(seed, svgd_streams::kScore, t, m));
            const JointScore js = joint_posterior_score(ens.latents[m], ens.params[m], active,
                                                        config.graph_prior, state, config.estimator,
                                                        rng);
            scores_z[m] = js.dz;
            scores_t[m] = js.dtheta;
        });
        detail::progress_line(config, ens.latents, t, state.alpha, seed, [&](int m, const Mat& g) {
            double lj = model.log_lik(g, ens.params[m]) + std_normal_log_prob(ens.params[m]);
            if (config.graph_prior) lj += log_graph_prior(g, *config.graph_prior);
            return lj;
        });
        svgd_step(ens, scores_z, scores_t, config.kernel, config.schedule);
    }

    JointRun out;
    for (int m = 0; m < m_count; ++m) {
        const Mat g = limit_graph(ens.latents[m]);
        if (!is_acyclic(g)) {
            ++out.discarded;
            continue;
        }
        double lj = model.log_lik(g, ens.params[m]) + std_normal_log_prob(ens.params[m]);
        if (config.graph_prior) lj += log_graph_prior(g, *config.graph_prior);
        out.graphs.push_back(g);
        out.thetas.push_back(ens.params[m]);
        out.log_joint.push_back(lj);
        out.latents.push_back(ens.latents[m]);
    }
    if (out.graphs.empty())
        throw std::runtime_error("run_joint: every particle finalized to a cyclic graph");
    return out;
}

}  // namespace dibs
