#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dibs/bn_models.hpp"
#include "test_helpers.hpp"

using namespace dibs;
using namespace dibs::testing;
using Catch::Approx;

namespace {

}  // namespace

TEST_CASE("lingauss_log_lik") {
    SECTION("single observation at the origin") {
        Dataset data{Mat::Zero(1, 1)};
        LinGaussParams p;
        p.theta = Mat::Zero(1, 1);
        p.sigma_sq = 0.1;
        CHECK(lingauss_log_lik(data, Mat::Zero(1, 1), p) == Approx(0.2323528).margin(1e-6));
    }
    SECTION("empty graph makes the likelihood independent of the weights") {
        Rng rng(1);
        const Dataset data = Dataset(gaussian_data(10, 3, rng));
        LinGaussParams p1 = sample_lingauss_params(3, 0.1, rng);
        LinGaussParams p2 = sample_lingauss_params(3, 0.1, rng);
        CHECK(lingauss_log_lik(data, Mat::Zero(3, 3), p1) ==
              Approx(lingauss_log_lik(data, Mat::Zero(3, 3), p2)));
    }
    SECTION("hard and soft masks with identical entries agree") {
        Rng rng(2);
        const Dataset data = Dataset(gaussian_data(8, 3, rng));
        const LinGaussParams p = sample_lingauss_params(3, 0.1, rng);
        const Mat g = random_dag(3, 0.5, rng);
        CHECK(lingauss_log_lik(data, g, p) == lingauss_log_lik(data, Mat(g), p));
    }
    SECTION("equals the per-node parent-factorized form on hard graphs") {
        Rng rng(3);
        for (int rep = 0; rep < 10; ++rep) {
            const Dataset data = Dataset(gaussian_data(12, 4, rng));
            const LinGaussParams p = sample_lingauss_params(4, 0.1, rng);
            const Mat g = random_dag(4, 0.5, rng);
            double factorized = 0.0;
            for (int n = 0; n < data.n(); ++n) {
                for (int i = 0; i < 4; ++i) {
                    double mean = 0.0;
                    for (int j = 0; j < 4; ++j)
                        if (g(j, i) != 0.0) mean += p.theta(j, i) * data.x(n, j);
                    const double r = data.x(n, i) - mean;
                    factorized += -0.5 * std::log(2.0 * M_PI * p.sigma_sq) -
                                  r * r / (2.0 * p.sigma_sq);
                }
            }
            CHECK(lingauss_log_lik(data, g, p) == Approx(factorized).margin(1e-10));
        }
    }
    SECTION("errors") {
        Dataset data{Mat::Zero(2, 2)};
        LinGaussParams p;
        p.theta = Mat::Zero(2, 2);
        CHECK_THROWS(lingauss_log_lik(data, Mat::Zero(3, 3), p));
        p.theta = Mat::Zero(2, 2);
        p.sigma_sq = 0.0;
        CHECK_THROWS(lingauss_log_lik(data, Mat::Zero(2, 2), p));
    }
}

TEST_CASE("lingauss_grads") {
    Rng rng(5);
    SECTION("matches finite differences on random instances") {
        for (int rep = 0; rep < 10; ++rep) {
            const Dataset data = Dataset(gaussian_data(20, 5, rng));
            const LinGaussParams p = sample_lingauss_params(5, 0.1, rng);
            const Mat g = random_soft_matrix(5, rng);
            const auto [dg, dtheta] = lingauss_grads(data, g, p);
            const Mat fd_g = fd_matrix_grad(
                [&](const Mat& gg) { return lingauss_log_lik(data, gg, p); }, g);
            const Mat fd_t = fd_matrix_grad(
                [&](const Mat& th) {
                    LinGaussParams pp = p;
                    pp.theta = th;
                    return lingauss_log_lik(data, g, pp);
                },
                p.theta);
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) {
                    if (i == j) continue;
                    CHECK(dg(i, j) == Approx(fd_g(i, j)).epsilon(1e-4).margin(1e-6));
                    CHECK(dtheta(i, j) == Approx(fd_t(i, j)).epsilon(1e-4).margin(1e-6));
                }
        }
    }
    SECTION("weight gradient vanishes where the mask is zero") {
        const Dataset data = Dataset(gaussian_data(10, 3, rng));
        const LinGaussParams p = sample_lingauss_params(3, 0.1, rng);
        Mat g = Mat::Zero(3, 3);
        g(0, 1) = 1.0;
        const auto [dg, dtheta] = lingauss_grads(data, g, p);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (g(i, j) == 0.0) CHECK(dtheta(i, j) == 0.0);
    }
    SECTION("diagonal gradients are zeroed") {
        const Dataset data = Dataset(gaussian_data(10, 3, rng));
        const LinGaussParams p = sample_lingauss_params(3, 0.1, rng);
        const auto [dg, dtheta] = lingauss_grads(data, random_soft_matrix(3, rng), p);
        CHECK(dg.diagonal().cwiseAbs().maxCoeff() == 0.0);
        CHECK(dtheta.diagonal().cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("ffn model") {
    Rng rng(7);
    SECTION("masked-out node means are constant in the inputs") {
        const FfnArch arch = FfnArch::dense(3, 4);
        const FfnParams p = sample_ffn_params(arch, 0.1, rng);
        Mat g = Mat::Zero(3, 3);
        g(0, 1) = 1.0;  // node 2 has no parents
        // Node 2's conditional mean is the bias path; its contribution to the
        // likelihood only depends on column 2 of the data.
        Mat x1(6, 3), x2(6, 3);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 3; ++j) {
                x1(i, j) = rng.normal();
                x2(i, j) = j == 2 ? x1(i, j) : rng.normal();
            }
        // Keep parent column 0 equal as well so nodes 0, 1 contribute alike.
        x2.col(0) = x1.col(0);
        x2.col(1) = x1.col(1);
        const double l1 = ffn_log_lik(Dataset(x1), g, p);
        const double l2 = ffn_log_lik(Dataset(x2), g, p);
        CHECK(l1 == Approx(l2).margin(1e-9));
    }
    SECTION("parameter count for d = 20, two layers of five hidden units") {
        CHECK(FfnArch::dense(20, 5).total_params() == 2220);
        CHECK(flatten(sample_ffn_params(FfnArch::dense(20, 5), 0.1, rng)).size() == 2220);
    }
    SECTION("gradients match finite differences") {
        const FfnArch arch = FfnArch::dense(4, 3);
        for (int rep = 0; rep < 5; ++rep) {
            const Dataset data = Dataset(gaussian_data(10, 4, rng));
            const FfnParams p = sample_ffn_params(arch, 0.1, rng);
            const Mat g = random_soft_matrix(4, rng);
            const auto [dg, dp] = ffn_grads(data, g, p);
            const Mat fd_g = fd_matrix_grad(
                [&](const Mat& gg) { return ffn_log_lik(data, gg, p); }, g);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    if (i == j) continue;
                    CHECK(dg(i, j) == Approx(fd_g(i, j)).epsilon(1e-3).margin(1e-4));
                }
            const Vec flat = flatten(p);
            const Vec dflat = flatten(dp);
            Rng pick(rep);
            for (int probe = 0; probe < 20; ++probe) {
                const int idx = pick.uniform_int(static_cast<int>(flat.size()));
                Vec fplus = flat, fminus = flat;
                fplus(idx) += 1e-6;
                fminus(idx) -= 1e-6;
                const double up = ffn_log_lik(data, g, unflatten_ffn(fplus, arch, 0.1));
                const double down = ffn_log_lik(data, g, unflatten_ffn(fminus, arch, 0.1));
                const double fd = (up - down) / 2e-6;
                CHECK(dflat(idx) == Approx(fd).epsilon(1e-3).margin(1e-4));
            }
        }
    }
}

TEST_CASE("parameter prior") {
    SECTION("zero parameters sit at the mode") {
        const Vec zero = Vec::Zero(12);
        CHECK(std_normal_score(zero).cwiseAbs().maxCoeff() == 0.0);
        CHECK(std_normal_log_prob(zero) == Approx(-6.0 * std::log(2.0 * M_PI)));
    }
    SECTION("score matches finite differences") {
        Rng rng(9);
        Vec flat(7);
        for (int i = 0; i < 7; ++i) flat(i) = rng.normal();
        const Vec score = std_normal_score(flat);
        for (int i = 0; i < 7; ++i) {
            Vec up = flat, down = flat;
            up(i) += 1e-6;
            down(i) -= 1e-6;
            const double fd = (std_normal_log_prob(up) - std_normal_log_prob(down)) / 2e-6;
            CHECK(score(i) == Approx(fd).margin(1e-6));
        }
    }
}

TEST_CASE("interventional_log_lik") {
    Rng rng(11);
    SECTION("no targets equals the ordinary log likelihood") {
        const LinGaussParams p = sample_lingauss_params(3, 0.1, rng);
        const Mat g = random_dag(3, 0.5, rng);
        Mat x(5, 3);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
        const Dataset plain(x);
        const Dataset with_empty_targets(x, {}, 0.0);
        CHECK(interventional_log_lik(with_empty_targets, g, p) ==
              Approx(lingauss_log_lik(plain, g, p)));
    }
    SECTION("intervening on every node leaves an empty product") {
        const LinGaussParams p = sample_lingauss_params(2, 0.1, rng);
        const Dataset data(Mat::Zero(3, 2), {0, 1}, 0.0);
        CHECK(interventional_log_lik(data, Mat::Zero(2, 2), p) == 0.0);
    }
    SECTION("two-node chain with the source clamped") {
        LinGaussParams p;
        p.sigma_sq = 0.25;
        p.theta = Mat::Zero(2, 2);
        p.theta(0, 1) = 1.5;
        Mat g = Mat::Zero(2, 2);
        g(0, 1) = 1.0;
        Mat x(2, 2);
        x << 0.0, 0.3, 0.0, -0.2;
        const Dataset data(x, {0}, 0.0);
        double expected = 0.0;
        for (int n = 0; n < 2; ++n) {
            const double r = x(n, 1) - 1.5 * x(n, 0);
            expected += -0.5 * std::log(2.0 * M_PI * 0.25) - r * r / (2.0 * 0.25);
        }
        CHECK(interventional_log_lik(data, g, p) == Approx(expected).margin(1e-12));
    }
    SECTION("target out of range") {
        const LinGaussParams p = sample_lingauss_params(2, 0.1, rng);
        CHECK_THROWS(Dataset(Mat::Zero(2, 2), {5}, 0.0));
    }
}

TEST_CASE("ancestral_sample") {
    Rng rng(13);
    SECTION("empty graph gives i.i.d. noise columns") {
        LinGaussParams p;
        p.sigma_sq = 0.1;
        p.theta = Mat::Zero(3, 3);
        const Dataset data = ancestral_sample(Mat::Zero(3, 3), p, 10000, rng);
        for (int j = 0; j < 3; ++j) {
            const double mean = data.x.col(j).mean();
            const double var = (data.x.col(j).array() - mean).square().sum() / (data.n() - 1);
            CHECK(var > 0.95 * 0.1);
            CHECK(var < 1.05 * 0.1);
        }
    }
    SECTION("clamping every node yields constant data") {
        const LinGaussParams p = sample_lingauss_params(3, 0.1, rng);
        const Mat g = random_dag(3, 0.5, rng);
        const Dataset data = ancestral_sample(g, p, 50, rng, ClampSpec{{0, 1, 2}, 0.0});
        CHECK(data.x.cwiseAbs().maxCoeff() == 0.0);
        CHECK(data.targets == std::vector<int>{0, 1, 2});
    }
    SECTION("chain covariance follows the edge weight") {
        LinGaussParams p;
        p.sigma_sq = 0.5;
        p.theta = Mat::Zero(2, 2);
        p.theta(0, 1) = 0.8;
        Mat g = Mat::Zero(2, 2);
        g(0, 1) = 1.0;
        const Dataset data = ancestral_sample(g, p, 10000, rng);
        const double m0 = data.x.col(0).mean();
        const double m1 = data.x.col(1).mean();
        const double cov =
            ((data.x.col(0).array() - m0) * (data.x.col(1).array() - m1)).sum() / (data.n() - 1);
        CHECK(cov == Approx(0.8 * 0.5).epsilon(0.05));
    }
    SECTION("rejects cyclic input") {
        const LinGaussParams p = sample_lingauss_params(2, 0.1, rng);
        Mat cyc = Mat::Zero(2, 2);
        cyc(0, 1) = cyc(1, 0) = 1.0;
        CHECK_THROWS(ancestral_sample(cyc, p, 5, rng));
    }
    SECTION("ffn sampling respects clamps and produces finite data") {
        const FfnArch arch = FfnArch::dense(4, 3);
        const FfnParams p = sample_ffn_params(arch, 0.1, rng);
        const Mat g = random_dag(4, 0.5, rng);
        const Dataset data = ancestral_sample(g, p, 100, rng, ClampSpec{{1}, 0.0});
        CHECK(data.x.col(1).cwiseAbs().maxCoeff() == 0.0);
        CHECK(data.x.allFinite());
    }
}

TEST_CASE("flatten round trips") {
    Rng rng(15);
    SECTION("linear") {
        const LinGaussParams p = sample_lingauss_params(4, 0.3, rng);
        const LinGaussParams q = unflatten_lingauss(flatten(p), 4, 0.3);
        CHECK((p.theta - q.theta).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("ffn") {
        const FfnArch arch = FfnArch::dense(3, 5);
        const FfnParams p = sample_ffn_params(arch, 0.3, rng);
        const FfnParams q = unflatten_ffn(flatten(p), arch, 0.3);
        CHECK((flatten(p) - flatten(q)).cwiseAbs().maxCoeff() == 0.0);
    }
}
