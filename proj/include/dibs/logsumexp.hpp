#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dibs {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum_i exp(x_i)) with max subtraction; -inf entries contribute nothing.
inline double logsumexp(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("logsumexp: empty input");
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

/// A real number carried as (log|x|, sign), sign in {-1, 0, +1}.
struct SignedLog {
    double log_abs = kNegInf;
    double sign = 0.0;

    double value() const { return sign * std::exp(log_abs); }
};

/// Sign-tracked log-sum-exp: sum of s_i * exp(l_i) without leaving log space.
inline SignedLog signed_logsumexp(const std::vector<double>& log_abs,
                                  const std::vector<double>& signs) {
    if (log_abs.empty()) throw std::invalid_argument("signed_logsumexp: empty input");
    if (log_abs.size() != signs.size())
        throw std::invalid_argument("signed_logsumexp: length mismatch");
    double m = kNegInf;
    for (std::size_t i = 0; i < log_abs.size(); ++i)
        if (signs[i] != 0.0) m = std::max(m, log_abs[i]);
    if (m == kNegInf) return {kNegInf, 0.0};
    double s = 0.0;
    for (std::size_t i = 0; i < log_abs.size(); ++i)
        if (signs[i] != 0.0) s += signs[i] * std::exp(log_abs[i] - m);
    if (s == 0.0) return {kNegInf, 0.0};
    return {m + std::log(std::abs(s)), s > 0.0 ? 1.0 : -1.0};
}

/// Ratio of Monte Carlo expectation estimates (same sample count top and
/// bottom, so the 1/M factors cancel), computed in log space. Returns the
/// log of the ratio.
inline double stable_expectation_ratio(const std::vector<double>& log_num,
                                       const std::vector<double>& log_den) {
    if (log_num.empty() || log_den.empty())
        throw std::invalid_argument("stable_expectation_ratio: empty input");
    if (log_num.size() != log_den.size())
        throw std::invalid_argument("stable_expectation_ratio: length mismatch");
    return logsumexp(log_num) - logsumexp(log_den);
}

/// Signed-numerator variant; returns the ratio as (log|r|, sign).
inline SignedLog stable_expectation_ratio(const std::vector<double>& log_abs_num,
                                          const std::vector<double>& signs_num,
                                          const std::vector<double>& log_den) {
    if (log_abs_num.empty() || log_den.empty())
        throw std::invalid_argument("stable_expectation_ratio: empty input");
    if (log_abs_num.size() != log_den.size())
        throw std::invalid_argument("stable_expectation_ratio: length mismatch");
    const SignedLog num = signed_logsumexp(log_abs_num, signs_num);
    const double den = logsumexp(log_den);
    return {num.log_abs - den, num.sign};
}

/// softmax(x)_i = exp(x_i) / sum_j exp(x_j); -inf entries get weight 0.
/// All entries -inf yields the zero vector (no mass to distribute).
inline Eigen::VectorXd softmax_weights(const std::vector<double>& xs) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<int>(xs.size()));
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (m == kNegInf) return w;
    double s = 0.0;
    for (int i = 0; i < w.size(); ++i) {
        w[i] = std::exp(xs[static_cast<std::size_t>(i)] - m);
        s += w[i];
    }
    w /= s;
    return w;
}

}  // namespace dibs
