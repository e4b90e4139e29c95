#pragma once

// Penalized weighted Gaussian mixture EM.
//
// Sample i carries weight w_i and is modelled as drawn from N(mu_k, Sigma_k / w_i).
// Starting from k_max components, the mixing-coefficient update subtracts a
// penalty threshold lambda * D_f from each component's average responsibility
// and clips at zero, so components that explain too little of the data are
// removed while EM runs.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opwg/error.hpp"
#include "opwg/gaussian.hpp"
#include "opwg/lambda_bound.hpp"
#include "opwg/mixture.hpp"
#include "opwg/rng.hpp"

namespace opwg {

// N x K matrix of posterior component probabilities; rows sum to one.
using Responsibilities = Eigen::MatrixXd;

enum class CovarianceDenominator {
    AsPrinted,  // sum_i eta_ik: the exact maximizer of the expected complete-data log-likelihood
    Weighted,   // sum_i w_i eta_ik
};

struct PwgConfig {
    int k_max = 25;
    double lambda = 0.005;
    double epsilon = 1e-6;
    CovarianceKind covariance_kind = CovarianceKind::Diagonal;
    int max_iterations = 200;
    double tolerance = 1e-6;
    // Components whose responsibility mass falls below this are treated as degenerate.
    double elimination_threshold_floor = 1e-12;
    double covariance_floor = 1e-6;
    CovarianceDenominator covariance_denominator = CovarianceDenominator::AsPrinted;
    // When false, a lambda above its bound produces a warning instead of a ConfigError.
    bool enforce_lambda_bound = true;
    std::uint64_t rng_seed = 0;
};

struct FitResult {
    MixtureModel model;
    int iterations = 0;
    std::vector<double> penalized_loglik_trace;
    // elimination_events[t] is true when iteration t removed at least one component.
    std::vector<bool> elimination_events;
    bool converged = false;
    double log_likelihood = 0.0;
    double bic = std::numeric_limits<double>::quiet_NaN();
    int restarts = 0;
    std::vector<std::string> warnings;

    int k() const { return model.active_k(); }
};

struct MixingUpdate {
    Eigen::VectorXd raw;  // clipped values before renormalization
    Eigen::VectorXd pi;   // renormalized; zero for eliminated components
    std::vector<bool> eliminated;

    int survivors() const { return static_cast<int>(std::count(eliminated.begin(), eliminated.end(), false)); }
};

struct MeanUpdate {
    std::vector<Eigen::VectorXd> means;
    std::vector<bool> degenerate;
};

struct IterationRecord {
    int iteration = 0;
    const Responsibilities& responsibilities;
    const MixingUpdate& mixing;
    const MixtureModel& model;  // model after this iteration's M-step
    double penalized_loglik = 0.0;
    bool eliminated = false;
};

struct FitOptions {
    // Skips random initialization for the first attempt.
    std::optional<MixtureModel> initial_model;
    std::function<void(const IterationRecord&)> on_iteration;
};

namespace detail {

struct UnitWeights {
    static constexpr bool unit = true;
    double operator()(Eigen::Index) const { return 1.0; }
};

struct SampleWeights {
    static constexpr bool unit = false;
    const Eigen::VectorXd* weights;
    double operator()(Eigen::Index i) const { return (*weights)(i); }
};

template <typename Weights>
Eigen::MatrixXd log_joint(const MixtureModel& model, const Eigen::MatrixXd& points, const Weights& w) {
    const Eigen::Index n = points.cols();
    const int k_count = model.active_k();
    Eigen::MatrixXd out(n, k_count);
    const double half_dim = 0.5 * model.dim();
    for (int k = 0; k < k_count; ++k) {
        const auto& comp = model.components[k];
        const PreparedGaussian g(comp);
        const Eigen::VectorXd q = g.mahalanobis_sq_all(points);
        const double base = std::log(model.mixing[k]) + g.log_norm();
        for (Eigen::Index i = 0; i < n; ++i) {
            if constexpr (Weights::unit) {
                out(i, k) = base - 0.5 * q(i);
            } else {
                const double wi = w(i);
                out(i, k) = base + half_dim * std::log(wi) - 0.5 * wi * q(i);
            }
        }
    }
    return out;
}

// Normalizes each row of a log-joint matrix in log space (max-shifted) and
// returns the responsibilities together with the per-sample log mixture density.
inline std::pair<Responsibilities, Eigen::VectorXd> normalize_rows(const Eigen::MatrixXd& log_joint) {
    const Eigen::Index n = log_joint.rows();
    const Eigen::Index k_count = log_joint.cols();
    Responsibilities eta(n, k_count);
    Eigen::VectorXd row_log(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < k_count; ++k) m = std::max(m, log_joint(i, k));
        if (!std::isfinite(m)) throw OrphanSampleError(static_cast<std::size_t>(i));
        double s = 0.0;
        for (Eigen::Index k = 0; k < k_count; ++k) {
            const double e = std::exp(log_joint(i, k) - m);
            eta(i, k) = e;
            s += e;
        }
        for (Eigen::Index k = 0; k < k_count; ++k) eta(i, k) /= s;
        row_log(i) = m + std::log(s);
    }
    return {std::move(eta), std::move(row_log)};
}

template <typename Weights>
Eigen::VectorXd weighted_column(const Responsibilities& eta, Eigen::Index k, const Eigen::VectorXd* weights) {
    if constexpr (Weights::unit) {
        (void)weights;
        return eta.col(k);
    } else {
        return weights->cwiseProduct(eta.col(k));
    }
}

template <typename Weights>
MeanUpdate m_step_means(const Eigen::MatrixXd& points, const Eigen::VectorXd* weights, const Responsibilities& eta,
                        double mass_floor) {
    MeanUpdate out;
    const Eigen::Index k_count = eta.cols();
    out.means.reserve(k_count);
    out.degenerate.assign(k_count, false);
    for (Eigen::Index k = 0; k < k_count; ++k) {
        const Eigen::VectorXd coef = weighted_column<Weights>(eta, k, weights);
        const double mass = coef.sum();
        if (eta.col(k).sum() < mass_floor || !(mass > 0.0)) {
            out.degenerate[k] = true;
            out.means.push_back(Eigen::VectorXd::Zero(points.rows()));
            continue;
        }
        out.means.push_back(points * coef / mass);
    }
    return out;
}

template <typename Weights>
std::vector<Covariance> m_step_covariances(const Eigen::MatrixXd& points, const Eigen::VectorXd* weights,
                                           const Responsibilities& eta, const MeanUpdate& means, CovarianceKind kind,
                                           double floor, CovarianceDenominator denominator) {
    const Eigen::Index k_count = eta.cols();
    const Eigen::Index d = points.rows();
    std::vector<Covariance> out;
    out.reserve(k_count);
    for (Eigen::Index k = 0; k < k_count; ++k) {
        if (means.degenerate[k]) {
            if (kind == CovarianceKind::Diagonal)
                out.push_back(Covariance::diagonal(Eigen::VectorXd::Constant(d, floor)));
            else
                out.push_back(Covariance::full(Eigen::MatrixXd::Identity(d, d) * floor));
            continue;
        }
        const Eigen::VectorXd coef = weighted_column<Weights>(eta, k, weights);
        const double denom = denominator == CovarianceDenominator::AsPrinted ? eta.col(k).sum() : coef.sum();
        const Eigen::MatrixXd diff = points.colwise() - means.means[k];
        if (kind == CovarianceKind::Diagonal) {
            Eigen::VectorXd var = diff.array().square().matrix() * coef / denom;
            var.array() += floor;
            out.push_back(Covariance::diagonal(std::move(var)));
        } else {
            Eigen::MatrixXd scatter = diff * coef.asDiagonal() * diff.transpose() / denom;
            Eigen::MatrixXd sym = 0.5 * (scatter + scatter.transpose());
            sym.diagonal().array() += floor;
            out.push_back(Covariance::full(std::move(sym)));
        }
    }
    return out;
}

}  // namespace detail

// Clipped, renormalized mixing-coefficient update from per-component
// responsibility sums. When K * lambda * D_f < 1 the raw values are exactly
// max{0, (avg - lambda D_f) / (1 - K lambda D_f)}; otherwise the scale factor
// is dropped (it only rescales survivors, which renormalization undoes).
inline MixingUpdate m_step_mixing(const Eigen::VectorXd& responsibility_sums, Eigen::Index n, double lambda,
                                  int d_f, const std::vector<bool>& degenerate = {}) {
    if (n < 1) throw InvalidArgument("m_step_mixing: n must be >= 1");
    const Eigen::Index k_count = responsibility_sums.size();
    const double threshold = lambda * d_f;
    const double scale = 1.0 - static_cast<double>(k_count) * threshold;
    MixingUpdate out;
    out.raw.resize(k_count);
    out.eliminated.assign(k_count, false);
    for (Eigen::Index k = 0; k < k_count; ++k) {
        const bool forced = !degenerate.empty() && degenerate[k];
        double v = forced ? 0.0 : responsibility_sums(k) / static_cast<double>(n) - threshold;
        if (v <= 0.0) {
            v = 0.0;
        } else if (scale > 0.0) {
            v /= scale;
        }
        out.raw(k) = v;
        out.eliminated[k] = v == 0.0;
    }
    const double total = out.raw.sum();
    if (!(total > 0.0)) throw TotalCollapseError();
    out.pi = out.raw / total;
    return out;
}

inline MixingUpdate m_step_mixing(const Responsibilities& eta, double lambda, int d_f) {
    return m_step_mixing(Eigen::VectorXd(eta.colwise().sum().transpose()), eta.rows(), lambda, d_f);
}

inline Eigen::MatrixXd log_joint(const MixtureModel& model, const WeightedDataset& data) {
    model.check();
    if (model.dim() != data.dim()) throw InvalidArgument("model and data dimensions differ");
    return detail::log_joint(model, data.points, detail::SampleWeights{&data.weights});
}

// Unpenalized weighted log-likelihood.
inline double log_likelihood(const MixtureModel& model, const WeightedDataset& data) {
    return detail::normalize_rows(log_joint(model, data)).second.sum();
}

// N * lambda * D_f * sum_k [ln(eps + pi_k) - ln eps]
inline double mixing_penalty(const std::vector<double>& mixing, Eigen::Index n, double lambda, double epsilon,
                             int d_f) {
    double s = 0.0;
    for (double pi : mixing) s += std::log(epsilon + pi) - std::log(epsilon);
    return static_cast<double>(n) * lambda * d_f * s;
}

inline double penalized_loglik(const MixtureModel& model, const WeightedDataset& data, double lambda,
                               double epsilon) {
    const double ll = log_likelihood(model, data);
    if (lambda == 0.0) return ll;
    return ll - mixing_penalty(model.mixing, data.size(), lambda, epsilon,
                               free_parameters(model.covariance_kind, model.dim()));
}

inline Responsibilities e_step(const MixtureModel& model, const WeightedDataset& data) {
    return detail::normalize_rows(log_joint(model, data)).first;
}

inline MeanUpdate m_step_means(const WeightedDataset& data, const Responsibilities& eta,
                               double mass_floor = 1e-12) {
    if (eta.rows() != data.size()) throw InvalidArgument("m_step_means: responsibilities do not match data");
    return detail::m_step_means<detail::SampleWeights>(data.points, &data.weights, eta, mass_floor);
}

inline std::vector<Covariance> m_step_covariances(
    const WeightedDataset& data, const Responsibilities& eta, const MeanUpdate& means, CovarianceKind kind,
    double floor = 1e-6, CovarianceDenominator denominator = CovarianceDenominator::AsPrinted) {
    if (eta.rows() != data.size()) throw InvalidArgument("m_step_covariances: responsibilities do not match data");
    if (static_cast<Eigen::Index>(means.means.size()) != eta.cols())
        throw InvalidArgument("m_step_covariances: one mean per component required");
    return detail::m_step_covariances<detail::SampleWeights>(data.points, &data.weights, eta, means, kind, floor,
                                                             denominator);
}

// BIC from the unpenalized likelihood: -2 l + (K D_f - 1) ln N.
inline double bic(double log_likelihood, int active_k, int d_f, Eigen::Index n) {
    const double p = static_cast<double>(active_k) * d_f - 1.0;
    return -2.0 * log_likelihood + p * std::log(static_cast<double>(n));
}

// Means at k distinct data points (by value) drawn with the "init" sub-stream,
// covariances from the global data covariance, uniform mixing.
inline MixtureModel initialize(const Eigen::MatrixXd& points, const PwgConfig& config, int attempt = 0,
                               int k_limit = std::numeric_limits<int>::max()) {
    const Eigen::Index n = points.cols();
    const int k_target = std::min(config.k_max, k_limit);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng = make_rng(config.rng_seed, "init", static_cast<std::uint64_t>(attempt));
    std::shuffle(order.begin(), order.end(), rng);

    // Points equal up to rounding noise count as duplicates; otherwise two
    // copies of one value would start as a symmetric pair that EM never splits.
    auto same = [&](Eigen::Index a, Eigen::Index b) {
        const double scale = 1.0 + std::max(points.col(a).cwiseAbs().maxCoeff(), points.col(b).cwiseAbs().maxCoeff());
        return (points.col(a) - points.col(b)).cwiseAbs().maxCoeff() <= 1e-9 * scale;
    };
    std::vector<Eigen::Index> chosen;
    for (Eigen::Index idx : order) {
        if (static_cast<int>(chosen.size()) == k_target) break;
        const bool duplicate = std::any_of(chosen.begin(), chosen.end(), [&](Eigen::Index c) { return same(c, idx); });
        if (!duplicate) chosen.push_back(idx);
    }

    const Eigen::VectorXd global_mean = points.rowwise().mean();
    const Eigen::MatrixXd centered = points.colwise() - global_mean;
    MixtureModel model;
    model.covariance_kind = config.covariance_kind;
    Covariance init_cov = [&] {
        if (config.covariance_kind == CovarianceKind::Diagonal) {
            Eigen::VectorXd var = centered.array().square().rowwise().mean();
            var.array() += config.covariance_floor;
            return Covariance::diagonal(std::move(var));
        }
        Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n);
        cov = 0.5 * (cov + cov.transpose()).eval();
        cov.diagonal().array() += config.covariance_floor;
        return Covariance::full(std::move(cov));
    }();
    for (Eigen::Index idx : chosen) model.components.push_back({points.col(idx), init_cov});
    model.mixing.assign(chosen.size(), 1.0 / static_cast<double>(chosen.size()));
    return model;
}

namespace detail {

inline void check_config(const PwgConfig& config, int dim, std::vector<std::string>& warnings) {
    if (config.k_max < 1) throw ConfigError("k_max must be >= 1");
    if (!(config.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (!(config.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (config.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(config.tolerance >= 0.0)) throw ConfigError("tolerance must be non-negative");
    if (!(config.covariance_floor >= 0.0)) throw ConfigError("covariance_floor must be non-negative");
    const double bound = lambda_bound(config.k_max, dim, config.covariance_kind);
    if (config.lambda >= bound) {
        std::string msg = "lambda=" + std::to_string(config.lambda) + " violates the bound lambda < " +
                          std::to_string(bound) + " for k_max=" + std::to_string(config.k_max) +
                          ", D_f=" + std::to_string(free_parameters(config.covariance_kind, dim));
        if (config.enforce_lambda_bound) throw ConfigError(msg);
        warnings.push_back(msg);
    }
}

template <typename Weights>
FitResult run_em(const Eigen::MatrixXd& points, const Eigen::VectorXd* weights, const Weights& w,
                 const PwgConfig& config, MixtureModel model, const FitOptions& options) {
    const Eigen::Index n = points.cols();
    const int d_f = free_parameters(config.covariance_kind, static_cast<int>(points.rows()));
    auto objective = [&](const MixtureModel& m, const Eigen::VectorXd& row_log) {
        const double ll = row_log.sum();
        return config.lambda == 0.0 ? ll : ll - mixing_penalty(m.mixing, n, config.lambda, config.epsilon, d_f);
    };

    FitResult result;
    auto [eta, row_log] = normalize_rows(log_joint(model, points, w));
    double prev = objective(model, row_log);

    for (int it = 1; it <= config.max_iterations; ++it) {
        const MeanUpdate means = detail::m_step_means<Weights>(points, weights, eta, config.elimination_threshold_floor);
        const std::vector<Covariance> covs = detail::m_step_covariances<Weights>(
            points, weights, eta, means, config.covariance_kind, config.covariance_floor, config.covariance_denominator);
        const MixingUpdate mix = m_step_mixing(Eigen::VectorXd(eta.colwise().sum().transpose()), n, config.lambda,
                                               d_f, means.degenerate);

        MixtureModel next;
        next.covariance_kind = config.covariance_kind;
        for (Eigen::Index k = 0; k < mix.pi.size(); ++k) {
            if (mix.eliminated[k]) continue;
            next.components.push_back({means.means[k], covs[k]});
            next.mixing.push_back(mix.pi(k));
        }
        const bool eliminated = next.active_k() < model.active_k();

        auto normalized = normalize_rows(log_joint(next, points, w));
        const double current = objective(next, normalized.second);
        result.penalized_loglik_trace.push_back(current);
        result.elimination_events.push_back(eliminated);
        result.iterations = it;
        if (options.on_iteration) options.on_iteration({it, eta, mix, next, current, eliminated});

        model = std::move(next);
        eta = std::move(normalized.first);
        row_log = std::move(normalized.second);

        if (!eliminated && std::abs(current - prev) < config.tolerance * std::max(1.0, std::abs(prev))) {
            result.converged = true;
            break;
        }
        prev = current;
    }

    result.log_likelihood = row_log.sum();
    result.bic = bic(result.log_likelihood, model.active_k(), d_f, n);
    result.model = std::move(model);
    return result;
}

template <typename Weights>
FitResult fit_impl(const Eigen::MatrixXd& points, const Eigen::VectorXd* weights, const Weights& w,
                   const PwgConfig& config, const FitOptions& options) {
    std::vector<std::string> warnings;
    const int dim = static_cast<int>(points.rows());
    check_config(config, dim, warnings);
    if (points.cols() < config.k_max)
        warnings.push_back("fewer samples (" + std::to_string(points.cols()) + ") than k_max (" +
                           std::to_string(config.k_max) + ")");

    // A collapse can only happen when k_max * lambda * D_f >= 1; the retry
    // restarts from the largest component count that satisfies the bound.
    const int d_f = free_parameters(config.covariance_kind, dim);
    for (int attempt = 0; attempt < 2; ++attempt) {
        MixtureModel init;
        if (attempt == 0 && options.initial_model) {
            init = *options.initial_model;
            init.check();
            if (init.dim() != dim) throw InvalidArgument("initial model dimension differs from data");
        } else {
            const int k_limit = attempt == 0 ? config.k_max : largest_feasible_k(config.k_max, config.lambda, d_f);
            init = initialize(points, config, attempt, k_limit);
        }
        try {
            FitResult result = run_em(points, weights, w, config, std::move(init), options);
            result.restarts = attempt;
            result.warnings.insert(result.warnings.begin(), warnings.begin(), warnings.end());
            return result;
        } catch (const TotalCollapseError&) {
            if (attempt == 1) throw;
            warnings.push_back("total collapse; restarting with fresh initialization");
        }
    }
    throw TotalCollapseError();
}

}  // namespace detail

inline FitResult fit(const WeightedDataset& data, const PwgConfig& config, const FitOptions& options = {}) {
    data.check();
    return detail::fit_impl(data.points, &data.weights, detail::SampleWeights{&data.weights}, config, options);
}

// Penalized GMM on unweighted samples; a separate path that never touches weights.
inline FitResult fit_pgmm(const Eigen::MatrixXd& points, const PwgConfig& config, const FitOptions& options = {}) {
    if (points.cols() < 1 || points.rows() < 1) throw InvalidArgument("fit_pgmm: empty data");
    if (!points.allFinite()) throw InvalidArgument("fit_pgmm: non-finite coordinate");
    return detail::fit_impl(points, nullptr, detail::UnitWeights{}, config, options);
}

}  // namespace opwg
