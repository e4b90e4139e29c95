#pragma once

// Whole-dataset runners for the algorithm roster used in evaluation:
//   opwg  two-phase streaming clustering
//   pgmm  penalized GMM on all data at once, unit weights
//   wgmm  weighted GMM (lambda = 0) on all data
//   gmm   plain GMM with a fixed K (lambda = 0); K defaults to what pgmm finds

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "opwg/datasets.hpp"
#include "opwg/error.hpp"
#include "opwg/lambda_bound.hpp"
#include "opwg/pwg_em.hpp"
#include "opwg/stream.hpp"

namespace opwg {

enum class Algorithm { Opwg, Pgmm, Wgmm, Gmm };

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Opwg: return "opwg";
        case Algorithm::Pgmm: return "pgmm";
        case Algorithm::Wgmm: return "wgmm";
        default: return "gmm";
    }
}

inline Algorithm algorithm_from_string(const std::string& s) {
    if (s == "opwg") return Algorithm::Opwg;
    if (s == "pgmm") return Algorithm::Pgmm;
    if (s == "wgmm") return Algorithm::Wgmm;
    if (s == "gmm") return Algorithm::Gmm;
    throw InvalidArgument("unknown algorithm '" + s + "'");
}

struct RunSettings {
    int k_max = 25;
    double lambda = 0.005;  // opwg online phase and pgmm
    std::vector<double> offline_lambda_grid{0.003, 0.004, 0.005, 0.006};
    CovarianceKind online_covariance = CovarianceKind::Diagonal;
    CovarianceKind offline_covariance = CovarianceKind::Full;
    CovarianceKind whole_data_covariance = CovarianceKind::Full;  // pgmm, wgmm, gmm
    int fixed_k = 0;                                              // gmm; 0 = take K from a pgmm run
    StreamOrder order;
    Eigen::Index batch_size = 1000;
    PrototypeWeightRule prototype_weight_rule = PrototypeWeightRule::PiTimesN;
    int max_iterations = 200;
    double tolerance = 1e-6;
    double epsilon = 1e-6;
    std::uint64_t seed = 0;
};

struct RunOutcome {
    Algorithm algorithm = Algorithm::Opwg;
    MixtureModel model;
    std::vector<int> labels;
    FitResult fit;                           // final (offline) fit
    std::optional<PrototypeSet> prototypes;  // opwg only
    double offline_lambda = 0.0;             // opwg only
    std::vector<std::string> diagnostics;

    int k() const { return model.active_k(); }
};

inline PwgConfig make_pwg_config(const RunSettings& s, double lambda, CovarianceKind kind, int k_max) {
    PwgConfig c;
    c.k_max = k_max;
    c.lambda = lambda;
    c.epsilon = s.epsilon;
    c.covariance_kind = kind;
    c.max_iterations = s.max_iterations;
    c.tolerance = s.tolerance;
    c.rng_seed = s.seed;
    return c;
}

inline OpwgConfig make_opwg_config(const RunSettings& s) {
    OpwgConfig c;
    c.online = make_pwg_config(s, s.lambda, s.online_covariance, s.k_max);
    c.offline = make_pwg_config(s, s.offline_lambda_grid.empty() ? s.lambda : s.offline_lambda_grid.front(),
                                s.offline_covariance, s.k_max);
    c.offline_lambda_grid = s.offline_lambda_grid;
    c.prototype_weight_rule = s.prototype_weight_rule;
    return c;
}

// Rejects any lambda the algorithm would use that is not below its bound.
inline void check_lambda_bounds(Algorithm algorithm, const RunSettings& s, int dim) {
    auto check = [&](double lambda, CovarianceKind kind, const char* what) {
        const double bound = lambda_bound(s.k_max, dim, kind);
        if (!(lambda >= 0.0) || lambda >= bound)
            throw ConfigError(std::string(what) + " lambda=" + std::to_string(lambda) + " must satisfy 0 <= lambda < " +
                              std::to_string(bound) + " (k_max=" + std::to_string(s.k_max) + ", D_f=" +
                              std::to_string(free_parameters(kind, dim)) + ")");
    };
    if (algorithm == Algorithm::Opwg) {
        check(s.lambda, s.online_covariance, "online");
        for (double l : s.offline_lambda_grid) check(l, s.offline_covariance, "offline");
    } else if (algorithm == Algorithm::Pgmm || (algorithm == Algorithm::Gmm && s.fixed_k == 0)) {
        check(s.lambda, s.whole_data_covariance, "pgmm");
    }
}

inline RunOutcome run_algorithm(Algorithm algorithm, const Eigen::MatrixXd& points,
                                const std::optional<Eigen::VectorXd>& weights, const RunSettings& s) {
    if (points.cols() < 1) throw InvalidArgument("no data points");
    const int dim = static_cast<int>(points.rows());
    check_lambda_bounds(algorithm, s, dim);

    RunOutcome out;
    out.algorithm = algorithm;
    switch (algorithm) {
        case Algorithm::Opwg: {
            Stream stream(make_opwg_config(s));
            const auto perm = stream_permutation(points, s.order, s.seed);
            for (Eigen::Index start = 0, index = 0; start < points.cols(); start += s.batch_size, ++index) {
                const Eigen::Index len = std::min(s.batch_size, points.cols() - start);
                Batch b;
                b.index = static_cast<std::size_t>(index);
                b.points.resize(dim, len);
                if (weights) b.weights = Eigen::VectorXd(len);
                for (Eigen::Index j = 0; j < len; ++j) {
                    const Eigen::Index src = perm[static_cast<std::size_t>(start + j)];
                    b.points.col(j) = points.col(src);
                    if (weights) (*b.weights)(j) = (*weights)(src);
                }
                stream.process_batch(b);
            }
            FinalizeResult fin = stream.finalize();
            out.fit = std::move(fin.fit);
            out.offline_lambda = fin.lambda;
            out.prototypes = stream.prototypes();
            out.diagnostics = stream.diagnostics();
            break;
        }
        case Algorithm::Pgmm:
            out.fit = fit_pgmm(points, make_pwg_config(s, s.lambda, s.whole_data_covariance, s.k_max));
            break;
        case Algorithm::Wgmm: {
            const WeightedDataset data(points, weights ? *weights : Eigen::VectorXd::Ones(points.cols()));
            out.fit = fit(data, make_pwg_config(s, 0.0, s.whole_data_covariance, s.k_max));
            break;
        }
        case Algorithm::Gmm: {
            int k = s.fixed_k;
            if (k <= 0) k = fit_pgmm(points, make_pwg_config(s, s.lambda, s.whole_data_covariance, s.k_max)).k();
            const PwgConfig c = make_pwg_config(s, 0.0, s.whole_data_covariance, k);
            out.fit = weights ? fit(WeightedDataset(points, *weights), c) : fit_pgmm(points, c);
            break;
        }
    }
    for (const auto& w : out.fit.warnings) out.diagnostics.push_back(w);
    out.model = out.fit.model;
    out.labels = Predictor(out.model).labels(points);
    return out;
}

}  // namespace opwg
