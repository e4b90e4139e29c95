#pragma once

#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "opwg/error.hpp"
#include "opwg/lambda_bound.hpp"
#include "opwg/pwg_em.hpp"

namespace opwg {

struct LambdaCandidate {
    double lambda = 0.0;
    double bic = std::numeric_limits<double>::quiet_NaN();
    int k = 0;
    std::optional<std::string> error;  // set when this candidate's fit failed
};

struct LambdaSelection {
    double lambda = 0.0;
    FitResult fit;
    std::vector<LambdaCandidate> grid;
};

namespace detail {

// Smaller BIC wins; BICs equal within 1e-12 go to the larger lambda.
inline bool better_candidate(double bic, double lambda, double best_bic, double best_lambda) {
    const double tol = 1e-12 * std::max(1.0, std::abs(best_bic));
    if (bic < best_bic - tol) return true;
    if (std::abs(bic - best_bic) <= tol) return lambda > best_lambda;
    return false;
}

}  // namespace detail

// Fits once per candidate lambda with the same seed and keeps the fit with the
// smallest BIC.
inline LambdaSelection select_lambda(const WeightedDataset& data, const PwgConfig& config,
                                     const std::vector<double>& grid) {
    if (grid.empty()) throw InvalidArgument("select_lambda: empty lambda grid");
    const double bound = lambda_bound(config.k_max, data.dim(), config.covariance_kind);
    for (double lambda : grid) {
        if (!(lambda >= 0.0)) throw ConfigError("select_lambda: negative lambda " + std::to_string(lambda));
        if (config.enforce_lambda_bound && lambda >= bound)
            throw ConfigError("select_lambda: candidate lambda=" + std::to_string(lambda) +
                              " is not below the bound " + std::to_string(bound));
    }

    LambdaSelection out;
    std::optional<FitResult> best;
    std::exception_ptr last_error;
    for (double lambda : grid) {
        PwgConfig c = config;
        c.lambda = lambda;
        LambdaCandidate cand;
        cand.lambda = lambda;
        try {
            FitResult r = fit(data, c);
            cand.bic = r.bic;
            cand.k = r.k();
            if (!best || detail::better_candidate(r.bic, lambda, best->bic, out.lambda)) {
                out.lambda = lambda;
                best = std::move(r);
            }
        } catch (const Error& e) {
            cand.error = e.what();
            last_error = std::current_exception();
        }
        out.grid.push_back(std::move(cand));
    }
    if (!best) std::rethrow_exception(last_error);
    out.fit = std::move(*best);
    return out;
}

}  // namespace opwg
