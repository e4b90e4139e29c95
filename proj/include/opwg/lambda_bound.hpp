#pragma once

#include <cmath>

#include "opwg/error.hpp"
#include "opwg/gaussian.hpp"

namespace opwg {

// Exclusive upper bound on the penalty weight: lambda must stay below
// 1 / (k_max * D_f) for the mixing-coefficient update to keep a positive scale.
inline double lambda_bound(int k_max, int dim, CovarianceKind kind) {
    if (k_max < 1 || dim < 1) throw InvalidArgument("lambda_bound: k_max and dim must be >= 1");
    return 1.0 / (static_cast<double>(k_max) * free_parameters(kind, dim));
}

// Largest component count K for which K * lambda * D_f < 1, capped at k_max.
inline int largest_feasible_k(int k_max, double lambda, int d_f) {
    if (lambda <= 0.0) return k_max;
    const double limit = 1.0 / (lambda * d_f);
    int k = static_cast<int>(std::ceil(limit)) - 1;
    if (k < 1) k = 1;
    return k < k_max ? k : k_max;
}

}  // namespace opwg
