#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "opwg/error.hpp"
#include "opwg/gaussian.hpp"

namespace opwg {

// N observations stored column-wise (d x N) with one positive weight each.
struct WeightedDataset {
    Eigen::MatrixXd points;
    Eigen::VectorXd weights;

    WeightedDataset() = default;

    WeightedDataset(Eigen::MatrixXd pts, Eigen::VectorXd w) : points(std::move(pts)), weights(std::move(w)) {
        check();
    }

    static WeightedDataset unit(Eigen::MatrixXd pts) {
        const Eigen::Index n = pts.cols();
        return WeightedDataset(std::move(pts), Eigen::VectorXd::Ones(n));
    }

    int dim() const { return static_cast<int>(points.rows()); }
    Eigen::Index size() const { return points.cols(); }

    void check() const {
        if (points.cols() < 1) throw InvalidArgument("dataset must contain at least one point");
        if (points.rows() < 1) throw InvalidArgument("dataset points must have dimension >= 1");
        if (weights.size() != points.cols()) throw InvalidArgument("dataset: one weight per point required");
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            if (!(weights(i) > 0.0) || !std::isfinite(weights(i)))
                throw InvalidArgument("dataset: weight " + std::to_string(i) + " is not positive");
        }
        if (!points.allFinite()) throw InvalidArgument("dataset: non-finite coordinate");
    }
};

// Mixture of Gaussian components. Eliminated components are removed, so every
// stored mixing coefficient is strictly positive.
struct MixtureModel {
    CovarianceKind covariance_kind = CovarianceKind::Diagonal;
    std::vector<GaussianComponent> components;
    std::vector<double> mixing;

    int dim() const { return components.empty() ? 0 : components.front().dim(); }
    int active_k() const { return static_cast<int>(components.size()); }

    std::vector<PreparedGaussian> prepare() const {
        std::vector<PreparedGaussian> out;
        out.reserve(components.size());
        for (const auto& c : components) out.emplace_back(c);
        return out;
    }

    void check() const {
        if (components.empty()) throw InvalidArgument("mixture model has no components");
        if (mixing.size() != components.size()) throw InvalidArgument("mixture model: one mixing coefficient per component");
        const int d = dim();
        double total = 0.0;
        for (std::size_t k = 0; k < components.size(); ++k) {
            if (components[k].dim() != d) throw InvalidArgument("mixture model: inconsistent component dimension");
            if (components[k].covariance.kind() != covariance_kind)
                throw InvalidArgument("mixture model: component covariance kind differs from model");
            if (!(mixing[k] > 0.0)) throw InvalidArgument("mixture model: non-positive mixing coefficient");
            total += mixing[k];
        }
        if (std::abs(total - 1.0) > 1e-10) throw InvalidArgument("mixture model: mixing coefficients do not sum to 1");
    }
};

}  // namespace opwg
