#pragma once

// Two-phase streaming clustering. Each incoming batch is fitted on its own
// with the penalized EM and reduced to a handful of weighted prototypes (the
// surviving component means); the batch itself is not retained. When the
// stream ends, the prototypes are clustered again as a weighted dataset.

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "opwg/error.hpp"
#include "opwg/model_selection.hpp"
#include "opwg/pwg_em.hpp"

namespace opwg {

struct Batch {
    std::size_t index = 0;
    Eigen::MatrixXd points;  // d x n
    std::optional<Eigen::VectorXd> weights;

    Eigen::Index size() const { return points.cols(); }
};

struct Prototype {
    Eigen::VectorXd centroid;
    double weight = 0.0;
    std::size_t source_batch = 0;
};

struct PrototypeSet {
    int dim = 0;
    std::vector<Prototype> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }

    WeightedDataset to_dataset() const {
        if (entries.empty()) throw InvalidArgument("empty prototype set");
        Eigen::MatrixXd pts(dim, static_cast<Eigen::Index>(entries.size()));
        Eigen::VectorXd w(static_cast<Eigen::Index>(entries.size()));
        for (std::size_t i = 0; i < entries.size(); ++i) {
            pts.col(static_cast<Eigen::Index>(i)) = entries[i].centroid;
            w(static_cast<Eigen::Index>(i)) = entries[i].weight;
        }
        return WeightedDataset(std::move(pts), std::move(w));
    }
};

enum class PrototypeWeightRule {
    Pi,        // weight = pi_k
    PiTimesN,  // weight = pi_k * (total weight of the batch)
};

inline const char* to_string(PrototypeWeightRule rule) { return rule == PrototypeWeightRule::Pi ? "pi" : "pi_times_n"; }

inline PrototypeWeightRule prototype_weight_rule_from_string(const std::string& s) {
    if (s == "pi") return PrototypeWeightRule::Pi;
    if (s == "pi_times_n") return PrototypeWeightRule::PiTimesN;
    throw InvalidArgument("unknown prototype weight rule '" + s + "'");
}

struct OpwgConfig {
    PwgConfig online;
    PwgConfig offline;
    // When non-empty, the offline lambda is chosen from this grid by BIC.
    std::vector<double> offline_lambda_grid;
    PrototypeWeightRule prototype_weight_rule = PrototypeWeightRule::PiTimesN;

    // Defaults used for 2-d synthetic data: diagonal online, full offline.
    static OpwgConfig synthetic_defaults() {
        OpwgConfig c;
        c.online.k_max = 25;
        c.online.lambda = 0.005;
        c.online.covariance_kind = CovarianceKind::Diagonal;
        c.offline = c.online;
        c.offline.covariance_kind = CovarianceKind::Full;
        c.offline_lambda_grid = {0.003, 0.004, 0.005, 0.006};
        return c;
    }
};

// Argmax of the unit-weight posterior; ties go to the lower component index.
class Predictor {
public:
    explicit Predictor(MixtureModel model) : model_(std::move(model)) { model_.check(); }

    int operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (x.size() != model_.dim()) throw InvalidArgument("predict: dimension mismatch");
        return labels(Eigen::MatrixXd(x)).front();
    }

    std::vector<int> labels(const Eigen::MatrixXd& points) const {
        if (points.rows() != model_.dim()) throw InvalidArgument("predict: dimension mismatch");
        const Eigen::MatrixXd lj = detail::log_joint(model_, points, detail::UnitWeights{});
        std::vector<int> out(static_cast<std::size_t>(points.cols()));
        for (Eigen::Index i = 0; i < lj.rows(); ++i) {
            int best = 0;
            for (Eigen::Index k = 1; k < lj.cols(); ++k)
                if (lj(i, k) > lj(i, best)) best = static_cast<int>(k);
            out[static_cast<std::size_t>(i)] = best;
        }
        return out;
    }

    const MixtureModel& model() const { return model_; }

private:
    MixtureModel model_;
};

inline int predict(const MixtureModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) { return Predictor(model)(x); }

struct FinalizeResult {
    FitResult fit;
    double lambda = 0.0;
    std::vector<LambdaCandidate> grid;

    Predictor predictor() const { return Predictor(fit.model); }
};

inline FinalizeResult finalize(const PrototypeSet& prototypes, const OpwgConfig& config) {
    if (prototypes.empty()) throw InvalidArgument("finalize: empty prototype set");
    const WeightedDataset data = prototypes.to_dataset();
    FinalizeResult out;
    if (config.offline_lambda_grid.empty()) {
        out.fit = fit(data, config.offline);
        out.lambda = config.offline.lambda;
    } else {
        LambdaSelection sel = select_lambda(data, config.offline, config.offline_lambda_grid);
        out.fit = std::move(sel.fit);
        out.lambda = sel.lambda;
        out.grid = std::move(sel.grid);
    }
    return out;
}

// Serial accumulator for one stream. Holds prototypes only; never sample data.
class Stream {
public:
    explicit Stream(OpwgConfig config) : config_(std::move(config)) {}

    // Fits the batch and appends its surviving components as prototypes. A
    // batch whose fit fails is skipped and a diagnostic recorded.
    void process_batch(const Batch& batch) {
        if (batch.size() < 1) {
            diagnostics_.push_back("batch " + std::to_string(batch.index) + " skipped: empty");
            ++skipped_;
            return;
        }
        if (prototypes_.dim == 0) prototypes_.dim = static_cast<int>(batch.points.rows());
        if (batch.points.rows() != prototypes_.dim)
            throw InvalidArgument("batch " + std::to_string(batch.index) + " dimension differs from the stream");

        try {
            FitResult r;
            double mass = static_cast<double>(batch.size());
            if (batch.weights) {
                WeightedDataset data(batch.points, *batch.weights);
                mass = data.weights.sum();
                r = fit(data, config_.online);
            } else {
                r = fit_pgmm(batch.points, config_.online);
            }
            for (int k = 0; k < r.k(); ++k) {
                const double pi = r.model.mixing[static_cast<std::size_t>(k)];
                const double w = config_.prototype_weight_rule == PrototypeWeightRule::Pi ? pi : pi * mass;
                prototypes_.entries.push_back({r.model.components[static_cast<std::size_t>(k)].mean, w, batch.index});
            }
            for (auto& w : r.warnings)
                if (seen_warnings_.insert(w).second)
                    diagnostics_.push_back("batch " + std::to_string(batch.index) + ": " + w);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            diagnostics_.push_back("batch " + std::to_string(batch.index) + " skipped: " + e.what());
            ++skipped_;
        }
        ++batches_seen_;
    }

    FinalizeResult finalize() const { return opwg::finalize(prototypes_, config_); }

    const PrototypeSet& prototypes() const { return prototypes_; }
    const OpwgConfig& config() const { return config_; }
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }
    std::size_t batches_seen() const { return batches_seen_; }
    std::size_t batches_skipped() const { return skipped_; }

    // Bytes of numeric state held for prototypes.
    std::size_t footprint_bytes() const {
        std::size_t bytes = 0;
        for (const auto& p : prototypes_.entries)
            bytes += sizeof(Prototype) + static_cast<std::size_t>(p.centroid.size()) * sizeof(double);
        return bytes;
    }

private:
    OpwgConfig config_;
    PrototypeSet prototypes_;
    std::vector<std::string> diagnostics_;
    std::set<std::string> seen_warnings_;  // fit warnings are reported once per distinct message
    std::size_t batches_seen_ = 0;
    std::size_t skipped_ = 0;
};

}  // namespace opwg
