#pragma once

// Partition-comparison metrics: pair-counting F1 and normalized mutual
// information (arithmetic-mean normalization, natural log).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "opwg/error.hpp"

namespace opwg {

struct ContingencyTable {
    // counts[u][v]: samples in truth class u and predicted cluster v.
    std::vector<std::vector<std::int64_t>> counts;
    std::vector<std::int64_t> truth_marginals;
    std::vector<std::int64_t> pred_marginals;
    std::int64_t n = 0;
};

namespace detail {

inline std::vector<int> densify(std::span<const int> labels) {
    std::map<int, int> ids;
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) {
        auto [it, inserted] = ids.try_emplace(l, static_cast<int>(ids.size()));
        out.push_back(it->second);
    }
    return out;
}

inline std::int64_t pairs(std::int64_t m) { return m * (m - 1) / 2; }

inline void check_labels(std::span<const int> truth, std::span<const int> pred) {
    if (truth.size() != pred.size()) throw InvalidArgument("label vectors differ in length");
    if (truth.size() < 2) throw InvalidArgument("at least two samples are required");
}

}  // namespace detail

inline ContingencyTable contingency(std::span<const int> truth, std::span<const int> pred) {
    if (truth.size() != pred.size()) throw InvalidArgument("label vectors differ in length");
    const auto u = detail::densify(truth);
    const auto v = detail::densify(pred);
    int nu = 0, nv = 0;
    for (int x : u) nu = std::max(nu, x + 1);
    for (int x : v) nv = std::max(nv, x + 1);
    ContingencyTable t;
    t.counts.assign(static_cast<std::size_t>(nu), std::vector<std::int64_t>(static_cast<std::size_t>(nv), 0));
    t.truth_marginals.assign(static_cast<std::size_t>(nu), 0);
    t.pred_marginals.assign(static_cast<std::size_t>(nv), 0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        ++t.counts[static_cast<std::size_t>(u[i])][static_cast<std::size_t>(v[i])];
        ++t.truth_marginals[static_cast<std::size_t>(u[i])];
        ++t.pred_marginals[static_cast<std::size_t>(v[i])];
    }
    t.n = static_cast<std::int64_t>(u.size());
    return t;
}

struct PairCounts {
    std::int64_t true_positive = 0;   // together in both partitions
    std::int64_t false_positive = 0;  // together only in the prediction
    std::int64_t false_negative = 0;  // together only in the truth
};

inline PairCounts pair_counts(const ContingencyTable& t) {
    std::int64_t tp = 0, same_pred = 0, same_truth = 0;
    for (const auto& row : t.counts)
        for (std::int64_t c : row) tp += detail::pairs(c);
    for (std::int64_t m : t.pred_marginals) same_pred += detail::pairs(m);
    for (std::int64_t m : t.truth_marginals) same_truth += detail::pairs(m);
    return {tp, same_pred - tp, same_truth - tp};
}

inline double f1_from_pairs(const PairCounts& p) {
    if (p.true_positive == 0) {
        // Both partitions all-singletons: identical, nothing to disagree on.
        return p.false_positive == 0 && p.false_negative == 0 ? 1.0 : 0.0;
    }
    const double precision = static_cast<double>(p.true_positive) / static_cast<double>(p.true_positive + p.false_positive);
    const double recall = static_cast<double>(p.true_positive) / static_cast<double>(p.true_positive + p.false_negative);
    return 2.0 * precision * recall / (precision + recall);
}

inline double pairwise_f1(std::span<const int> truth, std::span<const int> pred) {
    detail::check_labels(truth, pred);
    return f1_from_pairs(pair_counts(contingency(truth, pred)));
}

inline double nmi(std::span<const int> truth, std::span<const int> pred) {
    detail::check_labels(truth, pred);
    const ContingencyTable t = contingency(truth, pred);
    const double n = static_cast<double>(t.n);
    auto entropy = [n](const std::vector<std::int64_t>& marginals) {
        double h = 0.0;
        for (std::int64_t m : marginals)
            if (m > 0) h -= (static_cast<double>(m) / n) * std::log(static_cast<double>(m) / n);
        return h;
    };
    const double hu = entropy(t.truth_marginals);
    const double hv = entropy(t.pred_marginals);
    if (hu == 0.0 && hv == 0.0) return 1.0;
    double mi = 0.0;
    for (std::size_t u = 0; u < t.counts.size(); ++u) {
        for (std::size_t v = 0; v < t.counts[u].size(); ++v) {
            const double c = static_cast<double>(t.counts[u][v]);
            if (c == 0.0) continue;
            const double ratio = (c * n) / (static_cast<double>(t.truth_marginals[u]) * static_cast<double>(t.pred_marginals[v]));
            mi += (c / n) * std::log(ratio);
        }
    }
    const double denom = 0.5 * (hu + hv);
    const double value = mi / denom;
    return std::clamp(value, 0.0, 1.0);
}

}  // namespace opwg
