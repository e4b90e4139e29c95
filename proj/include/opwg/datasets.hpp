#pragma once

// Synthetic 2-d datasets, stream ordering and batching, and CSV exchange.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "opwg/error.hpp"
#include "opwg/rng.hpp"
#include "opwg/stream.hpp"

namespace opwg {

struct LabeledDataset {
    std::string name;
    Eigen::MatrixXd points;  // d x N
    std::vector<int> labels;
    // Component means used by the generator, where it has them.
    std::vector<Eigen::VectorXd> generator_means;

    Eigen::Index size() const { return points.cols(); }
    int dim() const { return static_cast<int>(points.rows()); }
    int num_classes() const { return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1; }
};

enum class StreamMode { A, B };

struct StreamOrder {
    StreamMode mode = StreamMode::A;
    int sort_axis = 0;  // 0 = x, 1 = y; Mode B only
};

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"circles", "moons", "blobs", "varied", "aniso", "noise"};
    return names;
}

namespace detail {

// Splits n into k class sizes differing by at most one, larger ones first.
inline std::vector<Eigen::Index> stratified_sizes(Eigen::Index n, int k) {
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), n / k);
    for (Eigen::Index r = 0; r < n % k; ++r) ++sizes[static_cast<std::size_t>(r)];
    return sizes;
}

// Centers uniform in [-box, box]^2 with a minimum pairwise distance.
inline std::vector<Eigen::VectorXd> separated_centers(int k, double box, double min_sep, Rng& rng) {
    std::uniform_real_distribution<double> u(-box, box);
    std::vector<Eigen::VectorXd> centers;
    int tries = 0;
    while (static_cast<int>(centers.size()) < k) {
        Eigen::VectorXd c(2);
        c << u(rng), u(rng);
        const bool ok = std::all_of(centers.begin(), centers.end(),
                                    [&](const Eigen::VectorXd& o) { return (o - c).norm() >= min_sep; });
        if (ok) centers.push_back(c);
        if (++tries > 100000) throw Error("could not place separated cluster centers");
    }
    return centers;
}

// Applies one random permutation to points and labels together.
inline void shuffle_together(LabeledDataset& ds, Rng& rng) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(ds.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd pts(ds.points.rows(), ds.points.cols());
    std::vector<int> labels(ds.labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        pts.col(static_cast<Eigen::Index>(i)) = ds.points.col(order[i]);
        labels[i] = ds.labels[static_cast<std::size_t>(order[i])];
    }
    ds.points = std::move(pts);
    ds.labels = std::move(labels);
}

inline LabeledDataset gaussian_blobs(const std::string& name, Eigen::Index n, const std::vector<Eigen::VectorXd>& centers,
                                     const std::vector<double>& stds, Rng& rng) {
    const int k = static_cast<int>(centers.size());
    const auto sizes = stratified_sizes(n, k);
    std::normal_distribution<double> g(0.0, 1.0);
    LabeledDataset ds;
    ds.name = name;
    ds.points.resize(2, n);
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.generator_means = centers;
    Eigen::Index i = 0;
    for (int c = 0; c < k; ++c) {
        for (Eigen::Index j = 0; j < sizes[static_cast<std::size_t>(c)]; ++j, ++i) {
            ds.points(0, i) = centers[static_cast<std::size_t>(c)](0) + stds[static_cast<std::size_t>(c)] * g(rng);
            ds.points(1, i) = centers[static_cast<std::size_t>(c)](1) + stds[static_cast<std::size_t>(c)] * g(rng);
            ds.labels[static_cast<std::size_t>(i)] = c;
        }
    }
    return ds;
}

}  // namespace detail

// Generator defaults:
//   circles  outer radius 1, inner 0.5, noise sd 0.05
//   moons    two interleaved half circles, noise sd 0.05
//   blobs    3 clusters, sd 1, centers in [-10,10]^2 at least 6 apart
//   varied   3 clusters, sd {1.0, 2.5, 0.5}, centers at least 10 apart
//   aniso    blobs sheared by [[0.6, -0.6], [-0.4, 0.8]]
//   noise    uniform on [0,1]^2, single label
inline LabeledDataset make_suite(const std::string& name, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("make_suite: n must be >= 1");
    Rng rng = make_rng(seed, "generator:" + name);
    std::normal_distribution<double> noise(0.0, 0.05);
    LabeledDataset ds;

    if (name == "circles" || name == "moons") {
        const Eigen::Index n_out = n / 2;
        const Eigen::Index n_in = n - n_out;
        ds.name = name;
        ds.points.resize(2, n);
        ds.labels.resize(static_cast<std::size_t>(n));
        const bool circles = name == "circles";
        auto place = [&](Eigen::Index count, Eigen::Index offset, int label) {
            const double span = circles ? 2.0 * std::numbers::pi : std::numbers::pi;
            for (Eigen::Index j = 0; j < count; ++j) {
                // circles: endpoint excluded; moons: endpoint included
                const double denom = circles ? static_cast<double>(count)
                                             : static_cast<double>(std::max<Eigen::Index>(count - 1, 1));
                const double t = span * static_cast<double>(j) / denom;
                double x, y;
                if (circles) {
                    const double r = label == 0 ? 1.0 : 0.5;
                    x = r * std::cos(t);
                    y = r * std::sin(t);
                } else if (label == 0) {
                    x = std::cos(t);
                    y = std::sin(t);
                } else {
                    x = 1.0 - std::cos(t);
                    y = 0.5 - std::sin(t);
                }
                ds.points(0, offset + j) = x;
                ds.points(1, offset + j) = y;
                ds.labels[static_cast<std::size_t>(offset + j)] = label;
            }
        };
        place(n_out, 0, 0);
        place(n_in, n_out, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            ds.points(0, i) += noise(rng);
            ds.points(1, i) += noise(rng);
        }
    } else if (name == "blobs" || name == "aniso") {
        const auto centers = detail::separated_centers(3, 10.0, 6.0, rng);
        ds = detail::gaussian_blobs(name, n, centers, {1.0, 1.0, 1.0}, rng);
        if (name == "aniso") {
            Eigen::Matrix2d shear;
            shear << 0.6, -0.6, -0.4, 0.8;
            ds.points = (shear * ds.points).eval();
            for (auto& m : ds.generator_means) m = shear * m;
        }
    } else if (name == "varied") {
        const auto centers = detail::separated_centers(3, 10.0, 10.0, rng);
        ds = detail::gaussian_blobs(name, n, centers, {1.0, 2.5, 0.5}, rng);
    } else if (name == "noise") {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        ds.name = name;
        ds.points.resize(2, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            ds.points(0, i) = u(rng);
            ds.points(1, i) = u(rng);
        }
        ds.labels.assign(static_cast<std::size_t>(n), 0);
    } else {
        throw InvalidArgument("unknown dataset '" + name + "'");
    }
    if (name != "noise") detail::shuffle_together(ds, rng);
    return ds;
}

// k Gaussian components in 2-d: means uniform in [-10,10]^2 at least 4 apart,
// covariances R diag(s1^2, s2^2) R^T with s in [0.5, 1] and a random rotation.
// With stratified sampling the class sizes differ by at most one; otherwise
// each sample picks its component uniformly at random.
inline LabeledDataset make_gmm(int k, Eigen::Index n, std::uint64_t seed, bool stratified = true) {
    if (k < 1) throw InvalidArgument("make_gmm: k must be >= 1");
    if (n < 1) throw InvalidArgument("make_gmm: n must be >= 1");
    Rng rng = make_rng(seed, "generator:gmm", static_cast<std::uint64_t>(k));
    const auto centers = detail::separated_centers(k, 10.0, 4.0, rng);
    std::uniform_real_distribution<double> scale(0.5, 1.0);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::vector<Eigen::Matrix2d> factors;
    for (int c = 0; c < k; ++c) {
        const double a = angle(rng);
        Eigen::Matrix2d rot;
        rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        factors.push_back(rot * Eigen::Vector2d(scale(rng), scale(rng)).asDiagonal());
    }

    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    if (stratified) {
        const auto sizes = detail::stratified_sizes(n, k);
        for (int c = 0; c < k; ++c) labels.insert(labels.end(), static_cast<std::size_t>(sizes[static_cast<std::size_t>(c)]), c);
    } else {
        std::uniform_int_distribution<int> pick(0, k - 1);
        for (Eigen::Index i = 0; i < n; ++i) labels.push_back(pick(rng));
    }

    std::normal_distribution<double> g(0.0, 1.0);
    LabeledDataset ds;
    ds.name = "gmm" + std::to_string(k);
    ds.points.resize(2, n);
    ds.labels = std::move(labels);
    ds.generator_means = centers;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)]);
        const Eigen::Vector2d z(g(rng), g(rng));
        ds.points.col(i) = centers[c] + factors[c] * z;
    }
    detail::shuffle_together(ds, rng);
    return ds;
}

// Arrival order: Mode A is a seeded shuffle, Mode B a stable sort on one axis.
inline std::vector<Eigen::Index> stream_permutation(const Eigen::MatrixXd& points, const StreamOrder& order,
                                                    std::uint64_t seed) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(points.cols()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    if (order.mode == StreamMode::A) {
        Rng rng = make_rng(seed, "shuffle");
        std::shuffle(perm.begin(), perm.end(), rng);
    } else {
        if (order.sort_axis < 0 || order.sort_axis >= points.rows()) throw InvalidArgument("sort axis out of range");
        std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index b) {
            return points(order.sort_axis, a) < points(order.sort_axis, b);
        });
    }
    return perm;
}

inline std::vector<Batch> order_and_batch(const Eigen::MatrixXd& points, const StreamOrder& order,
                                          Eigen::Index batch_size, std::uint64_t seed) {
    if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
    const auto perm = stream_permutation(points, order, seed);
    std::vector<Batch> batches;
    for (Eigen::Index start = 0; start < points.cols(); start += batch_size) {
        const Eigen::Index len = std::min(batch_size, points.cols() - start);
        Batch b;
        b.index = batches.size();
        b.points.resize(points.rows(), len);
        for (Eigen::Index j = 0; j < len; ++j) b.points.col(j) = points.col(perm[static_cast<std::size_t>(start + j)]);
        batches.push_back(std::move(b));
    }
    return batches;
}

// ---- CSV -----------------------------------------------------------------

// Writes "label,x1,...,xd" rows.
inline void write_dataset_csv(std::ostream& os, const LabeledDataset& ds) {
    os << "label";
    for (int j = 0; j < ds.dim(); ++j) os << ",x" << (j + 1);
    os << '\n';
    os.precision(17);
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        os << ds.labels[static_cast<std::size_t>(i)];
        for (int j = 0; j < ds.dim(); ++j) os << ',' << ds.points(j, i);
        os << '\n';
    }
}

struct CsvData {
    Eigen::MatrixXd points;  // d x N
    std::optional<std::vector<int>> labels;
    std::optional<Eigen::VectorXd> weights;
};

// Reads a CSV with a header row. A "label" column is taken as ground truth and
// a "weight" column as sample weights; every other column is a coordinate.
inline CsvData read_points_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InvalidArgument("csv: missing header");
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
            out.push_back(cell);
        }
        return out;
    };
    const auto header = split(line);
    int label_col = -1, weight_col = -1;
    std::vector<int> coord_cols;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        if (header[static_cast<std::size_t>(c)] == "label") label_col = c;
        else if (header[static_cast<std::size_t>(c)] == "weight") weight_col = c;
        else coord_cols.push_back(c);
    }
    if (coord_cols.empty()) throw InvalidArgument("csv: no coordinate columns");

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<double> weights;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw InvalidArgument("csv: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                  " fields, expected " + std::to_string(header.size()));
        try {
            std::vector<double> row;
            for (int c : coord_cols) row.push_back(std::stod(cells[static_cast<std::size_t>(c)]));
            rows.push_back(std::move(row));
            if (label_col >= 0) labels.push_back(std::stoi(cells[static_cast<std::size_t>(label_col)]));
            if (weight_col >= 0) weights.push_back(std::stod(cells[static_cast<std::size_t>(weight_col)]));
        } catch (const std::logic_error&) {
            throw InvalidArgument("csv: unparsable value on line " + std::to_string(line_no));
        }
    }
    if (rows.empty()) throw InvalidArgument("csv: no data rows");

    CsvData out;
    out.points.resize(static_cast<Eigen::Index>(coord_cols.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < coord_cols.size(); ++j)
            out.points(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[i][j];
    if (label_col >= 0) out.labels = std::move(labels);
    if (weight_col >= 0) out.weights = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    return out;
}

}  // namespace opwg
