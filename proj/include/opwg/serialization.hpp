#pragma once

// JSON and CSV exchange formats.
//
// Model:      {"dim", "covariance_kind", "components": [{"pi", "mean", "cov"}]}
//             cov is flat: d variances (diagonal) or d*d row-major (full).
// Prototypes: {"dim", "prototypes": [{"batch_index", "weight", "centroid"}]}
//             CSV: batch_index,weight,c1..cd

#include <Eigen/Core>

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "opwg/error.hpp"
#include "opwg/mixture.hpp"
#include "opwg/stream.hpp"

namespace opwg {

using json = nlohmann::json;

namespace detail {

inline std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline json model_to_json(const MixtureModel& model) {
    json comps = json::array();
    for (std::size_t k = 0; k < model.components.size(); ++k) {
        const auto& c = model.components[k];
        std::vector<double> cov;
        if (c.covariance.kind() == CovarianceKind::Diagonal) {
            cov = detail::to_vec(c.covariance.values().col(0));
        } else {
            const Eigen::MatrixXd& m = c.covariance.values();
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index col = 0; col < m.cols(); ++col) cov.push_back(m(r, col));
        }
        comps.push_back({{"pi", model.mixing[k]}, {"mean", detail::to_vec(c.mean)}, {"cov", cov}});
    }
    return {{"dim", model.dim()}, {"covariance_kind", to_string(model.covariance_kind)}, {"components", comps}};
}

inline MixtureModel model_from_json(const json& j) {
    try {
        MixtureModel model;
        const int d = j.at("dim").get<int>();
        model.covariance_kind = covariance_kind_from_string(j.at("covariance_kind").get<std::string>());
        for (const auto& c : j.at("components")) {
            const auto mean = c.at("mean").get<std::vector<double>>();
            const auto cov = c.at("cov").get<std::vector<double>>();
            if (static_cast<int>(mean.size()) != d) throw InvalidArgument("model json: mean length differs from dim");
            GaussianComponent comp{detail::from_vec(mean), Covariance::diagonal(Eigen::VectorXd::Ones(d))};
            if (model.covariance_kind == CovarianceKind::Diagonal) {
                if (static_cast<int>(cov.size()) != d) throw InvalidArgument("model json: diagonal cov must have dim entries");
                comp.covariance = Covariance::diagonal(detail::from_vec(cov));
            } else {
                if (static_cast<int>(cov.size()) != d * d) throw InvalidArgument("model json: full cov must have dim^2 entries");
                Eigen::MatrixXd m(d, d);
                for (int r = 0; r < d; ++r)
                    for (int col = 0; col < d; ++col) m(r, col) = cov[static_cast<std::size_t>(r * d + col)];
                comp.covariance = Covariance::full(std::move(m));
            }
            if (auto problem = validate(comp)) throw InvalidArgument("model json: " + *problem);
            model.components.push_back(std::move(comp));
            model.mixing.push_back(c.at("pi").get<double>());
        }
        model.check();
        return model;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("model json: ") + e.what());
    }
}

inline json prototypes_to_json(const PrototypeSet& set) {
    json entries = json::array();
    for (const auto& p : set.entries)
        entries.push_back({{"batch_index", p.source_batch}, {"weight", p.weight}, {"centroid", detail::to_vec(p.centroid)}});
    return {{"dim", set.dim}, {"prototypes", entries}};
}

inline PrototypeSet prototypes_from_json(const json& j) {
    try {
        PrototypeSet set;
        set.dim = j.at("dim").get<int>();
        for (const auto& e : j.at("prototypes")) {
            const auto c = e.at("centroid").get<std::vector<double>>();
            if (static_cast<int>(c.size()) != set.dim) throw InvalidArgument("prototype json: centroid length differs from dim");
            const double w = e.at("weight").get<double>();
            if (!(w > 0.0)) throw InvalidArgument("prototype json: non-positive weight");
            set.entries.push_back({detail::from_vec(c), w, e.at("batch_index").get<std::size_t>()});
        }
        return set;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("prototype json: ") + e.what());
    }
}

inline void write_prototypes_csv(std::ostream& os, const PrototypeSet& set) {
    os << "batch_index,weight";
    for (int j = 0; j < set.dim; ++j) os << ",c" << (j + 1);
    os << '\n';
    os.precision(17);
    for (const auto& p : set.entries) {
        os << p.source_batch << ',' << p.weight;
        for (Eigen::Index j = 0; j < p.centroid.size(); ++j) os << ',' << p.centroid(j);
        os << '\n';
    }
}

inline PrototypeSet read_prototypes_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InvalidArgument("prototype csv: missing header");
    const auto fields = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
    if (fields < 3) throw InvalidArgument("prototype csv: expected batch_index,weight,c1..cd");
    PrototypeSet set;
    set.dim = fields - 2;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != fields) throw InvalidArgument("prototype csv: wrong field count");
        Prototype p;
        try {
            p.source_batch = std::stoul(cells[0]);
            p.weight = std::stod(cells[1]);
            p.centroid.resize(set.dim);
            for (int j = 0; j < set.dim; ++j) p.centroid(j) = std::stod(cells[static_cast<std::size_t>(j + 2)]);
        } catch (const std::logic_error&) {
            throw InvalidArgument("prototype csv: unparsable value");
        }
        if (!(p.weight > 0.0)) throw InvalidArgument("prototype csv: non-positive weight");
        set.entries.push_back(std::move(p));
    }
    return set;
}

}  // namespace opwg
