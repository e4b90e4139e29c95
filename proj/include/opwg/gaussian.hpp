#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include "opwg/error.hpp"

namespace opwg {

enum class CovarianceKind { Diagonal, Full };

inline const char* to_string(CovarianceKind kind) {
    return kind == CovarianceKind::Diagonal ? "diagonal" : "full";
}

inline CovarianceKind covariance_kind_from_string(const std::string& s) {
    if (s == "diagonal" || s == "diag") return CovarianceKind::Diagonal;
    if (s == "full") return CovarianceKind::Full;
    throw InvalidArgument("unknown covariance kind '" + s + "'");
}

// Number of free parameters of one mixture component (mixing weight, mean, covariance).
inline int free_parameters(CovarianceKind kind, int dim) {
    return kind == CovarianceKind::Full ? dim * (dim + 1) / 2 + dim + 1 : 2 * dim + 1;
}

// Either a vector of per-axis variances or a dense symmetric matrix.
class Covariance {
public:
    static Covariance diagonal(Eigen::VectorXd variances) {
        Covariance c;
        c.kind_ = CovarianceKind::Diagonal;
        c.values_ = std::move(variances);
        return c;
    }

    static Covariance full(Eigen::MatrixXd matrix) {
        Covariance c;
        c.kind_ = CovarianceKind::Full;
        c.values_ = std::move(matrix);
        return c;
    }

    CovarianceKind kind() const { return kind_; }
    int dim() const { return static_cast<int>(values_.rows()); }

    // Variances for Diagonal, the d x d matrix for Full.
    const Eigen::MatrixXd& values() const { return values_; }

    Eigen::MatrixXd dense() const {
        if (kind_ == CovarianceKind::Full) return values_;
        return values_.col(0).asDiagonal();
    }

    Eigen::VectorXd diagonal_entries() const {
        if (kind_ == CovarianceKind::Full) return values_.diagonal();
        return values_.col(0);
    }

    Covariance scaled(double factor) const {
        Covariance c = *this;
        c.values_ *= factor;
        return c;
    }

private:
    Covariance() = default;

    CovarianceKind kind_ = CovarianceKind::Diagonal;
    Eigen::MatrixXd values_;
};

struct GaussianComponent {
    Eigen::VectorXd mean;
    Covariance covariance;

    int dim() const { return static_cast<int>(mean.size()); }
};

// Returns an empty optional when the component satisfies its invariants, or a
// diagnostic naming the first violated one.
inline std::optional<std::string> validate(const GaussianComponent& component) {
    const auto& cov = component.covariance;
    if (cov.dim() != component.dim()) return "dimension mismatch between mean and covariance";
    if (component.dim() == 0) return "empty component";
    if (cov.kind() == CovarianceKind::Diagonal) {
        if (cov.values().cols() != 1) return "diagonal covariance must be a vector";
        for (Eigen::Index j = 0; j < cov.values().rows(); ++j) {
            const double v = cov.values()(j, 0);
            if (!(v > 0.0) || !std::isfinite(v)) return "non-positive variance";
        }
        return std::nullopt;
    }
    const Eigen::MatrixXd& m = cov.values();
    if (m.cols() != m.rows()) return "full covariance must be square";
    if (!m.allFinite()) return "non-finite covariance entry";
    const double scale = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return "not symmetric";
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return "not positive-definite";
    return std::nullopt;
}

// A component with its covariance factorized once, ready for repeated
// log-density evaluation. Full covariances keep the lower Cholesky factor and
// solve against it per sample; diagonal ones keep the inverse variances.
class PreparedGaussian {
public:
    explicit PreparedGaussian(const GaussianComponent& component)
        : mean_(component.mean), kind_(component.covariance.kind()) {
        if (auto problem = validate(component)) throw InvalidArgument("invalid covariance: " + *problem);
        const int d = component.dim();
        double log_det = 0.0;
        if (kind_ == CovarianceKind::Diagonal) {
            const Eigen::VectorXd var = component.covariance.values().col(0);
            inv_var_ = var.cwiseInverse();
            log_det = var.array().log().sum();
        } else {
            Eigen::LLT<Eigen::MatrixXd> llt(component.covariance.values());
            chol_ = llt.matrixL();
            log_det = 2.0 * chol_.diagonal().array().log().sum();
        }
        half_dim_ = 0.5 * d;
        log_norm_ = -half_dim_ * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
    }

    int dim() const { return static_cast<int>(mean_.size()); }

    // (x - mean)^T Sigma^{-1} (x - mean)
    template <typename Derived>
    double mahalanobis_sq(const Eigen::MatrixBase<Derived>& x) const {
        if (kind_ == CovarianceKind::Diagonal) {
            double q = 0.0;
            for (Eigen::Index j = 0; j < mean_.size(); ++j) {
                const double r = x(j) - mean_(j);
                q += r * r * inv_var_(j);
            }
            return q;
        }
        Eigen::VectorXd r = x - mean_;
        chol_.triangularView<Eigen::Lower>().solveInPlace(r);
        return r.squaredNorm();
    }

    // Squared Mahalanobis distance of every column of a d x N matrix.
    Eigen::VectorXd mahalanobis_sq_all(const Eigen::MatrixXd& points) const {
        Eigen::MatrixXd diff = points.colwise() - mean_;
        if (kind_ == CovarianceKind::Diagonal)
            return (diff.array().square().colwise() * inv_var_.array()).colwise().sum().transpose();
        chol_.triangularView<Eigen::Lower>().solveInPlace(diff);
        return diff.colwise().squaredNorm().transpose();
    }

    // -(d/2) ln(2 pi) - (1/2) ln|Sigma|
    double log_norm() const { return log_norm_; }

    // log N(x; mean, Sigma / weight), without exponentiating anything.
    template <typename Derived>
    double log_density(const Eigen::MatrixBase<Derived>& x, double weight) const {
        return log_norm_ + half_dim_ * std::log(weight) - 0.5 * weight * mahalanobis_sq(x);
    }

    // Unit-weight form; skips the log(weight) term entirely.
    template <typename Derived>
    double log_density(const Eigen::MatrixBase<Derived>& x) const {
        return log_norm_ - 0.5 * mahalanobis_sq(x);
    }

private:
    Eigen::VectorXd mean_;
    CovarianceKind kind_;
    Eigen::VectorXd inv_var_;
    Eigen::MatrixXd chol_;
    double half_dim_ = 0.0;
    double log_norm_ = 0.0;
};

inline double log_density(const Eigen::Ref<const Eigen::VectorXd>& x, const GaussianComponent& component,
                          double weight) {
    if (x.size() != component.dim()) throw InvalidArgument("log_density: dimension mismatch");
    if (!(weight > 0.0)) throw InvalidArgument("log_density: weight must be positive");
    return PreparedGaussian(component).log_density(x, weight);
}

}  // namespace opwg
