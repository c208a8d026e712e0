#pragma once

#include "raptor/core.hpp"

#include <Eigen/Dense>

namespace raptor {

/// Principal axes of a sample matrix (one sample per row), from the
/// eigendecomposition of the full covariance.
struct PcaFit {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;   // dim x k, columns by decreasing variance
    Eigen::VectorXd eigenvalues;  // all dim eigenvalues, decreasing, clamped at 0
    double total_variance = 0.0;

    double explained_ratio(Eigen::Index k) const {
        if (total_variance <= 0.0) return 1.0;
        return eigenvalues.head(k).sum() / total_variance;
    }

    Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const {
        return (rows.rowwise() - mean.transpose()) * components;
    }

    Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& scores) const {
        return (scores * components.transpose()).rowwise() + mean.transpose();
    }
};

/// `center` given => use it instead of the sample mean.
inline PcaFit fit_pca(const Eigen::MatrixXd& rows, Eigen::Index k, const Eigen::VectorXd* center = nullptr) {
    if (rows.rows() < 1 || k < 1 || k > rows.cols())
        throw Error(ErrorCode::InvalidArgument, "pca: need rows >= 1 and 1 <= k <= dim");
    PcaFit fit;
    fit.mean = center ? *center : Eigen::VectorXd(rows.colwise().mean().transpose());
    const Eigen::MatrixXd centered = rows.rowwise() - fit.mean.transpose();
    const double denom = rows.rows() > 1 ? static_cast<double>(rows.rows() - 1) : 1.0;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    fit.eigenvalues = es.eigenvalues().reverse().cwiseMax(0.0);
    fit.total_variance = cov.trace();
    fit.components = es.eigenvectors().rightCols(k).rowwise().reverse();
    // Deterministic sign: the largest-magnitude entry of each axis is positive.
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::Index arg = 0;
        fit.components.col(c).cwiseAbs().maxCoeff(&arg);
        if (fit.components(arg, c) < 0) fit.components.col(c) *= -1.0;
    }
    return fit;
}

} // namespace raptor
