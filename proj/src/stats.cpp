#include "hydrofit/stats.hpp"

#include <cmath>

#include "hydrofit/errors.hpp"

namespace hydrofit {

Eigen::MatrixXd build_data_matrix(const Dataset& ds) {
    if (!ds.has_vdot() || !ds.has_vddot()) {
        throw MissingDerivativesError(
            "dataset derivative columns are not populated; run differentiate() or load a CSV "
            "with vdot/vddot columns");
    }
    Eigen::MatrixXd X(ds.n_samples(), 4);
    Eigen::Index row = 0;
    for (const Trajectory& traj : ds.trajectories) {
        for (const Sample& s : traj.samples()) {
            X(row, 0) = s.v;
            X(row, 1) = s.v_dot;
            X(row, 2) = s.v_ddot;
            X(row, 3) = s.p;
            ++row;
        }
    }
    return X;
}

namespace {

// Two-pass Pearson correlation; single-pass formulas cancel catastrophically
// on data with large means (v is O(500) with small variance segments).
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double mean_a = a.mean();
    const double mean_b = b.mean();
    const Eigen::VectorXd da = a.array() - mean_a;
    const Eigen::VectorXd db = b.array() - mean_b;
    const double var_a = da.squaredNorm();
    const double var_b = db.squaredNorm();
    if (var_a == 0.0 || var_b == 0.0) {
        throw DegenerateColumnError("correlation of a zero-variance column");
    }
    return da.dot(db) / std::sqrt(var_a * var_b);
}

}  // namespace

Correlations correlations(const Eigen::MatrixXd& X) {
    if (X.cols() != 4) {
        throw ShapeMismatchError("data matrix must have 4 columns");
    }
    if (X.rows() < 3) {
        throw TooFewSamplesError("correlations need N >= 3");
    }
    Correlations c;
    c.p_v = pearson(X.col(3), X.col(0));
    c.p_vdot = pearson(X.col(3), X.col(1));
    c.p_vddot = pearson(X.col(3), X.col(2));
    return c;
}

PcaResult pca(const Eigen::MatrixXd& X) {
    if (X.cols() != 4) {
        throw ShapeMismatchError("data matrix must have 4 columns");
    }
    const Eigen::Index n = X.rows();
    if (n < 5) {
        throw TooFewSamplesError("pca needs N >= 5");
    }

    PcaResult result;
    result.mu = X.colwise().mean();
    for (int c = 0; c < 4; ++c) {
        const double ss = (X.col(c).array() - result.mu(c)).square().sum();
        result.sigma(c) = std::sqrt(ss / static_cast<double>(n - 1));
        if (result.sigma(c) == 0.0) {
            throw DegenerateColumnError("pca column " + std::to_string(c) +
                                        " has zero variance");
        }
    }

    // (1/(N-1)) X'^T X' with X' = (X - mu)/sigma is the sample correlation
    // matrix; a 4x4 symmetric eigensolve is all that is needed.
    Eigen::MatrixXd centered = X.rowwise() - result.mu.transpose();
    centered.array().rowwise() /= result.sigma.transpose().array();
    const Eigen::Matrix4d corr =
        (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(corr);
    if (solver.info() != Eigen::Success) {
        throw Error("eigendecomposition failed");
    }

    // Eigen returns ascending eigenvalues; emit descending.
    Eigen::Vector4d lambda;
    for (int c = 0; c < 4; ++c) {
        lambda(c) = solver.eigenvalues()(3 - c);
        result.eigenvectors.col(c) = solver.eigenvectors().col(3 - c);
    }
    // Correlation matrices are PSD; clip the roundoff negatives.
    lambda = lambda.cwiseMax(0.0);
    result.lambda_norm = lambda / lambda.sum();

    // Sign convention: the largest-magnitude component of each PC is positive.
    for (int c = 0; c < 4; ++c) {
        int arg_max = 0;
        result.eigenvectors.col(c).cwiseAbs().maxCoeff(&arg_max);
        if (result.eigenvectors(arg_max, c) < 0.0) {
            result.eigenvectors.col(c) = -result.eigenvectors.col(c);
        }
    }
    return result;
}

}  // namespace hydrofit
