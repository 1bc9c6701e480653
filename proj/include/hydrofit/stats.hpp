#pragma once

#include <Eigen/Dense>

#include "hydrofit/types.hpp"

namespace hydrofit {

/// PCA of the normalized N x 4 data matrix [v, v_dot, v_ddot, P].
/// Columns of `eigenvectors` are the PCs sorted by descending eigenvalue;
/// the largest-magnitude entry of each PC is made positive. lambda_norm
/// holds the eigenvalues divided by their trace (sums to 1).
struct PcaResult {
    Eigen::Matrix4d eigenvectors;
    Eigen::Vector4d lambda_norm;
    Eigen::Vector4d mu;
    Eigen::Vector4d sigma;
};

/// Pearson correlations of pressure against v, v_dot, v_ddot.
struct Correlations {
    double p_v = 0.0;
    double p_vdot = 0.0;
    double p_vddot = 0.0;
};

/// Rows ordered by (trajectory, time); columns [v, v_dot, v_ddot, P].
/// Throws MissingDerivativesError unless every trajectory has its
/// derivative columns populated.
Eigen::MatrixXd build_data_matrix(const Dataset& ds);

/// Two-pass Pearson correlations. Requires N >= 3 and nonzero variance in
/// P and in each paired column (DegenerateColumnError).
Correlations correlations(const Eigen::MatrixXd& X);

/// Requires N >= 5 and nonzero column variances.
PcaResult pca(const Eigen::MatrixXd& X);

}  // namespace hydrofit
