#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hydrofit/models.hpp"
#include "hydrofit/types.hpp"

namespace hydrofit {

/// Knobs for the iterative fitters. The NN optimizer, learning rate and
/// batch size are not pinned by any benchmark; the defaults here are this
/// library's choices (3000 epochs matches the reported convergence budget).
struct FitConfig {
    int lm_max_iter = 200;
    double lm_lambda0 = 1e-3;
    double lm_tol = 1e-10;       // relative cost change
    int nn_epochs = 3000;
    double nn_lr = 1e-3;
    int nn_batch = 256;
    std::uint64_t seed = 0;
    int multistart = 8;          // LM restarts
    double nn_val_fraction = 0.1;  // trajectory share held out for early stopping
};

/// Throws InvariantError on non-positive knobs (nn_epochs == 0 is allowed:
/// it returns the seeded initialization untouched).
void validate(const FitConfig& cfg);

struct FitResult {
    FittedModel model;
    bool converged = true;
    std::vector<std::string> warnings;
};

/// Least squares via SVD (never the normal equations). Requires N >= cols
/// and condition number <= 1e12 (RankDeficientError otherwise). The
/// returned theta satisfies ||X^T(y - X theta)||_max <= 1e-6 ||X^T y||_max.
Eigen::VectorXd fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Levenberg-Marquardt over the exponential rates with the linear
/// parameters (alpha, gamma, delta) projected out per step. Multistart over
/// a seeded rate grid; for k > 1 one restart warm-starts from the fitted
/// k-1 model, which makes the nested-k cost monotone. Non-convergence of
/// every restart is reported as a warning on the best model, not an error.
FitResult fit_exponential(const Dataset& ds, const ModelSpec& spec, const FitConfig& cfg);

/// design_matrix_poly + column-scaled fit_linear. Warns when a
/// highest-degree coefficient collapses below 1e-15 after scaling.
FitResult fit_poly(const Dataset& ds, const ModelSpec& spec);

/// Mini-batch Adam on z-scored inputs/targets, deterministic under
/// cfg.seed; returns the parameters with the best validation RMSE.
FitResult fit_nn(const Dataset& ds, const ModelSpec& spec, const FitConfig& cfg);

// --- NN internals, exposed for gradient checks and training diagnostics ---

/// Flattened, normalized training rows for the NN families. Inputs are
/// [v, v_dot, lag_1 v, lag_1 v_dot, ...] z-scored per column kind.
struct NnTrainingData {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets;
    Normalization norm;
};

NnTrainingData nn_training_data(const Dataset& ds, const ModelSpec& spec);

/// Seeded He-style initialization of the cascade.
NnParams nn_init(const ModelSpec& spec, std::uint64_t seed);

/// Mean squared error of the normalized forward pass over the given rows.
double nn_loss(const NnParams& params, const Eigen::MatrixXd& inputs,
               const Eigen::VectorXd& targets);

/// Analytic gradient of nn_loss with respect to the flat parameter vector.
std::vector<double> nn_loss_gradient(const NnParams& params, const Eigen::MatrixXd& inputs,
                                     const Eigen::VectorXd& targets);

}  // namespace hydrofit
