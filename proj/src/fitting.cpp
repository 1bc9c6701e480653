#include "hydrofit/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hydrofit/rng.hpp"

namespace hydrofit {

void validate(const FitConfig& cfg) {
    if (cfg.lm_max_iter <= 0) throw InvariantError("lm_max_iter must be positive");
    if (!(cfg.lm_lambda0 > 0.0)) throw InvariantError("lm_lambda0 must be positive");
    if (!(cfg.lm_tol > 0.0)) throw InvariantError("lm_tol must be positive");
    if (cfg.nn_epochs < 0) throw InvariantError("nn_epochs must be >= 0");
    if (!(cfg.nn_lr > 0.0)) throw InvariantError("nn_lr must be positive");
    if (cfg.nn_batch <= 0) throw InvariantError("nn_batch must be positive");
    if (cfg.multistart <= 0) throw InvariantError("multistart must be positive");
    if (!(cfg.nn_val_fraction > 0.0 && cfg.nn_val_fraction < 1.0)) {
        throw InvariantError("nn_val_fraction must lie in (0, 1)");
    }
}

// ---------------------------------------------------------------------------
// Linear least squares

Eigen::VectorXd fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) {
        throw LengthMismatchError("X has " + std::to_string(X.rows()) + " rows but y has " +
                                  std::to_string(y.size()));
    }
    if (X.rows() < X.cols()) {
        throw TooFewSamplesError("least squares needs N >= nu: N = " + std::to_string(X.rows()) +
                                 ", nu = " + std::to_string(X.cols()));
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (!(smin > 0.0) || smax / smin > 1e12) {
        throw RankDeficientError("design matrix condition number exceeds 1e12");
    }
    return svd.solve(y);
}

// ---------------------------------------------------------------------------
// Polynomial families

FitResult fit_poly(const Dataset& ds, const ModelSpec& spec) {
    if (spec.family != Family::Poly && spec.family != Family::PolyAR) {
        throw UnsupportedFamilyError("fit_poly requires a polynomial family");
    }
    auto [X, y] = design_matrix_poly(ds, spec);

    // The monomial columns span huge dynamic ranges (v^3*vdot^2 reaches
    // ~1e12 while the intercept stays 1); scale each column to max-abs 1
    // before the SVD and unscale the coefficients afterwards.
    Eigen::VectorXd scale(X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double s = X.col(c).cwiseAbs().maxCoeff();
        scale(c) = s > 0.0 ? s : 1.0;
        X.col(c) /= scale(c);
    }
    const Eigen::VectorXd theta_scaled = fit_linear(X, y);

    FitResult result;
    // Find the scaled coefficient of the (n,m) monomial: it is the last
    // monomial column in row-major order.
    const int n_mono = (spec.n + 1) * (spec.m + 1) - static_cast<int>(spec.term_mask.size());
    const double top_scaled = theta_scaled(n_mono - 1);
    if (std::abs(top_scaled) <= 1e-15) {
        result.warnings.push_back("highest-degree coefficient is numerically zero (" +
                                  std::to_string(top_scaled) +
                                  " after column scaling); the effective degree is lower");
    }

    const Eigen::VectorXd theta = theta_scaled.cwiseQuotient(scale);
    result.model.spec = spec;
    result.model.params.assign(theta.data(), theta.data() + theta.size());
    result.model.nu = count_params(spec);
    result.model.trained_on = dataset_fingerprint(ds);
    validate(result.model);
    return result;
}

// ---------------------------------------------------------------------------
// Exponential family: variable-projection Levenberg-Marquardt

namespace {

struct ExpData {
    Eigen::VectorXd v, v_dot, y;
};

ExpData flatten_for_exp(const Dataset& ds) {
    ExpData data;
    const std::size_t n = ds.n_samples();
    data.v.resize(n);
    data.v_dot.resize(n);
    data.y.resize(n);
    Eigen::Index row = 0;
    for (const Trajectory& traj : ds.trajectories) {
        for (const Sample& s : traj.samples()) {
            data.v(row) = s.v;
            data.v_dot(row) = s.v_dot;
            data.y(row) = s.p;
            ++row;
        }
    }
    return data;
}

constexpr double kBetaBound = 0.1;  // 1/mm^3; v stays below ~7000 mm^3

/// Design matrix for fixed rates: columns [exp(beta_i v)..., v_dot, 1].
Eigen::MatrixXd exp_design(const ExpData& data, const Eigen::VectorXd& beta) {
    const Eigen::Index n = data.v.size();
    const Eigen::Index k = beta.size();
    Eigen::MatrixXd A(n, k + 2);
    for (Eigen::Index i = 0; i < k; ++i) {
        A.col(i) = (beta(i) * data.v.array()).exp();
    }
    A.col(k) = data.v_dot;
    A.col(k + 1).setOnes();
    return A;
}

struct ProjectedSolve {
    Eigen::VectorXd theta;     // linear params for the scaled-back design
    Eigen::VectorXd residual;  // y - A theta
    double cost;               // squared residual norm
    Eigen::MatrixXd thin_u;    // for projections onto the column space
};

/// Column-scaled SVD solve tolerant of transiently duplicated rates
/// (minimum-norm solution instead of an error).
ProjectedSolve solve_linear_projected(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
    Eigen::MatrixXd As = A;
    Eigen::VectorXd scale(A.cols());
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
        const double s = As.col(c).cwiseAbs().maxCoeff();
        scale(c) = s > 0.0 ? s : 1.0;
        As.col(c) /= scale(c);
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(As, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    ProjectedSolve out;
    out.theta = svd.solve(y).cwiseQuotient(scale);
    out.residual = y - A * out.theta;
    out.cost = out.residual.squaredNorm();
    const Eigen::Index rank = svd.rank();
    out.thin_u = svd.matrixU().leftCols(rank);
    return out;
}

struct LmOutcome {
    Eigen::VectorXd beta;
    Eigen::VectorXd theta;
    double cost = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

LmOutcome lm_variable_projection(const ExpData& data, Eigen::VectorXd beta,
                                 const FitConfig& cfg) {
    const Eigen::Index k = beta.size();
    beta = beta.cwiseMax(-kBetaBound).cwiseMin(kBetaBound);

    ProjectedSolve current = solve_linear_projected(exp_design(data, beta), data.y);
    double lambda = cfg.lm_lambda0;
    LmOutcome out;
    out.beta = beta;
    out.theta = current.theta;
    out.cost = current.cost;

    for (int iter = 0; iter < cfg.lm_max_iter; ++iter) {
        out.iterations = iter + 1;
        if (current.cost <= 1e-24) {
            out.converged = true;
            break;
        }
        // Kaufman variable-projection Jacobian: only column i of the design
        // depends on beta_i, d r / d beta_i = -P_perp (v .* exp(beta_i v)) alpha_i.
        Eigen::MatrixXd jac(data.v.size(), k);
        for (Eigen::Index i = 0; i < k; ++i) {
            Eigen::VectorXd u =
                current.theta(i) * (data.v.array() * (beta(i) * data.v.array()).exp()).matrix();
            jac.col(i) = -(u - current.thin_u * (current.thin_u.transpose() * u));
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * current.residual;

        bool stepped = false;
        for (int attempt = 0; attempt < 25; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            for (Eigen::Index i = 0; i < k; ++i) {
                damped(i, i) += lambda * std::max(jtj(i, i), 1e-30);
            }
            const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
            Eigen::VectorXd candidate =
                (beta + delta).cwiseMax(-kBetaBound).cwiseMin(kBetaBound);
            ProjectedSolve trial = solve_linear_projected(exp_design(data, candidate), data.y);
            if (trial.cost < current.cost) {
                const double rel_drop = (current.cost - trial.cost) /
                                        std::max(current.cost, 1e-300);
                beta = candidate;
                current = std::move(trial);
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                out.beta = beta;
                out.theta = current.theta;
                out.cost = current.cost;
                if (rel_drop < cfg.lm_tol) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e14) break;
        }
        if (out.converged) break;
        if (!stepped) {
            // No damping level improves the cost: local minimum.
            out.converged = true;
            break;
        }
    }
    return out;
}

std::vector<double> beta_grid(double v_max) {
    const double scale = v_max > 0.0 ? 550.0 / v_max : 1.0;
    std::vector<double> grid;
    for (double base : {0.002, 0.005, 0.01, 0.02}) {
        grid.push_back(std::min(base * scale, kBetaBound));
        grid.push_back(std::max(-base * scale, -kBetaBound));
    }
    return grid;
}

}  // namespace

FitResult fit_exponential(const Dataset& ds, const ModelSpec& spec, const FitConfig& cfg) {
    if (spec.family != Family::Exponential) {
        throw UnsupportedFamilyError("fit_exponential requires the exponential family");
    }
    validate(spec);
    validate(cfg);
    const ExpData data = flatten_for_exp(ds);
    const int k = spec.k;
    if (data.y.size() < static_cast<Eigen::Index>(2 * k + 2)) {
        throw TooFewSamplesError("exponential fit needs N >= nu");
    }
    const std::vector<double> grid = beta_grid(data.v.maxCoeff());

    std::vector<Eigen::VectorXd> starts;
    SplitMix64 rng(derive_seed(cfg.seed, 0xe1));
    for (int r = 0; r < cfg.multistart; ++r) {
        Eigen::VectorXd beta(k);
        std::vector<double> pool = grid;
        deterministic_shuffle(pool, rng);
        for (int i = 0; i < k; ++i) {
            if (i < static_cast<int>(pool.size())) {
                beta(i) = pool[static_cast<std::size_t>(i)];
            } else {
                beta(i) = (rng.next_double() * 2.0 - 1.0) * 0.02;
            }
        }
        starts.push_back(beta);
    }

    // Warm start from the fitted k-1 model; with the new term's weight free
    // the projected cost at the start already matches the smaller model, so
    // cost(k) <= cost(k-1) holds by construction.
    if (k > 1) {
        ModelSpec smaller = spec;
        smaller.k = k - 1;
        const FitResult prev = fit_exponential(ds, smaller, cfg);
        const ExpParams prev_params = ExpParams::from_flat(smaller, prev.model.params);
        Eigen::VectorXd beta(k);
        for (int i = 0; i < k - 1; ++i) beta(i) = prev_params.beta[static_cast<std::size_t>(i)];
        double candidate = grid.front();
        for (double g : grid) {
            bool clashes = false;
            for (int i = 0; i < k - 1; ++i) {
                if (std::abs(beta(i) - g) < 1e-6) clashes = true;
            }
            if (!clashes) {
                candidate = g;
                break;
            }
        }
        beta(k - 1) = candidate;
        starts.push_back(beta);
    }

    LmOutcome best;
    for (const Eigen::VectorXd& start : starts) {
        LmOutcome outcome = lm_variable_projection(data, start, cfg);
        if (outcome.cost < best.cost) best = outcome;
    }

    // Enforce pairwise-distinct rates; a duplicated pair means the extra
    // term carries no information, so nudging one rate keeps the cost.
    bool nudged = true;
    while (nudged) {
        nudged = false;
        for (int i = 0; i < k && !nudged; ++i) {
            for (int j = i + 1; j < k && !nudged; ++j) {
                if (std::abs(best.beta(i) - best.beta(j)) < 1e-9) {
                    best.beta(j) += 1e-6 * (1.0 + std::abs(best.beta(j)));
                    if (best.beta(j) > kBetaBound) best.beta(j) -= 2e-6 * (1.0 + kBetaBound);
                    nudged = true;
                }
            }
        }
        if (nudged) {
            const ProjectedSolve solved =
                solve_linear_projected(exp_design(data, best.beta), data.y);
            best.theta = solved.theta;
            best.cost = solved.cost;
        }
    }

    FitResult result;
    ExpParams params;
    params.alpha.assign(best.theta.data(), best.theta.data() + k);
    params.beta.assign(best.beta.data(), best.beta.data() + k);
    params.gamma = best.theta(k);
    params.delta = best.theta(k + 1);
    result.model.spec = spec;
    result.model.params = params.to_flat();
    result.model.nu = count_params(spec);
    result.model.trained_on = dataset_fingerprint(ds);
    result.converged = best.converged;
    if (!best.converged) {
        result.warnings.push_back("no LM restart met the tolerance within " +
                                  std::to_string(cfg.lm_max_iter) +
                                  " iterations; returning the best cost " +
                                  std::to_string(best.cost));
    }
    validate(result.model);
    return result;
}

// ---------------------------------------------------------------------------
// NN families

namespace {

struct NnLayout {
    int d = 0, p = 0;
    std::vector<int> w_off, b_off;
    int w_out_off = 0, b_out_off = 0;
    int total = 0;
    int in_width = 0;  // 2 + 2p

    explicit NnLayout(const ModelSpec& spec) {
        d = spec.d;
        p = (spec.family == Family::NNAR) ? spec.p : 0;
        in_width = 2 + 2 * p;
        int off = 0;
        for (int l = 0; l < d; ++l) {
            w_off.push_back(off);
            const int width = (l == 0 ? 2 : 3) + 2 * p;
            off += width;
            b_off.push_back(off);
            off += 1;
        }
        w_out_off = off++;
        b_out_off = off++;
        total = off;
    }
    int width(int layer) const { return (layer == 0 ? 2 : 3) + 2 * p; }
};

/// Forward pass on a normalized input row; optionally records
/// pre-activations for the backward pass.
double nn_forward(const NnLayout& lay, const double* theta, const double* x, double* z_buf) {
    double prev = 0.0;
    for (int l = 0; l < lay.d; ++l) {
        const double* w = theta + lay.w_off[static_cast<std::size_t>(l)];
        double z = theta[lay.b_off[static_cast<std::size_t>(l)]];
        z += w[0] * x[0] + w[1] * x[1];
        int wi = 2;
        if (l > 0) z += w[wi++] * prev;
        for (int c = 2; c < lay.in_width; ++c) z += w[wi++] * x[c];
        if (z_buf) z_buf[l] = z;
        prev = z > 0.0 ? z : 0.0;
    }
    return theta[lay.w_out_off] * prev + theta[lay.b_out_off];
}

/// Accumulate d(residual^2 scale)/d(theta) for one row into grad.
void nn_backward(const NnLayout& lay, const double* theta, const double* x, const double* z_buf,
                 double dl_dy, double* grad) {
    // Recompute activations from z_buf (cheap, avoids a second buffer).
    const int d = lay.d;
    const double a_last = z_buf[d - 1] > 0.0 ? z_buf[d - 1] : 0.0;
    grad[lay.w_out_off] += dl_dy * a_last;
    grad[lay.b_out_off] += dl_dy;

    double g_a = dl_dy * theta[lay.w_out_off];  // dL/da_l for l = d-1
    for (int l = d - 1; l >= 0; --l) {
        const double relu_gate = z_buf[l] > 0.0 ? 1.0 : 0.0;
        const double delta = g_a * relu_gate;
        const double* w = theta + lay.w_off[static_cast<std::size_t>(l)];
        double* gw = grad + lay.w_off[static_cast<std::size_t>(l)];
        grad[lay.b_off[static_cast<std::size_t>(l)]] += delta;
        gw[0] += delta * x[0];
        gw[1] += delta * x[1];
        int wi = 2;
        if (l > 0) {
            const double a_prev = z_buf[l - 1] > 0.0 ? z_buf[l - 1] : 0.0;
            gw[wi] += delta * a_prev;
            g_a = delta * w[wi];
            ++wi;
        }
        for (int c = 2; c < lay.in_width; ++c) gw[wi++] += delta * x[c];
    }
}

std::array<double, 2> column_stats(const Dataset& ds, bool v_dot_column) {
    double mean = 0.0;
    std::size_t n = 0;
    for (const Trajectory& traj : ds.trajectories) {
        for (const Sample& s : traj.samples()) {
            mean += v_dot_column ? s.v_dot : s.v;
            ++n;
        }
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const Trajectory& traj : ds.trajectories) {
        for (const Sample& s : traj.samples()) {
            const double d = (v_dot_column ? s.v_dot : s.v) - mean;
            ss += d * d;
        }
    }
    double sigma = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (sigma == 0.0) sigma = 1.0;
    return {mean, sigma};
}

}  // namespace

NnTrainingData nn_training_data(const Dataset& ds, const ModelSpec& spec) {
    if (spec.family != Family::NN && spec.family != Family::NNAR) {
        throw UnsupportedFamilyError("nn_training_data requires a neural-network family");
    }
    validate(spec);
    const int p = (spec.family == Family::NNAR) ? spec.p : 0;

    NnTrainingData out;
    out.norm.v = column_stats(ds, false);
    out.norm.v_dot = column_stats(ds, true);
    {
        double mean = 0.0;
        std::size_t n = 0;
        for (const Trajectory& traj : ds.trajectories) {
            for (const Sample& s : traj.samples()) {
                mean += s.p;
                ++n;
            }
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const Trajectory& traj : ds.trajectories) {
            for (const Sample& s : traj.samples()) ss += (s.p - mean) * (s.p - mean);
        }
        double sigma = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        if (sigma == 0.0) sigma = 1.0;
        out.norm.p = {mean, sigma};
    }

    std::size_t rows = 0;
    for (const Trajectory& traj : ds.trajectories) {
        if (traj.size() > static_cast<std::size_t>(p)) rows += traj.size() - p;
    }
    out.inputs.resize(rows, 2 + 2 * p);
    out.targets.resize(rows);

    Eigen::Index row = 0;
    for (const Trajectory& traj : ds.trajectories) {
        const auto& samples = traj.samples();
        for (std::size_t i = static_cast<std::size_t>(p); i < samples.size(); ++i) {
            out.inputs(row, 0) = (samples[i].v - out.norm.v[0]) / out.norm.v[1];
            out.inputs(row, 1) = (samples[i].v_dot - out.norm.v_dot[0]) / out.norm.v_dot[1];
            for (int lag = 1; lag <= p; ++lag) {
                const Sample& s = samples[i - static_cast<std::size_t>(lag)];
                out.inputs(row, 2 * lag) = (s.v - out.norm.v[0]) / out.norm.v[1];
                out.inputs(row, 2 * lag + 1) = (s.v_dot - out.norm.v_dot[0]) / out.norm.v_dot[1];
            }
            out.targets(row) = (samples[i].p - out.norm.p[0]) / out.norm.p[1];
            ++row;
        }
    }
    return out;
}

NnParams nn_init(const ModelSpec& spec, std::uint64_t seed) {
    validate(spec);
    NnParams params;
    params.d = spec.d;
    params.p = (spec.family == Family::NNAR) ? spec.p : 0;
    SplitMix64 rng(derive_seed(seed, 0x22));
    // Near-identity chain: the cascade starts as a live affine regressor
    // (unit chain weight, hinges above the z-scored input cloud). A plain
    // He init decays the chain signal geometrically, the output weight then
    // collapses to zero and the single-neuron bottleneck dies beyond
    // recovery (ReLU gates every upstream gradient).
    for (int l = 0; l < spec.d; ++l) {
        Neuron neuron;
        const int width = params.input_width(l);
        neuron.w.resize(width);
        for (int i = 0; i < width; ++i) neuron.w[i] = 0.2 * rng.next_gaussian();
        if (l > 0) neuron.w[2] = 1.0;
        neuron.b = (l == 0) ? 0.5 : 0.1;
        params.neurons.push_back(std::move(neuron));
    }
    params.w_out = 1.0;
    params.b_out = 0.0;
    return params;
}

double nn_loss(const NnParams& params, const Eigen::MatrixXd& inputs,
               const Eigen::VectorXd& targets) {
    ModelSpec spec;
    spec.family = params.p > 0 ? Family::NNAR : Family::NN;
    spec.d = params.d;
    spec.p = params.p;
    const NnLayout lay(spec);
    const std::vector<double> theta = params.to_flat();
    std::vector<double> z(static_cast<std::size_t>(lay.d));
    double acc = 0.0;
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
        Eigen::RowVectorXd row = inputs.row(r);
        const double yhat = nn_forward(lay, theta.data(), row.data(), z.data());
        const double err = yhat - targets(r);
        acc += err * err;
    }
    return acc / static_cast<double>(inputs.rows());
}

std::vector<double> nn_loss_gradient(const NnParams& params, const Eigen::MatrixXd& inputs,
                                     const Eigen::VectorXd& targets) {
    ModelSpec spec;
    spec.family = params.p > 0 ? Family::NNAR : Family::NN;
    spec.d = params.d;
    spec.p = params.p;
    const NnLayout lay(spec);
    const std::vector<double> theta = params.to_flat();
    std::vector<double> grad(static_cast<std::size_t>(lay.total), 0.0);
    std::vector<double> z(static_cast<std::size_t>(lay.d));
    const double inv_n = 1.0 / static_cast<double>(inputs.rows());
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
        Eigen::RowVectorXd row = inputs.row(r);
        const double yhat = nn_forward(lay, theta.data(), row.data(), z.data());
        const double dl_dy = 2.0 * (yhat - targets(r)) * inv_n;
        nn_backward(lay, theta.data(), row.data(), z.data(), dl_dy, grad.data());
    }
    return grad;
}

FitResult fit_nn(const Dataset& ds, const ModelSpec& spec, const FitConfig& cfg) {
    if (spec.family != Family::NN && spec.family != Family::NNAR) {
        throw UnsupportedFamilyError("fit_nn requires a neural-network family");
    }
    validate(cfg);
    const NnLayout lay(spec);

    // Hold out whole trajectories for early stopping; with a single
    // trajectory the validation set degenerates to the training set.
    std::vector<std::size_t> order(ds.trajectories.size());
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 split_rng(derive_seed(cfg.seed, 0x31));
    deterministic_shuffle(order, split_rng);
    std::size_t n_val = 0;
    if (ds.trajectories.size() >= 2) {
        n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(cfg.nn_val_fraction *
                                                   static_cast<double>(order.size()))));
        n_val = std::min(n_val, order.size() - 1);
    }
    std::vector<Trajectory> train_trajs, val_trajs;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_val ? val_trajs : train_trajs).push_back(ds.trajectories[order[i]]);
    }
    if (val_trajs.empty()) val_trajs = train_trajs;

    const Dataset train_ds(train_trajs, ds.chamber_id, ds.metadata);
    const Dataset val_ds(val_trajs, ds.chamber_id, ds.metadata);
    NnTrainingData train = nn_training_data(train_ds, spec);
    // Validation rows must be normalized with the training statistics.
    NnTrainingData val = nn_training_data(val_ds, spec);
    auto renorm = [](double z, const std::array<double, 2>& own,
                     const std::array<double, 2>& want) {
        return (z * own[1] + own[0] - want[0]) / want[1];
    };
    for (Eigen::Index r = 0; r < val.inputs.rows(); ++r) {
        for (Eigen::Index c = 0; c < val.inputs.cols(); ++c) {
            const bool is_v = (c % 2) == 0;
            val.inputs(r, c) = renorm(val.inputs(r, c), is_v ? val.norm.v : val.norm.v_dot,
                                      is_v ? train.norm.v : train.norm.v_dot);
        }
        val.targets(r) = renorm(val.targets(r), val.norm.p, train.norm.p);
    }
    val.norm = train.norm;

    auto val_rmse = [&](const std::vector<double>& th) {
        std::vector<double> z(static_cast<std::size_t>(lay.d));
        double acc = 0.0;
        for (Eigen::Index r = 0; r < val.inputs.rows(); ++r) {
            Eigen::RowVectorXd row = val.inputs.row(r);
            const double err = nn_forward(lay, th.data(), row.data(), z.data()) - val.targets(r);
            acc += err * err;
        }
        return std::sqrt(acc / static_cast<double>(val.inputs.rows()));
    };

    const Eigen::Index n_rows = train.inputs.rows();
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

    auto train_once = [&](std::uint64_t init_seed, std::uint64_t shuffle_seed) {
        std::vector<double> theta = nn_init(spec, init_seed).to_flat();
        std::vector<double> adam_m(theta.size(), 0.0), adam_v(theta.size(), 0.0);
        std::vector<double> best_theta = theta;
        double best_val = val_rmse(theta);

        std::vector<Eigen::Index> perm(static_cast<std::size_t>(n_rows));
        std::iota(perm.begin(), perm.end(), 0);
        SplitMix64 shuffle_rng(derive_seed(shuffle_seed, 0x32));

        std::vector<double> grad(theta.size());
        std::vector<double> z(static_cast<std::size_t>(lay.d));
        std::vector<double> row_buf(static_cast<std::size_t>(lay.in_width));
        long step = 0;

        for (int epoch = 0; epoch < cfg.nn_epochs; ++epoch) {
            // Constant rate for most of the run, cosine-annealed tail (last
            // 20%) down to 1%; constant-rate Adam jitters around an
            // interpolating optimum instead of settling into it.
            const double progress =
                static_cast<double>(epoch) / static_cast<double>(cfg.nn_epochs);
            double lr = cfg.nn_lr;
            if (progress > 0.5) {
                const double tail = (progress - 0.5) / 0.5;
                lr = cfg.nn_lr * (0.003 + 0.997 * 0.5 * (1.0 + std::cos(M_PI * tail)));
            }
            deterministic_shuffle(perm, shuffle_rng);
            for (Eigen::Index start = 0; start < n_rows; start += cfg.nn_batch) {
                const Eigen::Index end = std::min<Eigen::Index>(start + cfg.nn_batch, n_rows);
                const double inv_b = 1.0 / static_cast<double>(end - start);
                std::fill(grad.begin(), grad.end(), 0.0);
                for (Eigen::Index r = start; r < end; ++r) {
                    const Eigen::Index idx = perm[static_cast<std::size_t>(r)];
                    for (int c = 0; c < lay.in_width; ++c) {
                        row_buf[static_cast<std::size_t>(c)] = train.inputs(idx, c);
                    }
                    const double yhat = nn_forward(lay, theta.data(), row_buf.data(), z.data());
                    const double dl_dy = 2.0 * (yhat - train.targets(idx)) * inv_b;
                    nn_backward(lay, theta.data(), row_buf.data(), z.data(), dl_dy, grad.data());
                }
                ++step;
                const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
                const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    adam_m[i] = kBeta1 * adam_m[i] + (1.0 - kBeta1) * grad[i];
                    adam_v[i] = kBeta2 * adam_v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
                    theta[i] -= lr * (adam_m[i] / bc1) / (std::sqrt(adam_v[i] / bc2) + kEps);
                    if (!std::isfinite(theta[i])) {
                        throw DivergedError("NN training diverged (non-finite parameter)");
                    }
                }
            }
            const double rmse_now = val_rmse(theta);
            if (!std::isfinite(rmse_now)) {
                throw DivergedError("NN training diverged (non-finite validation loss)");
            }
            if (rmse_now < best_val) {
                best_val = rmse_now;
                best_theta = theta;
            }
        }
        return std::make_pair(std::move(best_theta), best_val);
    };

    // A few seeded starts; ReLU cascades occasionally settle into an
    // affine-only basin or park their hinges badly, and independent draws
    // rarely repeat the failure. A zero-epoch run stays single-start so it
    // returns nn_init(cfg.seed) untouched.
    auto [best_theta, best_val] = train_once(cfg.seed, cfg.seed);
    if (cfg.nn_epochs > 0) {
        for (std::uint64_t restart = 1; restart <= 2; ++restart) {
            auto [other_theta, other_val] =
                train_once(derive_seed(cfg.seed, 0x44, restart), cfg.seed + restart);
            if (other_val < best_val) {
                best_theta = std::move(other_theta);
                best_val = other_val;
            }
        }
    }

    FitResult result;
    result.model.spec = spec;
    result.model.params = std::move(best_theta);
    result.model.nu = count_params(spec);
    result.model.trained_on = dataset_fingerprint(ds);
    result.model.normalization = train.norm;
    validate(result.model);
    return result;
}

}  // namespace hydrofit
