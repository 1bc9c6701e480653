#pragma once

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hydrofit/types.hpp"

namespace hydrofit {

enum class Family { Exponential, Poly, PolyAR, NN, NNAR };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

/// Model family plus hyperparameters. Only the fields relevant to the
/// family are meaningful:
///   Exponential: k        Poly: n, m (+term_mask)   PolyAR: n, m, p (+mask)
///   NN: d                 NNAR: d, p
struct ModelSpec {
    Family family = Family::Poly;
    int k = 0;                              // exponential-term count
    int n = 0, m = 0;                       // max exponents of v, v_dot
    int p = 0;                              // autoregressive order
    int d = 0;                              // network depth
    std::set<std::pair<int, int>> term_mask;  // excluded (i,j) monomials

    bool operator==(const ModelSpec&) const = default;

    /// Deterministic short label, e.g. "poly(n=3,m=2)" or "polyar(p=5,n=3,m=2)".
    std::string label() const;
    /// Lexicographic key used for tie-breaking in grids.
    std::string sort_key() const;
};

/// Throws InvariantError unless hyperparameters are positive where
/// applicable and the mask stays inside the grid without touching the
/// highest-degree term (n, m).
void validate(const ModelSpec& spec);

/// Flat parameter count nu per family. NN families use the cascade
/// architecture documented in NnParams.
int count_params(const ModelSpec& spec);

/// True when the family's parameterization contains an additive constant
/// (delta, alpha_00 unmasked, or the output bias). Used by the metrics to
/// distinguish "predictors k" from "parameters nu".
bool has_intercept(const ModelSpec& spec);

/// Per-column z-score constants stored on a fitted model. Identity
/// ((0, 1) everywhere) for the linear families; populated by NN training.
struct Normalization {
    std::array<double, 2> v{0.0, 1.0};      // mu, sigma
    std::array<double, 2> v_dot{0.0, 1.0};
    std::array<double, 2> p{0.0, 1.0};

    bool is_identity() const;
    bool operator==(const Normalization&) const = default;
};

/// A spec with learned parameters.
///
/// Flat parameter ordering per family:
///   Exponential: [alpha_1..alpha_k, beta_1..beta_k, gamma, delta]
///   Poly/PolyAR: [alpha_ij row-major over (i,j), masked terms skipped]
///                then [beta_11, beta_12, ..., beta_p1, beta_p2]
///   NN/NNAR:     per neuron [weights..., bias] in cascade order, then
///                [w_out, b_out]; see NnParams for the wiring.
struct FittedModel {
    ModelSpec spec;
    std::vector<double> params;
    int nu = 0;
    std::string trained_on;  // dataset fingerprint
    Normalization normalization;
};

/// Validates nu == count_params(spec) == params.size() and, for the
/// exponential family, pairwise-distinct beta (tolerance 1e-9).
void validate(const FittedModel& model);

// ---------------------------------------------------------------------------
// Exponential family: P = sum_i alpha_i * exp(beta_i * v) + gamma*v_dot + delta

struct ExpParams {
    std::vector<double> alpha;  // kPa
    std::vector<double> beta;   // 1/mm^3
    double gamma = 0.0;         // kPa*s/mm^3
    double delta = 0.0;         // kPa

    static ExpParams from_flat(const ModelSpec& spec, std::span<const double> flat);
    std::vector<double> to_flat() const;
};

/// Throws OverflowError when any beta_i * v exceeds 700 (the double
/// exponent limit region) rather than returning Inf.
double predict_exp(const ExpParams& params, double v, double v_dot);

// ---------------------------------------------------------------------------
// Polynomial families: P = sum_ij alpha_ij v^i v_dot^j (+ AR linear terms)

struct PolyParams {
    int n = 0, m = 0, p = 0;
    std::set<std::pair<int, int>> term_mask;
    // Dense (n+1) x (m+1) grid, row-major by (i,j); masked entries are 0.
    std::vector<double> alpha;
    // AR coefficients, beta[k] = {beta_{k+1,1}, beta_{k+1,2}}, k = 0..p-1.
    std::vector<std::array<double, 2>> beta;

    double coeff(int i, int j) const { return alpha[static_cast<std::size_t>(i) * (m + 1) + j]; }
    double& coeff(int i, int j) { return alpha[static_cast<std::size_t>(i) * (m + 1) + j]; }

    static PolyParams from_flat(const ModelSpec& spec, std::span<const double> flat);
    std::vector<double> to_flat() const;
};

/// lags holds [v(t-1dt), v_dot(t-1dt), ..., v(t-p dt), v_dot(t-p dt)] and is
/// required (MissingLagsError) iff p > 0.
double predict_poly(const PolyParams& params, double v, double v_dot,
                    std::span<const double> lags = {});

/// Analytic partials of the monomial part, dP/dv and dP/dv_dot.
std::pair<double, double> poly_partials(const PolyParams& params, double v, double v_dot);

// ---------------------------------------------------------------------------
// NN families. The paper's nu column (4d + 1) pins down a cascade: neuron 1
// reads (v, v_dot); each later neuron reads (v, v_dot, previous activation);
// a 2-parameter affine layer maps the last activation to the output. All
// activations are ReLU. AR variants feed the 2p lagged inputs to every
// neuron, which yields nu = 4d + 1 + 2pd (differs from the paper's NN-AR
// counts; wiring there is not reproducible).

struct Neuron {
    std::vector<double> w;
    double b = 0.0;
};

struct NnParams {
    int d = 0, p = 0;
    std::vector<Neuron> neurons;  // neurons[l].w.size() == input_width(l)
    double w_out = 1.0, b_out = 0.0;

    int input_width(int layer) const { return (layer == 0 ? 2 : 3) + 2 * p; }

    static NnParams from_flat(const ModelSpec& spec, std::span<const double> flat);
    std::vector<double> to_flat() const;
};

/// Forward pass in physical units: inputs are z-scored with `norm`, the
/// network output is mapped back to kPa. `lags` as in predict_poly.
double predict_nn(const NnParams& params, const Normalization& norm, double v, double v_dot,
                  std::span<const double> lags = {});

// ---------------------------------------------------------------------------
// Unified prediction + evaluation

/// Dispatch on family. For AR families `lags` must hold 2p values.
double predict(const FittedModel& model, double v, double v_dot,
               std::span<const double> lags = {});

/// Predictions over one trajectory; the first p samples are skipped (no
/// complete lag history). Returns predictions aligned to samples[p..].
std::vector<double> predict_series(const FittedModel& model, const Trajectory& traj);

/// Measured and predicted pressures over the whole dataset, lag-trimmed
/// per trajectory. Row order: (trajectory, time).
std::pair<Eigen::VectorXd, Eigen::VectorXd> eval_on(const FittedModel& model,
                                                    const Dataset& ds);

/// Regression design for the polynomial families: one column per unmasked
/// monomial v^i v_dot^j (row-major (i,j) order), then 2p lag columns
/// [v(t-k dt), v_dot(t-k dt)] for k = 1..p. Rows with incomplete lag
/// history are dropped (N' = N - p per trajectory). Targets are measured P.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> design_matrix_poly(const Dataset& ds,
                                                               const ModelSpec& spec);

}  // namespace hydrofit
