#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hydrofit/fitting.hpp"
#include "hydrofit/models.hpp"
#include "hydrofit/types.hpp"

namespace hydrofit {

/// Weights of the joint cost w1*RMSE + w2*(1 - R2_adj) + w3*AICc. The
/// default w3 puts typical AICc magnitudes (1e4..1e5) on the RMSE scale.
struct Weights {
    double w1 = 1.0;
    double w2 = 1.0;
    double w3 = 1e-5;
};

void validate(const Weights& w);

double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

/// 1 - (SSR/SST) * (N-1)/(N-k-1) for k predictors. Requires N > k + 1 and
/// var(y) > 0.
double r2_adj(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, int k);

/// AICc with the Gaussian log-likelihood
///   ln L = -(N/2) [ln((2 pi / N) * SSR) + 1]
/// and the finite-sample penalty 2 nu (nu + 1)/(N - nu - 1). Returns
/// -infinity when SSR == 0 (exact fit). Requires N > nu + 1.
double aicc(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, int nu);

/// nu ln(N) - 2 ln L with the same likelihood and guards as aicc.
double bic(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, int nu);

/// d AICc / d nu at fixed N: 2 + [(4 nu + 2)(N - nu - 1) + 2 nu (nu + 1)] /
/// (N - nu - 1)^2. The BIC counterpart is ln(N), independent of nu.
double aicc_sensitivity(int nu, std::size_t n);
double bic_sensitivity(std::size_t n);

double joint_cost(const FitReport& report, const Weights& w);

/// All metrics over a measured/predicted pair. k predictors is nu minus
/// one when the family carries an intercept.
FitReport make_report(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, int nu,
                      int k_predictors, const Weights& w);

/// Fit-and-score convenience: in-sample on `ds`, or on `holdout` when given.
FitReport score_model(const FittedModel& model, const Dataset& ds, const Weights& w,
                      const Dataset* holdout = nullptr);

/// Hyperparameter axes; only the axes relevant to the family are read.
struct GridRanges {
    std::vector<int> k;  // Exponential
    std::vector<int> n, m;  // Poly / PolyAR
    std::vector<int> p;  // PolyAR / NNAR
    std::vector<int> d;  // NN / NNAR
};

std::vector<ModelSpec> expand_grid(Family family, const GridRanges& ranges);

struct GridEntry {
    ModelSpec spec;
    std::optional<FitReport> report;  // empty when the fit failed
    std::string error;
};

struct GridResult {
    std::vector<GridEntry> entries;
    std::size_t best = 0;  // argmin joint cost over successful entries
};

/// Fits every spec in the grid and scores it (in-sample by default,
/// mirroring the benchmark tables; on `holdout` when given). Failed fits
/// are recorded and excluded from the argmin. Ties break toward smaller
/// nu, then lexicographic spec. Entries may be fitted concurrently
/// (HYDROFIT_THREADS caps the worker count); results are deterministic.
GridResult grid_search(const Dataset& ds, Family family, const GridRanges& ranges,
                       const Weights& w, const FitConfig& cfg,
                       const Dataset* holdout = nullptr);

enum class CostClass { Lsq, LmLsq, Sgd };

std::string to_string(CostClass cls);

/// Leading-order work per fit: N*nu^2 for the least-squares families
/// (per LM iteration for the exponential), epochs*N*nu for the networks.
struct CostEstimate {
    CostClass cls = CostClass::Lsq;
    std::size_t n = 0;
    int nu = 0;
    int epochs = 0;  // Sgd only
    double proportional_cost = 0.0;
};

CostEstimate flops_estimate(const ModelSpec& spec, std::size_t n, int epochs = 3000);

}  // namespace hydrofit
