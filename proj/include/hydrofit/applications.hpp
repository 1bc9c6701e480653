#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "hydrofit/models.hpp"
#include "hydrofit/types.hpp"

namespace hydrofit {

struct StiffnessDampingPoint {
    double v = 0.0;
    double v_dot = 0.0;
    double k = 0.0;  // kPa/mm^3
    double c = 0.0;  // kPa*s/mm^3
};

/// Instantaneous stiffness k_i = dP/dv and damping c_i = dP/dv_dot of the
/// fitted polynomial, evaluated at every sample, with overall and
/// per-phase averages. Phase averages are NaN when a phase is absent.
struct StiffnessDampingReport {
    double k_bar = 0.0;
    double c_bar = 0.0;
    double k_bar_inflation = 0.0;
    double k_bar_deflation = 0.0;
    double c_bar_inflation = 0.0;
    double c_bar_deflation = 0.0;
    std::vector<StiffnessDampingPoint> pointwise;
};

/// Analytic partials of the polynomial families only
/// (UnsupportedFamilyError otherwise). Phases are derived by segmenting
/// each trajectory on the fly.
StiffnessDampingReport stiffness_damping(const FittedModel& model, const Dataset& ds);

struct ChowReport {
    double f_stat = 0.0;
    int df1 = 0;
    int df2 = 0;
    double p_value = 0.0;
    double critical_value = 0.0;
    double alpha = 0.0;
    bool reject = false;
};

/// Classical pooled-vs-split Chow test under a shared polynomial spec:
///   F = [(SSR_pooled - SSR1 - SSR2)/nu] / [(SSR1 + SSR2)/(N1 + N2 - 2 nu)].
/// Exactly symmetric in its dataset arguments.
ChowReport chow_test(const Dataset& ds1, const Dataset& ds2, const ModelSpec& spec,
                     double alpha);

struct ForceEstimate {
    double t = 0.0;                                   // s
    std::array<double, 3> per_chamber_residual{};     // kPa
    double force = 0.0;                               // mN (signed sum; the
                                                      // method resolves magnitude only)
};

/// Proprioceptive force from per-chamber pressure residuals:
/// force(t) = sum_i (P_measured_i - P_model_i) * area_i, with kPa * mm^2
/// = mN. Streams must be equal-length and synchronized; AR families are
/// rejected (their lag trimming would desynchronize the timebase).
std::vector<ForceEstimate> estimate_force(const std::vector<FittedModel>& models,
                                          const std::vector<Trajectory>& streams,
                                          const std::array<double, 3>& areas);

/// The fitted polynomial rearranged as C(v, v_dot) * v_dot + K(v):
/// k_coeffs[i] is the v^i coefficient of K; c_coeffs(i, j) the coefficient
/// of v^i v_dot^j in C (original j+1 power reindexed down by one).
struct EomDecomposition {
    std::vector<double> k_coeffs;
    Eigen::MatrixXd c_coeffs;  // (n+1) x m; zero columns when m == 0
};

EomDecomposition decompose_eom(const FittedModel& model);

}  // namespace hydrofit
