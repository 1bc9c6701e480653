#include "hydrofit/applications.hpp"

#include <cmath>
#include <limits>

#include "hydrofit/dataset.hpp"
#include "hydrofit/fdist.hpp"
#include "hydrofit/fitting.hpp"

namespace hydrofit {

namespace {

PolyParams require_poly(const FittedModel& model, const char* op) {
    if (model.spec.family != Family::Poly && model.spec.family != Family::PolyAR) {
        throw UnsupportedFamilyError(std::string(op) +
                                     " requires a polynomial-family model, got " +
                                     to_string(model.spec.family));
    }
    return PolyParams::from_flat(model.spec, model.params);
}

}  // namespace

StiffnessDampingReport stiffness_damping(const FittedModel& model, const Dataset& ds) {
    const PolyParams params = require_poly(model, "stiffness_damping");

    StiffnessDampingReport report;
    report.pointwise.reserve(ds.n_samples());
    double k_sum = 0.0, c_sum = 0.0;
    double k_inf = 0.0, c_inf = 0.0, k_def = 0.0, c_def = 0.0;
    std::size_t n_inf = 0, n_def = 0;

    for (const Trajectory& traj : ds.trajectories) {
        for (const Trajectory& segment : segment_cycles(traj)) {
            for (const Sample& s : segment.samples()) {
                const auto [k_i, c_i] = poly_partials(params, s.v, s.v_dot);
                report.pointwise.push_back({s.v, s.v_dot, k_i, c_i});
                k_sum += k_i;
                c_sum += c_i;
                if (segment.phase() == Phase::Inflation) {
                    k_inf += k_i;
                    c_inf += c_i;
                    ++n_inf;
                } else if (segment.phase() == Phase::Deflation) {
                    k_def += k_i;
                    c_def += c_i;
                    ++n_def;
                }
            }
        }
    }
    const double n_all = static_cast<double>(report.pointwise.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.k_bar = k_sum / n_all;
    report.c_bar = c_sum / n_all;
    report.k_bar_inflation = n_inf ? k_inf / static_cast<double>(n_inf) : nan;
    report.c_bar_inflation = n_inf ? c_inf / static_cast<double>(n_inf) : nan;
    report.k_bar_deflation = n_def ? k_def / static_cast<double>(n_def) : nan;
    report.c_bar_deflation = n_def ? c_def / static_cast<double>(n_def) : nan;
    return report;
}

namespace {

double ssr_under_spec(const Dataset& ds, const ModelSpec& spec) {
    auto [X, y] = design_matrix_poly(ds, spec);
    Eigen::VectorXd scale(X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double s = X.col(c).cwiseAbs().maxCoeff();
        scale(c) = s > 0.0 ? s : 1.0;
        X.col(c) /= scale(c);
    }
    const Eigen::VectorXd theta = fit_linear(X, y);
    return (y - X * theta).squaredNorm();
}

Dataset pool_datasets(const Dataset& a, const Dataset& b) {
    std::vector<Trajectory> trajs = a.trajectories;
    trajs.insert(trajs.end(), b.trajectories.begin(), b.trajectories.end());
    return Dataset(std::move(trajs), a.chamber_id);
}

std::size_t rows_under_spec(const Dataset& ds, int p) {
    std::size_t rows = 0;
    for (const Trajectory& traj : ds.trajectories) {
        if (traj.size() > static_cast<std::size_t>(p)) rows += traj.size() - p;
    }
    return rows;
}

}  // namespace

ChowReport chow_test(const Dataset& ds1, const Dataset& ds2, const ModelSpec& spec,
                     double alpha) {
    if (spec.family != Family::Poly && spec.family != Family::PolyAR) {
        throw UnsupportedFamilyError("chow_test requires a polynomial-family spec");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvariantError("significance level must lie in (0, 1)");
    }
    validate(spec);

    // Canonical pooling order makes chow(a, b) == chow(b, a) bit-exact.
    const bool swap = dataset_fingerprint(ds2) < dataset_fingerprint(ds1);
    const Dataset& first = swap ? ds2 : ds1;
    const Dataset& second = swap ? ds1 : ds2;

    const double ssr1 = ssr_under_spec(first, spec);
    const double ssr2 = ssr_under_spec(second, spec);
    const double ssr_pooled = ssr_under_spec(pool_datasets(first, second), spec);

    const int nu = count_params(spec);
    const int p = spec.family == Family::PolyAR ? spec.p : 0;
    const auto n1 = rows_under_spec(first, p);
    const auto n2 = rows_under_spec(second, p);
    const long df2 = static_cast<long>(n1 + n2) - 2L * nu;
    if (df2 <= 0) {
        throw TooFewSamplesError("Chow test needs N1 + N2 > 2 nu");
    }

    ChowReport report;
    report.df1 = nu;
    report.df2 = static_cast<int>(df2);
    report.alpha = alpha;
    const double numerator = std::max(ssr_pooled - ssr1 - ssr2, 0.0) / nu;
    const double denominator = (ssr1 + ssr2) / static_cast<double>(df2);
    report.f_stat = denominator > 0.0
                        ? numerator / denominator
                        : (numerator > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    report.critical_value = f_quantile(1.0 - alpha, report.df1, report.df2);
    report.p_value = 1.0 - f_cdf(report.f_stat, report.df1, report.df2);
    report.reject = report.f_stat > report.critical_value;
    return report;
}

std::vector<ForceEstimate> estimate_force(const std::vector<FittedModel>& models,
                                          const std::vector<Trajectory>& streams,
                                          const std::array<double, 3>& areas) {
    if (models.size() != 3 || streams.size() != 3) {
        throw LengthMismatchError("estimate_force expects exactly 3 models and 3 streams");
    }
    for (const FittedModel& model : models) {
        if (model.spec.family == Family::PolyAR || model.spec.family == Family::NNAR) {
            throw UnsupportedFamilyError(
                "estimate_force requires non-autoregressive per-chamber models");
        }
    }
    const std::size_t n = streams[0].size();
    for (const Trajectory& stream : streams) {
        if (stream.size() != n) {
            throw LengthMismatchError("streams must be equal length");
        }
    }

    std::vector<ForceEstimate> estimates;
    estimates.reserve(n);
    std::array<std::vector<double>, 3> predicted;
    for (int chamber = 0; chamber < 3; ++chamber) {
        predicted[chamber] = predict_series(models[chamber], streams[chamber]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        ForceEstimate est;
        est.t = streams[0].samples()[i].t;
        double force = 0.0;
        for (int chamber = 0; chamber < 3; ++chamber) {
            const double residual =
                streams[chamber].samples()[i].p - predicted[chamber][i];
            est.per_chamber_residual[chamber] = residual;
            force += residual * areas[chamber];
        }
        est.force = force;
        estimates.push_back(est);
    }
    return estimates;
}

EomDecomposition decompose_eom(const FittedModel& model) {
    const PolyParams params = require_poly(model, "decompose_eom");
    EomDecomposition out;
    out.k_coeffs.resize(static_cast<std::size_t>(params.n) + 1);
    out.c_coeffs = Eigen::MatrixXd::Zero(params.n + 1, std::max(params.m, 1));
    for (int i = 0; i <= params.n; ++i) {
        out.k_coeffs[static_cast<std::size_t>(i)] = params.coeff(i, 0);
        for (int j = 1; j <= params.m; ++j) {
            out.c_coeffs(i, j - 1) = params.coeff(i, j);
        }
    }
    return out;
}

}  // namespace hydrofit
