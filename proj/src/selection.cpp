#include "hydrofit/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

namespace hydrofit {

void validate(const Weights& w) {
    if (w.w1 < 0.0 || w.w2 < 0.0 || w.w3 < 0.0) {
        throw InvariantError("joint-cost weights must be nonnegative");
    }
    if (w.w1 == 0.0 && w.w2 == 0.0 && w.w3 == 0.0) {
        throw InvariantError("at least one joint-cost weight must be positive");
    }
}

namespace {

void check_lengths(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (y.size() != yhat.size()) {
        throw LengthMismatchError("y has " + std::to_string(y.size()) + " entries but yhat has " +
                                  std::to_string(yhat.size()));
    }
    if (y.size() == 0) {
        throw TooFewSamplesError("metrics need N >= 1");
    }
}

double log_likelihood(double ssr, std::size_t n) {
    // Gaussian regression likelihood at the ML variance estimate.
    const double nd = static_cast<double>(n);
    return -(nd / 2.0) * (std::log(2.0 * M_PI / nd * ssr) + 1.0);
}

}  // namespace

double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    check_lengths(y, yhat);
    return std::sqrt((y - yhat).squaredNorm() / static_cast<double>(y.size()));
}

double r2_adj(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, int k) {
    check_lengths(y, yhat);
    const auto n = static_cast<std::size_t>(y.size());
    if (n <= static_cast<std::size_t>(k) + 1) {
        throw TooFewSamplesError("adjusted R^2 needs N > k + 1");
    }
    const double sst = (y.array() - y.mean()).square().sum();
    if (sst == 0.0) {
        throw DegenerateTargetError("target has zero variance");
    }
    const double ssr = (y - yhat).squaredNorm();
    const double nd = static_cast<double>(n);
    return 1.0 - (ssr / sst) * ((nd - 1.0) / (nd - k - 1.0));
}

double aicc(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, int nu) {
    check_lengths(y, yhat);
    const auto n = static_cast<std::size_t>(y.size());
    if (n <= static_cast<std::size_t>(nu) + 1) {
        throw TooFewSamplesError("AICc needs N > nu + 1");
    }
    const double ssr = (y - yhat).squaredNorm();
    if (ssr == 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    const double aic = 2.0 * nu - 2.0 * log_likelihood(ssr, n);
    const double nd = static_cast<double>(n);
    return aic + 2.0 * nu * (nu + 1.0) / (nd - nu - 1.0);
}

double bic(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, int nu) {
    check_lengths(y, yhat);
    const auto n = static_cast<std::size_t>(y.size());
    if (n <= static_cast<std::size_t>(nu) + 1) {
        throw TooFewSamplesError("BIC needs N > nu + 1");
    }
    const double ssr = (y - yhat).squaredNorm();
    if (ssr == 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    return nu * std::log(static_cast<double>(n)) - 2.0 * log_likelihood(ssr, n);
}

double aicc_sensitivity(int nu, std::size_t n) {
    const double nd = static_cast<double>(n);
    const double gap = nd - nu - 1.0;
    return 2.0 + ((4.0 * nu + 2.0) * gap + 2.0 * nu * (nu + 1.0)) / (gap * gap);
}

double bic_sensitivity(std::size_t n) { return std::log(static_cast<double>(n)); }

double joint_cost(const FitReport& report, const Weights& w) {
    validate(w);
    return w.w1 * report.rmse + w.w2 * (1.0 - report.r2_adj) + w.w3 * report.aicc;
}

FitReport make_report(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, int nu,
                      int k_predictors, const Weights& w) {
    FitReport report;
    report.rmse = rmse(y, yhat);
    report.r2_adj = r2_adj(y, yhat, k_predictors);
    report.aicc = aicc(y, yhat, nu);
    report.bic = bic(y, yhat, nu);
    report.nu = nu;
    report.n_samples = static_cast<std::size_t>(y.size());
    report.daicc_dnu = aicc_sensitivity(nu, report.n_samples);
    report.dbic_dnu = bic_sensitivity(report.n_samples);
    report.joint_cost = joint_cost(report, w);
    return report;
}

FitReport score_model(const FittedModel& model, const Dataset& ds, const Weights& w,
                      const Dataset* holdout) {
    const auto [y, yhat] = eval_on(model, holdout ? *holdout : ds);
    const int k = model.nu - (has_intercept(model.spec) ? 1 : 0);
    return make_report(y, yhat, model.nu, k, w);
}

std::vector<ModelSpec> expand_grid(Family family, const GridRanges& ranges) {
    auto require = [](const std::vector<int>& axis, const char* name) {
        if (axis.empty()) {
            throw InvariantError(std::string("grid range for '") + name + "' is empty");
        }
    };
    std::vector<ModelSpec> specs;
    switch (family) {
        case Family::Exponential:
            require(ranges.k, "k");
            for (int k : ranges.k) specs.push_back({.family = family, .k = k});
            break;
        case Family::Poly:
            require(ranges.n, "n");
            require(ranges.m, "m");
            for (int n : ranges.n) {
                for (int m : ranges.m) specs.push_back({.family = family, .n = n, .m = m});
            }
            break;
        case Family::PolyAR:
            require(ranges.p, "p");
            require(ranges.n, "n");
            require(ranges.m, "m");
            for (int p : ranges.p) {
                for (int n : ranges.n) {
                    for (int m : ranges.m) {
                        specs.push_back({.family = family, .n = n, .m = m, .p = p});
                    }
                }
            }
            break;
        case Family::NN:
            require(ranges.d, "d");
            for (int d : ranges.d) specs.push_back({.family = family, .d = d});
            break;
        case Family::NNAR:
            require(ranges.p, "p");
            require(ranges.d, "d");
            for (int p : ranges.p) {
                for (int d : ranges.d) specs.push_back({.family = family, .p = p, .d = d});
            }
            break;
    }
    for (const ModelSpec& spec : specs) validate(spec);
    return specs;
}

namespace {

int worker_count(std::size_t jobs) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("HYDROFIT_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
    }
    return static_cast<int>(std::min<std::size_t>(hw, jobs));
}

FitResult fit_any(const Dataset& ds, const ModelSpec& spec, const FitConfig& cfg) {
    switch (spec.family) {
        case Family::Exponential: return fit_exponential(ds, spec, cfg);
        case Family::Poly:
        case Family::PolyAR: return fit_poly(ds, spec);
        case Family::NN:
        case Family::NNAR: return fit_nn(ds, spec, cfg);
    }
    throw UnsupportedFamilyError("unknown family");
}

}  // namespace

GridResult grid_search(const Dataset& ds, Family family, const GridRanges& ranges,
                       const Weights& w, const FitConfig& cfg, const Dataset* holdout) {
    validate(w);
    validate(cfg);
    const std::vector<ModelSpec> specs = expand_grid(family, ranges);

    GridResult result;
    result.entries.resize(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) result.entries[i].spec = specs[i];

    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            GridEntry& entry = result.entries[i];
            try {
                const FitResult fit = fit_any(ds, specs[i], cfg);
                entry.report = score_model(fit.model, ds, w, holdout);
            } catch (const Error& e) {
                entry.error = e.what();
            }
        }
    };
    const int workers = worker_count(specs.size());
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }

    // Argmin over successful entries; ties break to smaller nu, then to the
    // lexicographic spec key.
    bool found = false;
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        const GridEntry& entry = result.entries[i];
        if (!entry.report) continue;
        if (!found) {
            result.best = i;
            found = true;
            continue;
        }
        const GridEntry& best = result.entries[result.best];
        const double a = entry.report->joint_cost;
        const double b = best.report->joint_cost;
        const bool better =
            a < b ||
            (a == b && (entry.report->nu < best.report->nu ||
                        (entry.report->nu == best.report->nu &&
                         entry.spec.sort_key() < best.spec.sort_key())));
        if (better) result.best = i;
    }
    if (!found) {
        throw Error("every grid entry failed to fit");
    }
    return result;
}

std::string to_string(CostClass cls) {
    switch (cls) {
        case CostClass::Lsq: return "LSQ";
        case CostClass::LmLsq: return "LM-LSQ";
        case CostClass::Sgd: return "SGD";
    }
    return "LSQ";
}

CostEstimate flops_estimate(const ModelSpec& spec, std::size_t n, int epochs) {
    CostEstimate est;
    est.n = n;
    est.nu = count_params(spec);
    const double nd = static_cast<double>(n);
    switch (spec.family) {
        case Family::Exponential:
            est.cls = CostClass::LmLsq;
            est.proportional_cost = nd * est.nu * est.nu;  // per LM iteration
            break;
        case Family::Poly:
        case Family::PolyAR:
            est.cls = CostClass::Lsq;
            est.proportional_cost = nd * est.nu * est.nu;
            break;
        case Family::NN:
        case Family::NNAR:
            est.cls = CostClass::Sgd;
            est.epochs = epochs;
            est.proportional_cost = static_cast<double>(epochs) * nd * est.nu;
            break;
    }
    return est;
}

}  // namespace hydrofit
