#include "hydrofit/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hydrofit {

std::string to_string(Family family) {
    switch (family) {
        case Family::Exponential: return "exp";
        case Family::Poly: return "poly";
        case Family::PolyAR: return "polyar";
        case Family::NN: return "nn";
        case Family::NNAR: return "nnar";
    }
    return "poly";
}

Family family_from_string(const std::string& name) {
    if (name == "exp" || name == "exponential") return Family::Exponential;
    if (name == "poly") return Family::Poly;
    if (name == "polyar" || name == "poly_ar" || name == "poly-ar") return Family::PolyAR;
    if (name == "nn") return Family::NN;
    if (name == "nnar" || name == "nn_ar" || name == "nn-ar") return Family::NNAR;
    throw InvariantError("unknown model family '" + name + "'");
}

std::string ModelSpec::label() const {
    std::ostringstream out;
    out << to_string(family) << '(';
    switch (family) {
        case Family::Exponential: out << "k=" << k; break;
        case Family::Poly: out << "n=" << n << ",m=" << m; break;
        case Family::PolyAR: out << "p=" << p << ",n=" << n << ",m=" << m; break;
        case Family::NN: out << "d=" << d; break;
        case Family::NNAR: out << "p=" << p << ",d=" << d; break;
    }
    if (!term_mask.empty()) {
        out << ",mask=" << term_mask.size();
    }
    out << ')';
    return out.str();
}

std::string ModelSpec::sort_key() const {
    std::ostringstream out;
    out << static_cast<int>(family) << '|' << k << '|' << n << '|' << m << '|' << p << '|' << d;
    for (const auto& [i, j] : term_mask) out << '|' << i << ',' << j;
    return out.str();
}

void validate(const ModelSpec& spec) {
    auto positive = [](int value, const char* name) {
        if (value <= 0) {
            throw InvariantError(std::string("hyperparameter ") + name + " must be positive");
        }
    };
    auto nonneg = [](int value, const char* name) {
        if (value < 0) {
            throw InvariantError(std::string("hyperparameter ") + name + " must be >= 0");
        }
    };
    switch (spec.family) {
        case Family::Exponential:
            positive(spec.k, "k");
            break;
        case Family::PolyAR:
            positive(spec.p, "p");
            [[fallthrough]];
        case Family::Poly:
            nonneg(spec.n, "n");
            nonneg(spec.m, "m");
            if (spec.n == 0 && spec.m == 0 && !spec.term_mask.empty()) {
                throw InvariantError("term_mask cannot exclude the only term");
            }
            break;
        case Family::NNAR:
            positive(spec.p, "p");
            [[fallthrough]];
        case Family::NN:
            positive(spec.d, "d");
            break;
    }
    if (!spec.term_mask.empty() &&
        spec.family != Family::Poly && spec.family != Family::PolyAR) {
        throw InvariantError("term_mask applies to the polynomial families only");
    }
    for (const auto& [i, j] : spec.term_mask) {
        if (i < 0 || i > spec.n || j < 0 || j > spec.m) {
            throw InvariantError("masked term (" + std::to_string(i) + "," + std::to_string(j) +
                                 ") outside the (n,m) grid");
        }
        if (i == spec.n && j == spec.m) {
            throw InvariantError("term_mask must not exclude the highest-degree term (n,m)");
        }
    }
}

int count_params(const ModelSpec& spec) {
    validate(spec);
    switch (spec.family) {
        case Family::Exponential:
            return 2 * spec.k + 2;
        case Family::Poly:
            return (spec.n + 1) * (spec.m + 1) - static_cast<int>(spec.term_mask.size());
        case Family::PolyAR:
            return (spec.n + 1) * (spec.m + 1) - static_cast<int>(spec.term_mask.size()) +
                   2 * spec.p;
        case Family::NN:
            return 4 * spec.d + 1;
        case Family::NNAR:
            return 4 * spec.d + 1 + 2 * spec.p * spec.d;
    }
    return 0;
}

bool has_intercept(const ModelSpec& spec) {
    switch (spec.family) {
        case Family::Exponential:
            return true;  // delta
        case Family::Poly:
        case Family::PolyAR:
            return spec.term_mask.count({0, 0}) == 0;
        case Family::NN:
        case Family::NNAR:
            return true;  // output bias
    }
    return true;
}

bool Normalization::is_identity() const {
    return v == std::array<double, 2>{0.0, 1.0} && v_dot == std::array<double, 2>{0.0, 1.0} &&
           p == std::array<double, 2>{0.0, 1.0};
}

void validate(const FittedModel& model) {
    const int nu = count_params(model.spec);
    if (model.nu != nu) {
        throw InvariantError("model nu " + std::to_string(model.nu) +
                             " does not match the family formula " + std::to_string(nu));
    }
    if (static_cast<int>(model.params.size()) != nu) {
        throw InvariantError("params length " + std::to_string(model.params.size()) +
                             " does not match nu " + std::to_string(nu));
    }
    for (double value : model.params) {
        if (!std::isfinite(value)) throw InvariantError("non-finite model parameter");
    }
    if (model.spec.family == Family::Exponential) {
        const ExpParams params = ExpParams::from_flat(model.spec, model.params);
        for (std::size_t i = 0; i < params.beta.size(); ++i) {
            for (std::size_t j = i + 1; j < params.beta.size(); ++j) {
                if (std::abs(params.beta[i] - params.beta[j]) < 1e-9) {
                    throw InvariantError("duplicated exponential rates beta_" +
                                         std::to_string(i + 1) + " and beta_" +
                                         std::to_string(j + 1));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Exponential

ExpParams ExpParams::from_flat(const ModelSpec& spec, std::span<const double> flat) {
    if (spec.family != Family::Exponential) {
        throw UnsupportedFamilyError("ExpParams requires the exponential family");
    }
    const std::size_t k = static_cast<std::size_t>(spec.k);
    if (flat.size() != 2 * k + 2) {
        throw ShapeMismatchError("expected " + std::to_string(2 * k + 2) + " parameters, got " +
                                 std::to_string(flat.size()));
    }
    ExpParams params;
    params.alpha.assign(flat.begin(), flat.begin() + k);
    params.beta.assign(flat.begin() + k, flat.begin() + 2 * k);
    params.gamma = flat[2 * k];
    params.delta = flat[2 * k + 1];
    return params;
}

std::vector<double> ExpParams::to_flat() const {
    std::vector<double> flat;
    flat.reserve(alpha.size() + beta.size() + 2);
    flat.insert(flat.end(), alpha.begin(), alpha.end());
    flat.insert(flat.end(), beta.begin(), beta.end());
    flat.push_back(gamma);
    flat.push_back(delta);
    return flat;
}

double predict_exp(const ExpParams& params, double v, double v_dot) {
    double acc = params.gamma * v_dot + params.delta;
    for (std::size_t i = 0; i < params.alpha.size(); ++i) {
        const double exponent = params.beta[i] * v;
        if (exponent > 700.0) {
            throw OverflowError("exponential term overflow: beta*v = " +
                                std::to_string(exponent));
        }
        acc += params.alpha[i] * std::exp(exponent);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Polynomial

PolyParams PolyParams::from_flat(const ModelSpec& spec, std::span<const double> flat) {
    if (spec.family != Family::Poly && spec.family != Family::PolyAR) {
        throw UnsupportedFamilyError("PolyParams requires a polynomial family");
    }
    validate(spec);
    PolyParams params;
    params.n = spec.n;
    params.m = spec.m;
    params.p = (spec.family == Family::PolyAR) ? spec.p : 0;
    params.term_mask = spec.term_mask;
    params.alpha.assign(static_cast<std::size_t>(spec.n + 1) * (spec.m + 1), 0.0);

    std::size_t pos = 0;
    auto take = [&]() {
        if (pos >= flat.size()) {
            throw ShapeMismatchError("flat parameter vector too short for spec " + spec.label());
        }
        return flat[pos++];
    };
    for (int i = 0; i <= spec.n; ++i) {
        for (int j = 0; j <= spec.m; ++j) {
            if (params.term_mask.count({i, j})) continue;
            params.coeff(i, j) = take();
        }
    }
    for (int k = 0; k < params.p; ++k) {
        const double b1 = take();
        const double b2 = take();
        params.beta.push_back({b1, b2});
    }
    if (pos != flat.size()) {
        throw ShapeMismatchError("flat parameter vector too long for spec " + spec.label());
    }
    return params;
}

std::vector<double> PolyParams::to_flat() const {
    std::vector<double> flat;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= m; ++j) {
            if (term_mask.count({i, j})) continue;
            flat.push_back(coeff(i, j));
        }
    }
    for (const auto& b : beta) {
        flat.push_back(b[0]);
        flat.push_back(b[1]);
    }
    return flat;
}

double predict_poly(const PolyParams& params, double v, double v_dot,
                    std::span<const double> lags) {
    if (params.p > 0 && static_cast<int>(lags.size()) != 2 * params.p) {
        throw MissingLagsError("AR order " + std::to_string(params.p) + " requires " +
                               std::to_string(2 * params.p) + " lag values, got " +
                               std::to_string(lags.size()));
    }
    // Horner over j inside plain power accumulation over i.
    double acc = 0.0;
    double v_pow = 1.0;
    for (int i = 0; i <= params.n; ++i) {
        double row = 0.0;
        for (int j = params.m; j >= 0; --j) {
            row = row * v_dot + params.coeff(i, j);
        }
        acc += row * v_pow;
        v_pow *= v;
    }
    for (int k = 0; k < params.p; ++k) {
        acc += params.beta[k][0] * lags[2 * k] + params.beta[k][1] * lags[2 * k + 1];
    }
    return acc;
}

std::pair<double, double> poly_partials(const PolyParams& params, double v, double v_dot) {
    double dv = 0.0, dvdot = 0.0;
    for (int i = 0; i <= params.n; ++i) {
        for (int j = 0; j <= params.m; ++j) {
            const double a = params.coeff(i, j);
            if (a == 0.0) continue;
            if (i > 0) dv += a * i * std::pow(v, i - 1) * std::pow(v_dot, j);
            if (j > 0) dvdot += a * j * std::pow(v, i) * std::pow(v_dot, j - 1);
        }
    }
    return {dv, dvdot};
}

// ---------------------------------------------------------------------------
// NN cascade

NnParams NnParams::from_flat(const ModelSpec& spec, std::span<const double> flat) {
    if (spec.family != Family::NN && spec.family != Family::NNAR) {
        throw UnsupportedFamilyError("NnParams requires a neural-network family");
    }
    validate(spec);
    NnParams params;
    params.d = spec.d;
    params.p = (spec.family == Family::NNAR) ? spec.p : 0;

    std::size_t pos = 0;
    auto take = [&]() {
        if (pos >= flat.size()) {
            throw ShapeMismatchError("flat parameter vector too short for spec " + spec.label());
        }
        return flat[pos++];
    };
    for (int layer = 0; layer < params.d; ++layer) {
        Neuron neuron;
        const int width = params.input_width(layer);
        neuron.w.resize(width);
        for (int i = 0; i < width; ++i) neuron.w[i] = take();
        neuron.b = take();
        params.neurons.push_back(std::move(neuron));
    }
    params.w_out = take();
    params.b_out = take();
    if (pos != flat.size()) {
        throw ShapeMismatchError("flat parameter vector too long for spec " + spec.label());
    }
    return params;
}

std::vector<double> NnParams::to_flat() const {
    std::vector<double> flat;
    for (const Neuron& neuron : neurons) {
        flat.insert(flat.end(), neuron.w.begin(), neuron.w.end());
        flat.push_back(neuron.b);
    }
    flat.push_back(w_out);
    flat.push_back(b_out);
    return flat;
}

double predict_nn(const NnParams& params, const Normalization& norm, double v, double v_dot,
                  std::span<const double> lags) {
    if (static_cast<int>(lags.size()) != 2 * params.p) {
        if (params.p > 0) {
            throw MissingLagsError("AR order " + std::to_string(params.p) + " requires " +
                                   std::to_string(2 * params.p) + " lag values, got " +
                                   std::to_string(lags.size()));
        }
        throw ShapeMismatchError("non-AR network given lag inputs");
    }
    const double vs = norm.v[1] != 0.0 ? norm.v[1] : 1.0;
    const double vds = norm.v_dot[1] != 0.0 ? norm.v_dot[1] : 1.0;

    std::vector<double> inputs;
    inputs.reserve(2 + lags.size());
    inputs.push_back((v - norm.v[0]) / vs);
    inputs.push_back((v_dot - norm.v_dot[0]) / vds);
    for (int k = 0; k < params.p; ++k) {
        inputs.push_back((lags[2 * k] - norm.v[0]) / vs);
        inputs.push_back((lags[2 * k + 1] - norm.v_dot[0]) / vds);
    }

    double prev = 0.0;
    for (int layer = 0; layer < params.d; ++layer) {
        const Neuron& neuron = params.neurons[layer];
        double z = neuron.b;
        std::size_t wi = 0;
        z += neuron.w[wi++] * inputs[0];
        z += neuron.w[wi++] * inputs[1];
        if (layer > 0) z += neuron.w[wi++] * prev;
        for (std::size_t li = 2; li < inputs.size(); ++li) z += neuron.w[wi++] * inputs[li];
        prev = z > 0.0 ? z : 0.0;
    }
    const double y_norm = params.w_out * prev + params.b_out;
    return y_norm * norm.p[1] + norm.p[0];
}

// ---------------------------------------------------------------------------
// Unified surface

double predict(const FittedModel& model, double v, double v_dot, std::span<const double> lags) {
    switch (model.spec.family) {
        case Family::Exponential:
            return predict_exp(ExpParams::from_flat(model.spec, model.params), v, v_dot);
        case Family::Poly:
        case Family::PolyAR:
            return predict_poly(PolyParams::from_flat(model.spec, model.params), v, v_dot, lags);
        case Family::NN:
        case Family::NNAR:
            return predict_nn(NnParams::from_flat(model.spec, model.params),
                              model.normalization, v, v_dot, lags);
    }
    throw UnsupportedFamilyError("unknown family");
}

namespace {

int lag_order(const ModelSpec& spec) {
    if (spec.family == Family::PolyAR || spec.family == Family::NNAR) return spec.p;
    return 0;
}

void collect_lags(const std::vector<Sample>& samples, std::size_t idx, int p,
                  std::vector<double>& lags) {
    lags.clear();
    for (int k = 1; k <= p; ++k) {
        const Sample& s = samples[idx - static_cast<std::size_t>(k)];
        lags.push_back(s.v);
        lags.push_back(s.v_dot);
    }
}

}  // namespace

std::vector<double> predict_series(const FittedModel& model, const Trajectory& traj) {
    const int p = lag_order(model.spec);
    const auto& samples = traj.samples();
    std::vector<double> out;
    if (samples.size() <= static_cast<std::size_t>(p)) return out;
    out.reserve(samples.size() - static_cast<std::size_t>(p));

    // Decode once; per-sample dispatch through predict() would re-parse the
    // flat vector on every call.
    std::vector<double> lags;
    switch (model.spec.family) {
        case Family::Exponential: {
            const ExpParams params = ExpParams::from_flat(model.spec, model.params);
            for (const Sample& s : samples) out.push_back(predict_exp(params, s.v, s.v_dot));
            break;
        }
        case Family::Poly:
        case Family::PolyAR: {
            const PolyParams params = PolyParams::from_flat(model.spec, model.params);
            for (std::size_t i = static_cast<std::size_t>(p); i < samples.size(); ++i) {
                collect_lags(samples, i, p, lags);
                out.push_back(predict_poly(params, samples[i].v, samples[i].v_dot, lags));
            }
            break;
        }
        case Family::NN:
        case Family::NNAR: {
            const NnParams params = NnParams::from_flat(model.spec, model.params);
            for (std::size_t i = static_cast<std::size_t>(p); i < samples.size(); ++i) {
                collect_lags(samples, i, p, lags);
                out.push_back(
                    predict_nn(params, model.normalization, samples[i].v, samples[i].v_dot, lags));
            }
            break;
        }
    }
    return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> eval_on(const FittedModel& model, const Dataset& ds) {
    const int p = lag_order(model.spec);
    std::vector<double> measured, predicted;
    for (const Trajectory& traj : ds.trajectories) {
        const std::vector<double> series = predict_series(model, traj);
        const auto& samples = traj.samples();
        for (std::size_t i = 0; i < series.size(); ++i) {
            measured.push_back(samples[i + static_cast<std::size_t>(p)].p);
            predicted.push_back(series[i]);
        }
    }
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(measured.data(), measured.size());
    Eigen::VectorXd yhat = Eigen::Map<Eigen::VectorXd>(predicted.data(), predicted.size());
    return {std::move(y), std::move(yhat)};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> design_matrix_poly(const Dataset& ds,
                                                               const ModelSpec& spec) {
    if (spec.family != Family::Poly && spec.family != Family::PolyAR) {
        throw UnsupportedFamilyError("design_matrix_poly requires a polynomial family");
    }
    validate(spec);
    const int p = lag_order(spec);
    const int n_mono = (spec.n + 1) * (spec.m + 1) - static_cast<int>(spec.term_mask.size());
    const int n_cols = n_mono + 2 * p;

    std::size_t n_rows = 0;
    for (const Trajectory& traj : ds.trajectories) {
        if (traj.size() > static_cast<std::size_t>(p)) {
            n_rows += traj.size() - static_cast<std::size_t>(p);
        }
    }
    Eigen::MatrixXd X(n_rows, n_cols);
    Eigen::VectorXd y(n_rows);

    std::size_t row = 0;
    std::vector<double> v_pow(spec.n + 1), vd_pow(spec.m + 1);
    for (const Trajectory& traj : ds.trajectories) {
        const auto& samples = traj.samples();
        for (std::size_t idx = static_cast<std::size_t>(p); idx < samples.size(); ++idx) {
            const Sample& s = samples[idx];
            v_pow[0] = 1.0;
            for (int i = 1; i <= spec.n; ++i) v_pow[i] = v_pow[i - 1] * s.v;
            vd_pow[0] = 1.0;
            for (int j = 1; j <= spec.m; ++j) vd_pow[j] = vd_pow[j - 1] * s.v_dot;

            int col = 0;
            for (int i = 0; i <= spec.n; ++i) {
                for (int j = 0; j <= spec.m; ++j) {
                    if (spec.term_mask.count({i, j})) continue;
                    X(row, col++) = v_pow[i] * vd_pow[j];
                }
            }
            for (int k = 1; k <= p; ++k) {
                const Sample& lag = samples[idx - static_cast<std::size_t>(k)];
                X(row, col++) = lag.v;
                X(row, col++) = lag.v_dot;
            }
            y(row) = s.p;
            ++row;
        }
    }
    return {std::move(X), std::move(y)};
}

}  // namespace hydrofit
