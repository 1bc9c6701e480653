#include "hydrofit/model_io.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace hydrofit {

namespace {

nlohmann::json finite_or_string(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    return value;
}

}  // namespace

nlohmann::json model_to_json(const FittedModel& model) {
    validate(model);
    nlohmann::json hyper;
    switch (model.spec.family) {
        case Family::Exponential:
            hyper["k"] = model.spec.k;
            break;
        case Family::Poly:
        case Family::PolyAR:
            hyper["n"] = model.spec.n;
            hyper["m"] = model.spec.m;
            if (model.spec.family == Family::PolyAR) hyper["p"] = model.spec.p;
            if (!model.spec.term_mask.empty()) {
                nlohmann::json mask = nlohmann::json::array();
                for (const auto& [i, j] : model.spec.term_mask) mask.push_back({i, j});
                hyper["term_mask"] = mask;
            }
            break;
        case Family::NN:
        case Family::NNAR:
            hyper["d"] = model.spec.d;
            if (model.spec.family == Family::NNAR) hyper["p"] = model.spec.p;
            break;
    }
    return nlohmann::json{
        {"format", kModelFormat},
        {"family", to_string(model.spec.family)},
        {"hyperparameters", hyper},
        {"params", model.params},
        {"nu", model.nu},
        {"normalization",
         {{"v", model.normalization.v},
          {"vdot", model.normalization.v_dot},
          {"p", model.normalization.p}}},
        {"trained_on", model.trained_on},
    };
}

FittedModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j.at("format").get<std::string>() != kModelFormat) {
        throw ParseError("unsupported model format (expected " + std::string(kModelFormat) + ")");
    }
    FittedModel model;
    model.spec.family = family_from_string(j.at("family").get<std::string>());
    const nlohmann::json& hyper = j.at("hyperparameters");
    switch (model.spec.family) {
        case Family::Exponential:
            model.spec.k = hyper.at("k").get<int>();
            break;
        case Family::Poly:
        case Family::PolyAR:
            model.spec.n = hyper.at("n").get<int>();
            model.spec.m = hyper.at("m").get<int>();
            if (model.spec.family == Family::PolyAR) model.spec.p = hyper.at("p").get<int>();
            if (hyper.contains("term_mask")) {
                for (const auto& pair : hyper.at("term_mask")) {
                    model.spec.term_mask.insert({pair.at(0).get<int>(), pair.at(1).get<int>()});
                }
            }
            break;
        case Family::NN:
        case Family::NNAR:
            model.spec.d = hyper.at("d").get<int>();
            if (model.spec.family == Family::NNAR) model.spec.p = hyper.at("p").get<int>();
            break;
    }
    model.params = j.at("params").get<std::vector<double>>();
    model.nu = j.at("nu").get<int>();
    model.trained_on = j.value("trained_on", std::string{});
    if (j.contains("normalization")) {
        const nlohmann::json& norm = j.at("normalization");
        model.normalization.v = norm.at("v").get<std::array<double, 2>>();
        model.normalization.v_dot = norm.at("vdot").get<std::array<double, 2>>();
        model.normalization.p = norm.at("p").get<std::array<double, 2>>();
    }
    validate(model);
    return model;
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
    write_json_atomic(model_to_json(model), path);
}

FittedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
    return model_from_json(j);
}

nlohmann::json report_to_json(const FitReport& report) {
    return nlohmann::json{
        {"rmse_kpa", report.rmse},
        {"r2_adj", report.r2_adj},
        {"aicc", finite_or_string(report.aicc)},
        {"bic", finite_or_string(report.bic)},
        {"joint_cost", finite_or_string(report.joint_cost)},
        {"nu", report.nu},
        {"n_samples", report.n_samples},
        {"daicc_dnu", report.daicc_dnu},
        {"dbic_dnu", report.dbic_dnu},
    };
}

nlohmann::json pca_to_json(const PcaResult& result) {
    nlohmann::json vectors = nlohmann::json::array();
    for (int row = 0; row < 4; ++row) {
        vectors.push_back({result.eigenvectors(row, 0), result.eigenvectors(row, 1),
                           result.eigenvectors(row, 2), result.eigenvectors(row, 3)});
    }
    return nlohmann::json{
        {"columns", {"v", "vdot", "vddot", "p"}},
        {"eigenvectors_rows", vectors},
        {"lambda_norm",
         {result.lambda_norm(0), result.lambda_norm(1), result.lambda_norm(2),
          result.lambda_norm(3)}},
        {"mu", {result.mu(0), result.mu(1), result.mu(2), result.mu(3)}},
        {"sigma", {result.sigma(0), result.sigma(1), result.sigma(2), result.sigma(3)}},
    };
}

nlohmann::json correlations_to_json(const Correlations& corr) {
    return nlohmann::json{
        {"corr_p_v", corr.p_v},
        {"corr_p_vdot", corr.p_vdot},
        {"corr_p_vddot", corr.p_vddot},
    };
}

nlohmann::json grid_to_json(const GridResult& grid) {
    nlohmann::json entries = nlohmann::json::array();
    for (const GridEntry& entry : grid.entries) {
        nlohmann::json e{{"spec", entry.spec.label()}};
        if (entry.report) {
            e["report"] = report_to_json(*entry.report);
        } else {
            e["error"] = entry.error;
        }
        entries.push_back(std::move(e));
    }
    return nlohmann::json{
        {"entries", entries},
        {"best_index", grid.best},
        {"best_spec", grid.entries[grid.best].spec.label()},
    };
}

nlohmann::json chow_to_json(const ChowReport& report) {
    return nlohmann::json{
        {"f_stat", report.f_stat},
        {"df1", report.df1},
        {"df2", report.df2},
        {"p_value", report.p_value},
        {"critical_value", report.critical_value},
        {"alpha", report.alpha},
        {"reject", report.reject},
    };
}

void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write '" + tmp.string() + "'");
        }
        out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace hydrofit
