#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hydrofit/applications.hpp"
#include "hydrofit/dataset.hpp"
#include "hydrofit/fitting.hpp"
#include "hydrofit/model_io.hpp"
#include "hydrofit/selection.hpp"
#include "hydrofit/simulator.hpp"
#include "hydrofit/stats.hpp"
#include "hydrofit/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hydrofit;

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& config,
                    const std::vector<std::string>& input_hashes) {
    const json manifest{
        {"command", command},
        {"config", config},
        {"input_hashes", input_hashes},
        {"tool_version", kVersion},
        {"timestamp_utc", utc_timestamp()},
    };
    write_json_atomic(manifest, out_dir / "manifest.json");
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

void write_text_atomic(const std::string& text, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
        if (!file) throw Error("cannot write '" + tmp.string() + "'");
        file << text;
    }
    fs::rename(tmp, path);
}

/// Ranges parse as "3", "1..4", or "1,3,5".
std::vector<int> parse_range(const std::string& text) {
    std::vector<int> values;
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const int lo = std::stoi(text.substr(0, dots));
        const int hi = std::stoi(text.substr(dots + 2));
        for (int v = lo; v <= hi; ++v) values.push_back(v);
        return values;
    }
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) values.push_back(std::stoi(part));
    return values;
}

std::set<std::pair<int, int>> parse_mask(const std::string& text) {
    std::set<std::pair<int, int>> mask;
    if (text.empty()) return mask;
    std::stringstream ss(text);
    std::string pair;
    while (std::getline(ss, pair, ';')) {
        const auto comma = pair.find(',');
        if (comma == std::string::npos) {
            throw InvariantError("mask entries must look like 'i,j'");
        }
        mask.insert({std::stoi(pair.substr(0, comma)), std::stoi(pair.substr(comma + 1))});
    }
    return mask;
}

/// Load a CSV; derivatives are recomputed when missing or when forced.
Dataset load_for_fitting(const std::string& path, bool recompute_derivatives) {
    Dataset ds = load_csv(path);
    if (recompute_derivatives || !ds.has_vdot()) {
        ds = differentiate(ds);
    }
    return ds;
}

void print_report_table(const std::string& label, const FitReport& report) {
    std::printf("%-18s %6s %12s %10s %14s %14s\n", "model", "nu", "RMSE", "R2_adj", "AICc",
                "BIC");
    std::printf("%-18s %6d %12.6f %10.6f %14.6e %14.6e\n", label.c_str(), report.nu,
                report.rmse, report.r2_adj, report.aicc, report.bic);
}

struct FitFlags {
    std::string family;
    int k = 3, n = 3, m = 2, p = 0, d = 8;
    std::string mask;
    bool recompute = false;
    FitConfig cfg;
    Weights weights;
};

ModelSpec spec_from_flags(const FitFlags& flags) {
    ModelSpec spec;
    spec.family = family_from_string(flags.family);
    switch (spec.family) {
        case Family::Exponential:
            spec.k = flags.k;
            break;
        case Family::PolyAR:
            spec.p = flags.p;
            [[fallthrough]];
        case Family::Poly:
            spec.n = flags.n;
            spec.m = flags.m;
            spec.term_mask = parse_mask(flags.mask);
            break;
        case Family::NNAR:
            spec.p = flags.p;
            [[fallthrough]];
        case Family::NN:
            spec.d = flags.d;
            break;
    }
    validate(spec);
    return spec;
}

int run_simulate(const std::string& out, const ActuatorTruth& truth, const Protocol& proto) {
    const fs::path dir = prepare_out_dir(out);
    const Dataset ds = generate(truth, proto);
    write_csv(ds, dir / "data.csv");

    json truth_json{
        {"poly_coeffs", truth.poly_coeffs},
        {"hysteresis_gain", truth.hysteresis_gain},
        {"air_volume", truth.air_volume},
        {"noise_sigma", truth.noise_sigma},
        {"atm_pressure", truth.atm_pressure},
        {"protocol",
         {{"v_max", proto.v_max},
          {"flow_rates", proto.flow_rates},
          {"cycles_per_rate", proto.cycles_per_rate},
          {"sample_rate_hz", proto.sample_rate_hz},
          {"dwell_s", proto.dwell_s},
          {"seed", proto.seed}}},
    };
    write_json_atomic(truth_json, dir / "truth.json");
    write_manifest(dir, "simulate", truth_json, {dataset_fingerprint(ds)});
    std::printf("wrote %zu trajectories (%zu samples) to %s\n", ds.trajectories.size(),
                ds.n_samples(), (dir / "data.csv").string().c_str());
    return 0;
}

int run_fit(const std::string& data, const std::string& out, const FitFlags& flags) {
    const fs::path dir = prepare_out_dir(out);
    const Dataset ds = load_for_fitting(data, flags.recompute);
    const ModelSpec spec = spec_from_flags(flags);

    FitResult fit;
    switch (spec.family) {
        case Family::Exponential:
            fit = fit_exponential(ds, spec, flags.cfg);
            break;
        case Family::Poly:
        case Family::PolyAR:
            fit = fit_poly(ds, spec);
            break;
        case Family::NN:
        case Family::NNAR:
            fit = fit_nn(ds, spec, flags.cfg);
            break;
    }
    for (const std::string& warning : fit.warnings) {
        std::fprintf(stderr, "warning: %s\n", warning.c_str());
    }

    const FitReport report = score_model(fit.model, ds, flags.weights);
    save_model(fit.model, dir / "model.json");
    write_json_atomic(report_to_json(report), dir / "report.json");
    write_manifest(dir, "fit",
                   json{{"family", flags.family},
                        {"spec", spec.label()},
                        {"data", data},
                        {"seed", flags.cfg.seed},
                        {"recompute_derivatives", flags.recompute}},
                   {dataset_fingerprint(ds)});
    print_report_table(spec.label(), report);
    return 0;
}

int run_select(const std::string& data, const std::string& out, const std::string& family_name,
               const std::string& n_range, const std::string& m_range,
               const std::string& p_range, const std::string& k_range,
               const std::string& d_range, const Weights& weights, const FitConfig& cfg,
               double holdout_ratio, bool recompute) {
    const fs::path dir = prepare_out_dir(out);
    Dataset ds = load_for_fitting(data, recompute);
    const Family family = family_from_string(family_name);

    GridRanges ranges;
    ranges.n = parse_range(n_range);
    ranges.m = parse_range(m_range);
    ranges.p = parse_range(p_range);
    ranges.k = parse_range(k_range);
    ranges.d = parse_range(d_range);

    GridResult grid;
    std::vector<std::string> hashes{dataset_fingerprint(ds)};
    if (holdout_ratio > 0.0) {
        const auto [train, held_out] = split(ds, 1.0 - holdout_ratio, cfg.seed);
        grid = grid_search(train, family, ranges, weights, cfg, &held_out);
        hashes.push_back(dataset_fingerprint(held_out));
    } else {
        grid = grid_search(ds, family, ranges, weights, cfg);
    }

    write_json_atomic(grid_to_json(grid), dir / "grid.json");
    write_manifest(dir, "select",
                   json{{"family", family_name},
                        {"data", data},
                        {"holdout", holdout_ratio},
                        {"weights", {weights.w1, weights.w2, weights.w3}},
                        {"seed", cfg.seed}},
                   hashes);

    // Entries sorted by joint cost, best first.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < grid.entries.size(); ++i) {
        if (grid.entries[i].report) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return grid.entries[a].report->joint_cost < grid.entries[b].report->joint_cost;
    });
    std::printf("%-22s %6s %12s %10s %14s %14s\n", "model", "nu", "RMSE", "R2_adj", "AICc",
                "joint");
    for (const std::size_t i : order) {
        const GridEntry& entry = grid.entries[i];
        std::printf("%-22s %6d %12.6f %10.6f %14.6e %14.6e%s\n", entry.spec.label().c_str(),
                    entry.report->nu, entry.report->rmse, entry.report->r2_adj,
                    entry.report->aicc, entry.report->joint_cost,
                    i == grid.best ? "  *" : "");
    }
    for (const GridEntry& entry : grid.entries) {
        if (!entry.report) {
            std::printf("%-22s failed: %s\n", entry.spec.label().c_str(), entry.error.c_str());
        }
    }
    return 0;
}

int run_pca(const std::string& data, const std::string& out, bool recompute) {
    const fs::path dir = prepare_out_dir(out);
    Dataset ds = load_csv(data);
    if (recompute || !ds.has_vdot() || !ds.has_vddot()) {
        ds = differentiate(ds);
    }
    const Eigen::MatrixXd X = build_data_matrix(ds);
    const PcaResult result = pca(X);
    const Correlations corr = correlations(X);

    json payload = pca_to_json(result);
    payload["correlations"] = correlations_to_json(corr);
    write_json_atomic(payload, dir / "pca.json");
    write_manifest(dir, "pca", json{{"data", data}, {"recompute_derivatives", recompute}},
                   {dataset_fingerprint(ds)});

    const char* row_names[4] = {"v", "vdot", "vddot", "p"};
    std::printf("%-8s %8s %8s %8s %8s\n", "", "PC1", "PC2", "PC3", "PC4");
    for (int r = 0; r < 4; ++r) {
        std::printf("%-8s %8.4f %8.4f %8.4f %8.4f\n", row_names[r], result.eigenvectors(r, 0),
                    result.eigenvectors(r, 1), result.eigenvectors(r, 2),
                    result.eigenvectors(r, 3));
    }
    std::printf("%-8s %8.4f %8.4f %8.4f %8.4f\n", "lambda", result.lambda_norm(0),
                result.lambda_norm(1), result.lambda_norm(2), result.lambda_norm(3));
    std::printf("corr(P,v)=%.4f corr(P,vdot)=%.4f corr(P,vddot)=%.4f\n", corr.p_v,
                corr.p_vdot, corr.p_vddot);
    return 0;
}

int run_diagnose(const std::string& model_path, const std::string& data,
                 const std::string& out, bool recompute) {
    const fs::path dir = prepare_out_dir(out);
    const FittedModel model = load_model(model_path);
    const Dataset ds = load_for_fitting(data, recompute);
    const StiffnessDampingReport report = stiffness_damping(model, ds);

    json payload{
        {"k_bar", report.k_bar},
        {"c_bar", report.c_bar},
        {"k_bar_inflation", report.k_bar_inflation},
        {"k_bar_deflation", report.k_bar_deflation},
        {"c_bar_inflation", report.c_bar_inflation},
        {"c_bar_deflation", report.c_bar_deflation},
        {"n_points", report.pointwise.size()},
    };
    write_json_atomic(payload, dir / "diagnose.json");

    std::string csv = "v,vdot,k,c\n";
    char line[160];
    for (const auto& point : report.pointwise) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n", point.v, point.v_dot,
                      point.k, point.c);
        csv += line;
    }
    write_text_atomic(csv, dir / "pointwise.csv");

    write_manifest(dir, "diagnose", json{{"model", model_path}, {"data", data}},
                   {dataset_fingerprint(ds)});
    std::printf("k_bar = %.6g kPa/mm^3, c_bar = %.6g kPa*s/mm^3 over %zu points\n",
                report.k_bar, report.c_bar, report.pointwise.size());
    return 0;
}

int run_chow(const std::string& data_a, const std::string& data_b, const std::string& out,
             int n, int m, int p, double alpha, bool recompute) {
    const fs::path dir = prepare_out_dir(out);
    const Dataset a = load_for_fitting(data_a, recompute);
    const Dataset b = load_for_fitting(data_b, recompute);
    ModelSpec spec;
    spec.family = p > 0 ? Family::PolyAR : Family::Poly;
    spec.n = n;
    spec.m = m;
    spec.p = p;
    const ChowReport report = chow_test(a, b, spec, alpha);

    write_json_atomic(chow_to_json(report), dir / "chow.json");
    write_manifest(dir, "chow",
                   json{{"a", data_a}, {"b", data_b}, {"spec", spec.label()}, {"alpha", alpha}},
                   {dataset_fingerprint(a), dataset_fingerprint(b)});
    std::printf("F = %.4f (df %d, %d), critical %.4f at alpha %.4g -> %s\n", report.f_stat,
                report.df1, report.df2, report.critical_value, report.alpha,
                report.reject ? "DIFFERENT" : "indistinguishable");
    return 0;
}

int run_force(const std::vector<std::string>& model_paths,
              const std::vector<std::string>& data_paths, const std::vector<double>& areas,
              const std::string& out) {
    if (model_paths.size() != 3 || data_paths.size() != 3 || areas.size() != 3) {
        throw InvariantError("force needs exactly 3 models, 3 data files, and 3 areas");
    }
    const fs::path dir = prepare_out_dir(out);
    std::vector<FittedModel> models;
    std::vector<Trajectory> streams;
    std::vector<std::string> hashes;
    for (std::size_t chamber = 0; chamber < 3; ++chamber) {
        models.push_back(load_model(model_paths[chamber]));
        Dataset ds = load_csv(data_paths[chamber]);
        if (!ds.has_vdot()) ds = differentiate(ds);
        hashes.push_back(dataset_fingerprint(ds));
        if (ds.trajectories.size() != 1) {
            // Force streams are continuous recordings; restitch cycles.
            std::vector<Sample> all;
            for (const Trajectory& traj : ds.trajectories) {
                all.insert(all.end(), traj.samples().begin(), traj.samples().end());
            }
            streams.emplace_back(all, ds.trajectories[0].sample_rate_hz(), 0, Phase::Mixed,
                                 true, true);
        } else {
            streams.push_back(ds.trajectories[0]);
        }
    }
    const std::array<double, 3> area_arr{areas[0], areas[1], areas[2]};
    const auto estimates = estimate_force(models, streams, area_arr);

    double mean = 0.0;
    for (const auto& est : estimates) mean += est.force;
    mean /= static_cast<double>(estimates.size());

    std::string csv = "t,force_mn,res1_kpa,res2_kpa,res3_kpa\n";
    char line[200];
    for (const auto& est : estimates) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g\n", est.t, est.force,
                      est.per_chamber_residual[0], est.per_chamber_residual[1],
                      est.per_chamber_residual[2]);
        csv += line;
    }
    write_text_atomic(csv, dir / "force.csv");

    write_json_atomic(json{{"mean_force_mn", mean},
                           {"n_samples", estimates.size()},
                           {"areas_mm2", areas}},
                      dir / "force.json");
    write_manifest(dir, "force", json{{"models", model_paths}, {"data", data_paths}}, hashes);
    std::printf("mean force %.4f mN over %zu samples\n", mean, estimates.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hydrofit: volume-flow-pressure model identification toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    auto* sim = app.add_subcommand("simulate", "generate a synthetic actuator dataset");
    std::string sim_out;
    ActuatorTruth truth;
    Protocol proto;
    std::vector<double> rates;
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--seed", proto.seed, "RNG seed");
    sim->add_option("--noise", truth.noise_sigma, "pressure noise sigma [kPa]");
    sim->add_option("--air", truth.air_volume, "air pocket volume at atmospheric [mm^3]");
    sim->add_option("--hysteresis", truth.hysteresis_gain, "hysteresis offset [kPa]");
    sim->add_option("--vmax", proto.v_max, "cycle volume amplitude [mm^3]");
    sim->add_option("--rates", rates, "flow rates [mm^3/s]")->delimiter(',');
    sim->add_option("--cycles", proto.cycles_per_rate, "cycles per flow rate");
    sim->add_option("--dwell", proto.dwell_s, "dwell between ramps [s]");

    auto* fit = app.add_subcommand("fit", "fit one model family to a CSV dataset");
    std::string fit_data, fit_out;
    FitFlags flags;
    fit->add_option("--data", fit_data, "input CSV")->required();
    fit->add_option("--out", fit_out, "output directory")->required();
    fit->add_option("--family", flags.family, "exp|poly|polyar|nn|nnar")->required();
    fit->add_option("--k", flags.k, "exponential terms");
    fit->add_option("--n", flags.n, "max exponent of v");
    fit->add_option("--m", flags.m, "max exponent of vdot");
    fit->add_option("--p", flags.p, "autoregressive order");
    fit->add_option("--d", flags.d, "network depth");
    fit->add_option("--mask", flags.mask, "excluded monomials, e.g. '1,1;0,2'");
    fit->add_flag("--recompute-derivatives", flags.recompute,
                  "differentiate v instead of trusting vdot/vddot columns");
    fit->add_option("--seed", flags.cfg.seed, "RNG seed");
    fit->add_option("--epochs", flags.cfg.nn_epochs, "NN training epochs");
    fit->add_option("--lr", flags.cfg.nn_lr, "NN learning rate");
    fit->add_option("--batch", flags.cfg.nn_batch, "NN batch size");
    fit->add_option("--multistart", flags.cfg.multistart, "LM restarts");
    fit->add_option("--lm-max-iter", flags.cfg.lm_max_iter, "LM iteration cap");

    auto* sel = app.add_subcommand("select", "grid-search hyperparameters for one family");
    std::string sel_data, sel_out, sel_family;
    std::string sel_n = "1..4", sel_m = "1..3", sel_p = "0", sel_k = "1..5", sel_d = "1..8";
    Weights weights;
    FitConfig sel_cfg;
    double holdout = 0.0;
    bool sel_recompute = false;
    sel->add_option("--data", sel_data, "input CSV")->required();
    sel->add_option("--out", sel_out, "output directory")->required();
    sel->add_option("--family", sel_family, "exp|poly|polyar|nn|nnar")->required();
    sel->add_option("--n", sel_n, "range for n, e.g. 1..7");
    sel->add_option("--m", sel_m, "range for m");
    sel->add_option("--p", sel_p, "range for p");
    sel->add_option("--k", sel_k, "range for k");
    sel->add_option("--d", sel_d, "range for d");
    sel->add_option("--w1", weights.w1, "weight on RMSE");
    sel->add_option("--w2", weights.w2, "weight on 1 - R2_adj");
    sel->add_option("--w3", weights.w3, "weight on AICc");
    sel->add_option("--holdout", holdout, "score on a held-out trajectory fraction");
    sel->add_option("--seed", sel_cfg.seed, "RNG seed");
    sel->add_option("--epochs", sel_cfg.nn_epochs, "NN training epochs");
    sel->add_flag("--recompute-derivatives", sel_recompute, "differentiate v");

    auto* pca_cmd = app.add_subcommand("pca", "correlation + PCA preliminary analysis");
    std::string pca_data, pca_out;
    bool pca_recompute = false;
    pca_cmd->add_option("--data", pca_data, "input CSV")->required();
    pca_cmd->add_option("--out", pca_out, "output directory")->required();
    pca_cmd->add_flag("--recompute-derivatives", pca_recompute, "differentiate v");

    auto* diag = app.add_subcommand("diagnose", "stiffness/damping analysis of a fitted model");
    std::string diag_model, diag_data, diag_out;
    bool diag_recompute = false;
    diag->add_option("model", diag_model, "model JSON")->required();
    diag->add_option("data", diag_data, "dataset CSV")->required();
    diag->add_option("--out", diag_out, "output directory")->required();
    diag->add_flag("--recompute-derivatives", diag_recompute, "differentiate v");

    auto* chow = app.add_subcommand("chow", "Chow test between two datasets");
    std::string chow_a, chow_b, chow_out;
    int chow_n = 3, chow_m = 2, chow_p = 0;
    double alpha = 0.0005;
    bool chow_recompute = false;
    chow->add_option("a", chow_a, "first CSV")->required();
    chow->add_option("b", chow_b, "second CSV")->required();
    chow->add_option("--out", chow_out, "output directory")->required();
    chow->add_option("--n", chow_n, "max exponent of v");
    chow->add_option("--m", chow_m, "max exponent of vdot");
    chow->add_option("--p", chow_p, "autoregressive order");
    chow->add_option("--alpha", alpha, "significance level");
    chow->add_flag("--recompute-derivatives", chow_recompute, "differentiate v");

    auto* force = app.add_subcommand("force", "proprioceptive external force estimation");
    std::vector<std::string> force_models, force_data;
    std::vector<double> force_areas{22.0, 22.0, 22.0};
    std::string force_out;
    force->add_option("--models", force_models, "3 per-chamber model JSONs")
        ->delimiter(',')
        ->required();
    force->add_option("--data", force_data, "3 synchronized chamber CSVs")
        ->delimiter(',')
        ->required();
    force->add_option("--areas", force_areas, "effective areas [mm^2]")->delimiter(',');
    force->add_option("--out", force_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // stable usage-error contract
    }

    try {
        if (*sim) {
            if (!rates.empty()) proto.flow_rates = rates;
            return run_simulate(sim_out, truth, proto);
        }
        if (*fit) return run_fit(fit_data, fit_out, flags);
        if (*sel) {
            return run_select(sel_data, sel_out, sel_family, sel_n, sel_m, sel_p, sel_k, sel_d,
                              weights, sel_cfg, holdout, sel_recompute);
        }
        if (*pca_cmd) return run_pca(pca_data, pca_out, pca_recompute);
        if (*diag) return run_diagnose(diag_model, diag_data, diag_out, diag_recompute);
        if (*chow) return run_chow(chow_a, chow_b, chow_out, chow_n, chow_m, chow_p, alpha,
                                   chow_recompute);
        if (*force) return run_force(force_models, force_data, force_areas, force_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
