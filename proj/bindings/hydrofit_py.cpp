#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "hydrofit/applications.hpp"
#include "hydrofit/dataset.hpp"
#include "hydrofit/fdist.hpp"
#include "hydrofit/fitting.hpp"
#include "hydrofit/model_io.hpp"
#include "hydrofit/selection.hpp"
#include "hydrofit/simulator.hpp"
#include "hydrofit/stats.hpp"
#include "hydrofit/version.hpp"

namespace py = pybind11;
using namespace hydrofit;

namespace {

ModelSpec make_spec(const std::string& family, int k, int n, int m, int p, int d,
                    const std::vector<std::pair<int, int>>& mask) {
    ModelSpec spec;
    spec.family = family_from_string(family);
    spec.k = k;
    spec.n = n;
    spec.m = m;
    spec.p = p;
    spec.d = d;
    spec.term_mask.insert(mask.begin(), mask.end());
    validate(spec);
    return spec;
}

FitResult fit_dataset(const Dataset& ds, const ModelSpec& spec, const FitConfig& cfg) {
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

PYBIND11_MODULE(_hydrofit, m) {
    m.doc() = "Volume-flow-pressure model identification for hydraulic soft actuators";
    m.attr("__version__") = kVersion;

    py::register_exception<Error>(m, "HydrofitError");

    py::enum_<Phase>(m, "Phase")
        .value("Inflation", Phase::Inflation)
        .value("Deflation", Phase::Deflation)
        .value("Mixed", Phase::Mixed);

    py::class_<Sample>(m, "Sample")
        .def(py::init<double, double, double, double, double>(), py::arg("t"), py::arg("v"),
             py::arg("v_dot"), py::arg("v_ddot"), py::arg("p"))
        .def_readonly("t", &Sample::t)
        .def_readonly("v", &Sample::v)
        .def_readonly("v_dot", &Sample::v_dot)
        .def_readonly("v_ddot", &Sample::v_ddot)
        .def_readonly("p", &Sample::p);

    py::class_<Trajectory>(m, "Trajectory")
        .def(py::init<std::vector<Sample>, double, int, Phase, bool, bool>(),
             py::arg("samples"), py::arg("sample_rate_hz"), py::arg("cycle_id"),
             py::arg("phase") = Phase::Mixed, py::arg("has_vdot") = false,
             py::arg("has_vddot") = false)
        .def_property_readonly("samples", &Trajectory::samples)
        .def_property_readonly("sample_rate_hz", &Trajectory::sample_rate_hz)
        .def_property_readonly("cycle_id", &Trajectory::cycle_id)
        .def_property_readonly("phase", &Trajectory::phase)
        .def("__len__", &Trajectory::size);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<std::vector<Trajectory>, int, std::map<std::string, std::string>>(),
             py::arg("trajectories"), py::arg("chamber_id") = 0,
             py::arg("metadata") = std::map<std::string, std::string>{})
        .def_readonly("trajectories", &Dataset::trajectories)
        .def_readonly("chamber_id", &Dataset::chamber_id)
        .def_readonly("metadata", &Dataset::metadata)
        .def("n_samples", &Dataset::n_samples)
        .def("fingerprint", [](const Dataset& ds) { return dataset_fingerprint(ds); });

    py::class_<ModelSpec>(m, "ModelSpec")
        .def(py::init(&make_spec), py::arg("family"), py::arg("k") = 0, py::arg("n") = 0,
             py::arg("m") = 0, py::arg("p") = 0, py::arg("d") = 0,
             py::arg("term_mask") = std::vector<std::pair<int, int>>{})
        .def_readonly("k", &ModelSpec::k)
        .def_readonly("n", &ModelSpec::n)
        .def_readonly("m", &ModelSpec::m)
        .def_readonly("p", &ModelSpec::p)
        .def_readonly("d", &ModelSpec::d)
        .def_property_readonly("family",
                               [](const ModelSpec& s) { return to_string(s.family); })
        .def("label", &ModelSpec::label)
        .def("count_params", [](const ModelSpec& s) { return count_params(s); });

    py::class_<FittedModel>(m, "FittedModel")
        .def_readonly("spec", &FittedModel::spec)
        .def_readonly("params", &FittedModel::params)
        .def_readonly("nu", &FittedModel::nu)
        .def_readonly("trained_on", &FittedModel::trained_on)
        .def("predict",
             [](const FittedModel& model, double v, double v_dot, std::vector<double> lags) {
                 return predict(model, v, v_dot, lags);
             },
             py::arg("v"), py::arg("v_dot"), py::arg("lags") = std::vector<double>{})
        .def("to_json", [](const FittedModel& model) { return model_to_json(model).dump(2); });

    py::class_<FitConfig>(m, "FitConfig")
        .def(py::init<>())
        .def_readwrite("lm_max_iter", &FitConfig::lm_max_iter)
        .def_readwrite("lm_tol", &FitConfig::lm_tol)
        .def_readwrite("nn_epochs", &FitConfig::nn_epochs)
        .def_readwrite("nn_lr", &FitConfig::nn_lr)
        .def_readwrite("nn_batch", &FitConfig::nn_batch)
        .def_readwrite("seed", &FitConfig::seed)
        .def_readwrite("multistart", &FitConfig::multistart);

    py::class_<FitReport>(m, "FitReport")
        .def_readonly("rmse", &FitReport::rmse)
        .def_readonly("r2_adj", &FitReport::r2_adj)
        .def_readonly("aicc", &FitReport::aicc)
        .def_readonly("bic", &FitReport::bic)
        .def_readonly("joint_cost", &FitReport::joint_cost)
        .def_readonly("nu", &FitReport::nu)
        .def_readonly("n_samples", &FitReport::n_samples);

    py::class_<ActuatorTruth>(m, "ActuatorTruth")
        .def(py::init<>())
        .def_readwrite("poly_coeffs", &ActuatorTruth::poly_coeffs)
        .def_readwrite("hysteresis_gain", &ActuatorTruth::hysteresis_gain)
        .def_readwrite("air_volume", &ActuatorTruth::air_volume)
        .def_readwrite("noise_sigma", &ActuatorTruth::noise_sigma)
        .def_readwrite("atm_pressure", &ActuatorTruth::atm_pressure)
        .def("truth_model", &ActuatorTruth::truth_model);

    py::class_<Protocol>(m, "Protocol")
        .def(py::init<>())
        .def_readwrite("v_max", &Protocol::v_max)
        .def_readwrite("flow_rates", &Protocol::flow_rates)
        .def_readwrite("cycles_per_rate", &Protocol::cycles_per_rate)
        .def_readwrite("sample_rate_hz", &Protocol::sample_rate_hz)
        .def_readwrite("seed", &Protocol::seed)
        .def_readwrite("dwell_s", &Protocol::dwell_s);

    py::class_<Weights>(m, "Weights")
        .def(py::init<>())
        .def_readwrite("w1", &Weights::w1)
        .def_readwrite("w2", &Weights::w2)
        .def_readwrite("w3", &Weights::w3);

    py::class_<StiffnessDampingReport>(m, "StiffnessDampingReport")
        .def_readonly("k_bar", &StiffnessDampingReport::k_bar)
        .def_readonly("c_bar", &StiffnessDampingReport::c_bar)
        .def_readonly("k_bar_inflation", &StiffnessDampingReport::k_bar_inflation)
        .def_readonly("k_bar_deflation", &StiffnessDampingReport::k_bar_deflation)
        .def_readonly("c_bar_inflation", &StiffnessDampingReport::c_bar_inflation)
        .def_readonly("c_bar_deflation", &StiffnessDampingReport::c_bar_deflation);

    py::class_<ChowReport>(m, "ChowReport")
        .def_readonly("f_stat", &ChowReport::f_stat)
        .def_readonly("df1", &ChowReport::df1)
        .def_readonly("df2", &ChowReport::df2)
        .def_readonly("p_value", &ChowReport::p_value)
        .def_readonly("critical_value", &ChowReport::critical_value)
        .def_readonly("reject", &ChowReport::reject);

    // Fixed-size Eigen members are copied into dynamic matrices: holding a
    // Matrix4d inside a pybind11-allocated object trips Eigen's alignment
    // requirements.
    py::class_<PcaResult>(m, "PcaResult")
        .def_property_readonly(
            "eigenvectors",
            [](const PcaResult& r) { return Eigen::MatrixXd(r.eigenvectors); })
        .def_property_readonly(
            "lambda_norm", [](const PcaResult& r) { return Eigen::VectorXd(r.lambda_norm); })
        .def_property_readonly("mu", [](const PcaResult& r) { return Eigen::VectorXd(r.mu); })
        .def_property_readonly("sigma",
                               [](const PcaResult& r) { return Eigen::VectorXd(r.sigma); });

    py::class_<Correlations>(m, "Correlations")
        .def_readonly("p_v", &Correlations::p_v)
        .def_readonly("p_vdot", &Correlations::p_vdot)
        .def_readonly("p_vddot", &Correlations::p_vddot);

    // Dataset pipeline
    m.def("generate", &generate, py::arg("truth"), py::arg("protocol"));
    m.def("inject_external_load", &inject_external_load, py::arg("dataset"),
          py::arg("offsets"));
    m.def("air_pocket_transform", &air_pocket_transform, py::arg("truth"),
          py::arg("v_injected"), py::arg("p"));
    m.def("load_csv", [](const std::filesystem::path& path) { return load_csv(path); },
          py::arg("path"));
    m.def("write_csv", &write_csv, py::arg("dataset"), py::arg("path"));
    m.def("differentiate", py::overload_cast<const Dataset&>(&differentiate),
          py::arg("dataset"));
    m.def("segment_cycles", &segment_cycles, py::arg("trajectory"));
    m.def("split", &split, py::arg("dataset"), py::arg("ratio"), py::arg("seed"));

    // Stats
    m.def("build_data_matrix", &build_data_matrix, py::arg("dataset"));
    m.def("correlations", &correlations, py::arg("X"));
    m.def("pca", &pca, py::arg("X"));

    // Fitting (returns the fitted model; warnings surface on stderr via CLI)
    m.def("fit",
          [](const Dataset& ds, const ModelSpec& spec, const FitConfig& cfg) {
              return fit_dataset(ds, spec, cfg).model;
          },
          py::arg("dataset"), py::arg("spec"), py::arg("config") = FitConfig{});
    m.def("score",
          [](const FittedModel& model, const Dataset& ds, const Weights& w) {
              return score_model(model, ds, w);
          },
          py::arg("model"), py::arg("dataset"), py::arg("weights") = Weights{});

    // Metrics
    m.def("rmse", &rmse, py::arg("y"), py::arg("yhat"));
    m.def("r2_adj", &r2_adj, py::arg("y"), py::arg("yhat"), py::arg("k"));
    m.def("aicc", &aicc, py::arg("y"), py::arg("yhat"), py::arg("nu"));
    m.def("bic", &bic, py::arg("y"), py::arg("yhat"), py::arg("nu"));

    // Applications
    m.def("stiffness_damping",
          [](const FittedModel& model, const Dataset& ds) {
              return stiffness_damping(model, ds);
          },
          py::arg("model"), py::arg("dataset"));
    m.def("chow_test", &chow_test, py::arg("ds1"), py::arg("ds2"), py::arg("spec"),
          py::arg("alpha") = 0.0005);
    m.def("estimate_force",
          [](const std::vector<FittedModel>& models, const std::vector<Trajectory>& streams,
             const std::array<double, 3>& areas) {
              const auto estimates = estimate_force(models, streams, areas);
              std::vector<double> t, force;
              t.reserve(estimates.size());
              force.reserve(estimates.size());
              for (const auto& est : estimates) {
                  t.push_back(est.t);
                  force.push_back(est.force);
              }
              return std::make_pair(t, force);
          },
          py::arg("models"), py::arg("streams"),
          py::arg("areas") = std::array<double, 3>{22.0, 22.0, 22.0});
    m.def("f_quantile", &f_quantile, py::arg("prob"), py::arg("d1"), py::arg("d2"));

    // Model IO
    m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
    m.def("load_model", &load_model, py::arg("path"));
}
