#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hydrofit/dataset.hpp"
#include "hydrofit/model_io.hpp"

using namespace hydrofit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
    const char* path = std::getenv("HYDROFIT_CLI_PATH");
    REQUIRE_MESSAGE(path != nullptr, "HYDROFIT_CLI_PATH must point at the CLI binary");
    return path;
}

int run(const std::string& args) {
    const std::string command = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

fs::path workspace() {
    const fs::path dir = fs::temp_directory_path() / "hydrofit_cli_test";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json(const fs::path& path) { return json::parse(slurp(path)); }

}  // namespace

TEST_CASE("simulate is byte-deterministic and honors flags") {
    const fs::path ws = workspace();
    const std::string base = (ws / "sim_a").string();
    const std::string again = (ws / "sim_b").string();
    REQUIRE(run("simulate --seed 42 --cycles 1 --rates 60,100 --out " + base) == 0);
    REQUIRE(run("simulate --seed 42 --cycles 1 --rates 60,100 --out " + again) == 0);
    CHECK(slurp(base + "/data.csv") == slurp(again + "/data.csv"));
    CHECK(fs::exists(base + "/manifest.json"));

    const std::string aired = (ws / "sim_air").string();
    REQUIRE(run("simulate --seed 1 --cycles 1 --rates 100 --air 100 --out " + aired) == 0);
    CHECK(load_json(aired + "/truth.json").at("air_volume") == 100.0);

    // Default protocol bookkeeping: 5 rates x 20 cycles.
    const std::string full = (ws / "sim_full").string();
    REQUIRE(run("simulate --seed 7 --out " + full) == 0);
    const Dataset ds = load_csv(full + "/data.csv");
    CHECK(ds.trajectories.size() == 100);
}

TEST_CASE("fit subcommand writes a model that matches the generator") {
    const fs::path ws = workspace();
    const std::string sim = (ws / "fit_data").string();
    REQUIRE(run("simulate --seed 3 --cycles 2 --noise 0 --out " + sim) == 0);

    const std::string out = (ws / "fit_poly").string();
    REQUIRE(run("fit --family poly --n 3 --m 2 --data " + sim + "/data.csv --out " + out) == 0);
    const FittedModel model = load_model(out + "/model.json");
    CHECK(model.nu == 12);
    CHECK(model.params[3] == doctest::Approx(1.2695e-2).epsilon(1e-5));
    CHECK(model.params[9] == doctest::Approx(4.1269e-7).epsilon(1e-5));

    const json report = load_json(out + "/report.json");
    CHECK(report.at("rmse_kpa").get<double>() <= 1e-8);

    const std::string mean_out = (ws / "fit_mean").string();
    REQUIRE(run("fit --family poly --n 0 --m 0 --data " + sim + "/data.csv --out " + mean_out) ==
            0);
    CHECK(load_model(mean_out + "/model.json").nu == 1);
}

TEST_CASE("fit exp reports nu = 8 for k = 3") {
    const fs::path ws = workspace();
    const std::string sim = (ws / "exp_data").string();
    REQUIRE(run("simulate --seed 4 --cycles 1 --rates 40,100 --noise 0 --out " + sim) == 0);
    const std::string out = (ws / "fit_exp").string();
    REQUIRE(run("fit --family exp --k 3 --multistart 2 --data " + sim + "/data.csv --out " +
                out) == 0);
    const json report = load_json(out + "/report.json");
    CHECK(report.at("nu") == 8);
}

TEST_CASE("select emits a grid with the requested size") {
    const fs::path ws = workspace();
    const std::string sim = (ws / "sel_data").string();
    REQUIRE(run("simulate --seed 5 --cycles 1 --noise 0.5 --out " + sim) == 0);
    const std::string out = (ws / "select").string();
    REQUIRE(run("select --family poly --n 1..4 --m 1..3 --w1 0 --w2 0 --w3 1 --data " + sim +
                "/data.csv --out " + out) == 0);
    const json grid = load_json(out + "/grid.json");
    CHECK(grid.at("entries").size() == 12);
    CHECK(grid.at("best_spec").get<std::string>() == "poly(n=3,m=2)");
}

TEST_CASE("pca subcommand emits the analysis JSON") {
    const fs::path ws = workspace();
    const std::string sim = (ws / "pca_data").string();
    REQUIRE(run("simulate --seed 6 --cycles 1 --rates 40,80 --out " + sim) == 0);
    const std::string out = (ws / "pca").string();
    REQUIRE(run("pca --recompute-derivatives --data " + sim + "/data.csv --out " + out) == 0);
    const json payload = load_json(out + "/pca.json");
    CHECK(payload.at("lambda_norm").size() == 4);
    CHECK(payload.contains("correlations"));
}

TEST_CASE("diagnose writes the pointwise CSV with the documented header") {
    const fs::path ws = workspace();
    const std::string sim = (ws / "diag_data").string();
    REQUIRE(run("simulate --seed 8 --cycles 1 --rates 40,100 --noise 0 --out " + sim) == 0);
    const std::string fit_out = (ws / "diag_fit").string();
    REQUIRE(run("fit --family poly --n 3 --m 2 --data " + sim + "/data.csv --out " + fit_out) ==
            0);
    const std::string out = (ws / "diagnose").string();
    REQUIRE(run("diagnose " + fit_out + "/model.json " + sim + "/data.csv --out " + out) == 0);
    const std::string csv = slurp(out + "/pointwise.csv");
    CHECK(csv.rfind("v,vdot,k,c\n", 0) == 0);
    CHECK(load_json(out + "/diagnose.json").contains("k_bar"));
}

TEST_CASE("chow subcommand reports the verdict") {
    const fs::path ws = workspace();
    const std::string a = (ws / "chow_a").string();
    const std::string b = (ws / "chow_b").string();
    REQUIRE(run("simulate --seed 10 --cycles 1 --out " + a) == 0);
    REQUIRE(run("simulate --seed 11 --cycles 1 --out " + b) == 0);
    const std::string out = (ws / "chow").string();
    REQUIRE(run("chow " + a + "/data.csv " + b + "/data.csv --n 3 --m 2 --alpha 0.0005 --out " +
                out) == 0);
    const json report = load_json(out + "/chow.json");
    CHECK(report.contains("f_stat"));
    CHECK(report.contains("critical_value"));
    CHECK(report.at("reject").is_boolean());
    CHECK(report.at("df1") == 12);
}

TEST_CASE("force subcommand recovers an injected constant offset") {
    const fs::path ws = workspace();
    // Three load-free chambers fitted on noiseless data.
    std::vector<std::string> models, data;
    for (int chamber = 0; chamber < 3; ++chamber) {
        const std::string sim = (ws / ("force_ch" + std::to_string(chamber))).string();
        REQUIRE(run("simulate --seed " + std::to_string(20 + chamber) +
                    " --cycles 1 --rates 40,100 --noise 0 --out " + sim) == 0);
        const std::string fit_out = (ws / ("force_fit" + std::to_string(chamber))).string();
        REQUIRE(run("fit --family poly --n 3 --m 2 --data " + sim + "/data.csv --out " +
                    fit_out) == 0);
        models.push_back(fit_out + "/model.json");
        data.push_back(sim + "/data.csv");
    }
    const std::string out = (ws / "force").string();
    REQUIRE(run("force --models " + models[0] + "," + models[1] + "," + models[2] +
                " --data " + data[0] + "," + data[1] + "," + data[2] +
                " --areas 22,22,22 --out " + out) == 0);
    const json summary = load_json(out + "/force.json");
    CHECK(std::abs(summary.at("mean_force_mn").get<double>()) < 1e-6);
    const std::string csv = slurp(out + "/force.csv");
    CHECK(csv.rfind("t,force_mn", 0) == 0);
}

TEST_CASE("exit codes: 2 for usage errors, 1 for runtime failures") {
    CHECK(run("fit --family poly") == 2);               // missing required flags
    CHECK(run("definitely-not-a-subcommand") == 2);
    const fs::path ws = workspace();
    CHECK(run("fit --family poly --data " + (ws / "missing.csv").string() + " --out " +
              (ws / "x").string()) == 1);
}
