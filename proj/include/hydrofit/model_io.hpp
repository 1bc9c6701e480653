#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "hydrofit/applications.hpp"
#include "hydrofit/models.hpp"
#include "hydrofit/selection.hpp"
#include "hydrofit/stats.hpp"

namespace hydrofit {

inline constexpr const char* kModelFormat = "hydrofit-model/1";

/// Model <-> JSON. Parameters survive the round trip bit-exactly (shortest
/// round-trip double printing).
nlohmann::json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j);

void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

/// Report payloads for the CLI. -inf AICc/BIC values (exact fits) are
/// encoded as the string "-inf".
nlohmann::json report_to_json(const FitReport& report);
nlohmann::json pca_to_json(const PcaResult& result);
nlohmann::json correlations_to_json(const Correlations& corr);
nlohmann::json grid_to_json(const GridResult& grid);
nlohmann::json chow_to_json(const ChowReport& report);

/// Write JSON atomically (temp file + rename), trailing newline included.
void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace hydrofit
