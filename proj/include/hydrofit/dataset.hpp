#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hydrofit/types.hpp"

namespace hydrofit {

/// Column layout of an ingestion CSV. Canonical column names are
/// t, v, vdot, vddot, p (any order, header row required); an optional
/// `cycle` column groups rows into trajectories.
struct CsvSchema {
    std::vector<std::string> columns;
    bool has_vdot = false;
    bool has_vddot = false;
    bool has_cycle = false;

    /// Parse a header line; throws SchemaError unless t, v and p are present.
    static CsvSchema from_header(const std::string& header_line);
};

/// Load a CSV whose header must match `schema.columns` exactly.
/// Throws ParseError (malformed row, message names the 1-based line),
/// SchemaError, or InvariantError (e.g. non-monotone time, with the line).
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Convenience overload: schema taken from the file's own header row.
Dataset load_csv(const std::filesystem::path& path);

/// Write the canonical CSV (header t,v,vdot,vddot,p,cycle). Doubles are
/// printed shortest-round-trip, so load_csv(write_csv(ds)) is bit-exact.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

/// Fill v_dot/v_ddot via a 5-point quadratic (Savitzky-Golay) smoothed
/// difference; the two samples at each end use the one-sided fit of the
/// nearest window. Requires >= 5 samples (TooShortError).
Trajectory differentiate(const Trajectory& traj);

/// Apply differentiate to every trajectory.
Dataset differentiate(const Dataset& ds);

/// Split at sign changes of v_dot. Samples inside the hysteresis band
/// |v_dot| < 1 mm^3/s continue the current phase, so dwells attach to the
/// preceding segment. Segments are tagged Inflation/Deflation; a
/// trajectory that never leaves the band comes back whole, tagged Mixed.
std::vector<Trajectory> segment_cycles(const Trajectory& traj);

/// Hysteresis band used by segment_cycles (5% of the lowest bench flow rate).
inline constexpr double kPhaseBand = 1.0;  // mm^3/s

/// Deterministic trajectory-level split: floor(ratio * count) trajectories
/// in the first part, the rest in the second. Requires >= 2 trajectories.
std::pair<Dataset, Dataset> split(const Dataset& ds, double ratio, std::uint64_t seed);

}  // namespace hydrofit
