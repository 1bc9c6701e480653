#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hydrofit/errors.hpp"

// Units are fixed library-wide: volume mm^3, flow mm^3/s, pressure kPa,
// time s, force mN. No unit conversion happens anywhere below the CLI.

namespace hydrofit {

enum class Phase { Inflation, Deflation, Mixed };

std::string to_string(Phase phase);

/// One time point of one chamber.
struct Sample {
    double t = 0.0;       // s
    double v = 0.0;       // mm^3
    double v_dot = 0.0;   // mm^3/s
    double v_ddot = 0.0;  // mm^3/s^2 (kept for the correlation/PCA stage)
    double p = 0.0;       // kPa

    Sample() = default;
    Sample(double t_, double v_, double v_dot_, double v_ddot_, double p_);
};

/// Ordered samples of one inflation/deflation cycle (or segment of one).
class Trajectory {
public:
    /// Validates: >= 1 sample, strictly increasing t, and every
    /// consecutive dt within 10% of 1/sample_rate_hz.
    Trajectory(std::vector<Sample> samples, double sample_rate_hz, int cycle_id,
               Phase phase, bool has_vdot = false, bool has_vddot = false);

    const std::vector<Sample>& samples() const { return samples_; }
    double sample_rate_hz() const { return sample_rate_hz_; }
    int cycle_id() const { return cycle_id_; }
    Phase phase() const { return phase_; }
    bool has_vdot() const { return has_vdot_; }
    bool has_vddot() const { return has_vddot_; }
    std::size_t size() const { return samples_.size(); }

private:
    std::vector<Sample> samples_;
    double sample_rate_hz_;
    int cycle_id_;
    Phase phase_;
    bool has_vdot_;
    bool has_vddot_;
};

/// A regression corpus: all recorded cycles of one chamber.
struct Dataset {
    std::vector<Trajectory> trajectories;
    int chamber_id = 0;
    std::map<std::string, std::string> metadata;

    Dataset() = default;
    Dataset(std::vector<Trajectory> trajs, int chamber,
            std::map<std::string, std::string> meta = {});

    std::size_t n_samples() const;
    bool has_vdot() const;
    bool has_vddot() const;
};

/// Deterministic content hash (16 hex digits) over the canonical byte
/// serialization of the dataset. Identical datasets map to identical
/// strings; any bit-level change in a field changes the hash.
std::string dataset_fingerprint(const Dataset& ds);

/// Per-fit evaluation summary. aicc/bic may be -infinity when the fit is
/// exact (zero residual). daicc_dnu / dbic_dnu are the sensitivities of
/// the criteria to the parameter count at this (N, nu).
struct FitReport {
    double rmse = 0.0;       // kPa
    double r2_adj = 0.0;
    double aicc = 0.0;
    double bic = 0.0;
    double joint_cost = 0.0;
    int nu = 0;
    std::size_t n_samples = 0;
    double daicc_dnu = 0.0;
    double dbic_dnu = 0.0;
};

}  // namespace hydrofit
