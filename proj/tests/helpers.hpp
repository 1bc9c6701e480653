#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "hydrofit/simulator.hpp"
#include "hydrofit/types.hpp"

namespace hydrofit::testing {

/// Uniform 25 Hz trajectory from a volume function.
inline Trajectory sampled_trajectory(const std::function<double(double)>& volume,
                                     std::size_t count, double rate_hz = 25.0,
                                     int cycle_id = 0) {
    std::vector<Sample> samples;
    samples.reserve(count);
    const double dt = 1.0 / rate_hz;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) * dt;
        samples.emplace_back(t, volume(t), 0.0, 0.0, 0.0);
    }
    return Trajectory(std::move(samples), rate_hz, cycle_id, Phase::Mixed);
}

/// Small, fast protocol for fitting tests.
inline Protocol small_protocol(std::uint64_t seed = 0, int cycles = 2) {
    Protocol proto;
    proto.cycles_per_rate = cycles;
    proto.seed = seed;
    return proto;
}

/// Replace pressures with fn(v, v_dot), keeping the sampling structure.
inline Dataset remap_pressure(const Dataset& ds,
                              const std::function<double(double, double)>& fn) {
    std::vector<Trajectory> out;
    for (const Trajectory& traj : ds.trajectories) {
        std::vector<Sample> samples;
        samples.reserve(traj.size());
        for (const Sample& s : traj.samples()) {
            samples.emplace_back(s.t, s.v, s.v_dot, s.v_ddot, fn(s.v, s.v_dot));
        }
        out.emplace_back(std::move(samples), traj.sample_rate_hz(), traj.cycle_id(),
                         traj.phase(), traj.has_vdot(), traj.has_vddot());
    }
    return Dataset(std::move(out), ds.chamber_id, ds.metadata);
}

inline bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace hydrofit::testing
