#include "hydrofit/simulator.hpp"

#include <cmath>

#include "hydrofit/rng.hpp"

namespace hydrofit {

double ActuatorTruth::pressure_law(double v, double v_dot) const {
    double acc = 0.0;
    double v_pow = 1.0;
    for (int i = 0; i <= 3; ++i) {
        const double c0 = poly_coeffs[static_cast<std::size_t>(i) * 3 + 0];
        const double c1 = poly_coeffs[static_cast<std::size_t>(i) * 3 + 1];
        const double c2 = poly_coeffs[static_cast<std::size_t>(i) * 3 + 2];
        acc += (c0 + (c1 + c2 * v_dot) * v_dot) * v_pow;
        v_pow *= v;
    }
    return acc;
}

PolyParams ActuatorTruth::truth_poly() const {
    PolyParams params;
    params.n = 3;
    params.m = 2;
    params.p = 0;
    params.alpha.assign(poly_coeffs.begin(), poly_coeffs.end());
    return params;
}

FittedModel ActuatorTruth::truth_model() const {
    FittedModel model;
    model.spec = ModelSpec{.family = Family::Poly, .n = 3, .m = 2};
    model.params = truth_poly().to_flat();
    model.nu = count_params(model.spec);
    model.trained_on = "truth";
    return model;
}

double air_pocket_transform(const ActuatorTruth& truth, double v_injected, double p) {
    if (truth.air_volume < 0.0) {
        throw InvariantError("air_volume must be >= 0");
    }
    if (truth.air_volume == 0.0) return v_injected;
    const double atm = truth.atm_pressure;
    const double compressed = truth.air_volume * atm / (atm + p);
    return v_injected - (truth.air_volume - compressed);
}

std::pair<double, double> solve_air_coupled_pressure(const ActuatorTruth& truth,
                                                     double v_injected, double v_dot) {
    auto law = [&](double v_eff) {
        double p = truth.pressure_law(v_eff, v_dot);
        if (truth.hysteresis_gain != 0.0 && v_dot != 0.0) {
            p += v_dot > 0.0 ? truth.hysteresis_gain : -truth.hysteresis_gain;
        }
        return p;
    };
    if (truth.air_volume == 0.0) {
        return {v_injected, law(v_injected)};
    }
    double v_eff = v_injected;
    double p = law(v_eff);
    for (int iter = 0; iter < 50; ++iter) {
        const double next = air_pocket_transform(truth, v_injected, p);
        const double step = std::abs(next - v_eff);
        v_eff = next;
        p = law(v_eff);
        if (step <= 1e-9) {
            return {v_eff, p};
        }
    }
    throw NoFixedPointError("air-pocket pressure solve did not converge at v=" +
                            std::to_string(v_injected));
}

Dataset generate(const ActuatorTruth& truth, const Protocol& proto) {
    if (proto.v_max <= 0.0) throw InvariantError("v_max must be positive");
    if (proto.flow_rates.empty()) throw InvariantError("flow_rates must be non-empty");
    for (double q : proto.flow_rates) {
        if (q <= 0.0) throw InvariantError("flow rates must be positive");
    }
    if (proto.cycles_per_rate <= 0) throw InvariantError("cycles_per_rate must be positive");
    if (truth.noise_sigma < 0.0) throw InvariantError("noise_sigma must be >= 0");
    if (truth.air_volume < 0.0) throw InvariantError("air_volume must be >= 0");

    const double dt = 1.0 / proto.sample_rate_hz;
    std::vector<Trajectory> trajectories;
    int cycle_id = 0;
    std::size_t grid_index = 0;  // global sample grid, continuous time across cycles

    for (std::size_t rate_idx = 0; rate_idx < proto.flow_rates.size(); ++rate_idx) {
        const double q = proto.flow_rates[rate_idx];
        const double ramp_s = proto.v_max / q;
        const double cycle_s = 2.0 * ramp_s + proto.dwell_s;

        for (int cyc = 0; cyc < proto.cycles_per_rate; ++cyc) {
            SplitMix64 noise(derive_seed(proto.seed, rate_idx, static_cast<std::uint64_t>(cyc)));
            const double t0 = static_cast<double>(grid_index) * dt;
            std::vector<Sample> samples;
            // Samples on [0, cycle_s): floor rule, start inclusive.
            const auto count = static_cast<std::size_t>(std::ceil(cycle_s / dt - 1e-9));
            samples.reserve(count);
            for (std::size_t i = 0; i < count; ++i) {
                const double tau = static_cast<double>(i) * dt;
                double v_cmd, v_dot_cmd;
                if (tau < ramp_s) {
                    v_cmd = q * tau;
                    v_dot_cmd = q;
                } else if (tau < ramp_s + proto.dwell_s) {
                    v_cmd = proto.v_max;
                    v_dot_cmd = 0.0;
                } else {
                    v_cmd = proto.v_max - q * (tau - ramp_s - proto.dwell_s);
                    v_dot_cmd = -q;
                }
                if (v_cmd < 0.0) v_cmd = 0.0;

                const auto [v_eff, p_clean] =
                    solve_air_coupled_pressure(truth, v_cmd, v_dot_cmd);
                (void)v_eff;
                double p = p_clean;
                if (truth.noise_sigma > 0.0) {
                    p += truth.noise_sigma * noise.next_gaussian();
                }
                samples.emplace_back(t0 + tau, v_cmd, v_dot_cmd, 0.0, p);
            }
            grid_index += count;
            trajectories.emplace_back(std::move(samples), proto.sample_rate_hz, cycle_id++,
                                      Phase::Mixed, /*has_vdot=*/true, /*has_vddot=*/true);
        }
    }

    Dataset ds(std::move(trajectories), 0);
    ds.metadata["generator"] = "sba-sim";
    ds.metadata["seed"] = std::to_string(proto.seed);
    ds.metadata["air_volume_mm3"] = std::to_string(truth.air_volume);
    ds.metadata["noise_sigma_kpa"] = std::to_string(truth.noise_sigma);
    return ds;
}

Dataset inject_external_load(const Dataset& ds, const std::vector<double>& offsets) {
    if (offsets.size() != ds.n_samples()) {
        throw LengthMismatchError("offset series length " + std::to_string(offsets.size()) +
                                  " does not match sample count " +
                                  std::to_string(ds.n_samples()));
    }
    std::vector<Trajectory> out;
    out.reserve(ds.trajectories.size());
    std::size_t idx = 0;
    for (const Trajectory& traj : ds.trajectories) {
        std::vector<Sample> samples = traj.samples();
        for (Sample& s : samples) {
            s = Sample(s.t, s.v, s.v_dot, s.v_ddot, s.p + offsets[idx++]);
        }
        out.emplace_back(std::move(samples), traj.sample_rate_hz(), traj.cycle_id(),
                         traj.phase(), traj.has_vdot(), traj.has_vddot());
    }
    return Dataset(std::move(out), ds.chamber_id, ds.metadata);
}

}  // namespace hydrofit
