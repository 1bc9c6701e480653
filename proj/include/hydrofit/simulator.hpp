#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hydrofit/models.hpp"
#include "hydrofit/types.hpp"

namespace hydrofit {

/// Ground-truth pressure law for the synthetic actuator: the (3,2)
/// polynomial benchmark coefficients, optionally with a sign(v_dot)
/// hysteresis offset, an isothermal series air pocket, and Gaussian
/// measurement noise.
struct ActuatorTruth {
    // Row-major (i,j): coefficient of v^i * v_dot^j, i = 0..3, j = 0..2.
    std::array<double, 12> poly_coeffs{
        0.0,        1.7660e-1,  2.3010e-4,   //
        1.2695e-2,  -1.3896e-4, -3.0150e-6,  //
        -8.0664e-5, 6.6527e-7,  1.3800e-8,   //
        4.1269e-7,  -7.3542e-10, -1.3773e-11,
    };
    double hysteresis_gain = 0.0;   // kPa
    double air_volume = 0.0;        // mm^3 at atmospheric
    double noise_sigma = 0.3;       // kPa
    double atm_pressure = 101.325;  // kPa

    /// The polynomial part evaluated at (v, v_dot).
    double pressure_law(double v, double v_dot) const;

    /// Same coefficients as a (3,2) PolyParams / FittedModel.
    PolyParams truth_poly() const;
    FittedModel truth_model() const;
};

/// Bench protocol: trapezoidal volume cycles (ramp up at +q, dwell 0.5 s,
/// ramp down at -q) repeated per flow rate.
struct Protocol {
    double v_max = 550.0;                                      // mm^3
    std::vector<double> flow_rates{20.0, 40.0, 60.0, 80.0, 100.0};  // mm^3/s
    int cycles_per_rate = 20;
    double sample_rate_hz = 25.0;
    std::uint64_t seed = 0;
    double dwell_s = 0.5;
};

/// Series air compliance: the pocket compressed to V_air(P) =
/// air_volume * atm / (atm + P) leaves v_injected - (air_volume - V_air)
/// effective in the chamber. Pure formula; P is taken as given.
double air_pocket_transform(const ActuatorTruth& truth, double v_injected, double p);

/// Solve P = law(v_effective(P), v_dot) self-consistently by fixed-point
/// iteration (<= 50 iterations, tolerance 1e-9 mm^3 on v_effective).
/// Returns {v_effective, P}. Throws NoFixedPointError on non-convergence.
std::pair<double, double> solve_air_coupled_pressure(const ActuatorTruth& truth,
                                                     double v_injected, double v_dot);

/// Generate the synthetic dataset: one trajectory per cycle, commanded
/// v/v_dot on a continuous 1/sample_rate grid, v_ddot = 0 (piecewise-linear
/// command), measured P per the truth config. Bit-deterministic under
/// (truth, proto) including the seed.
Dataset generate(const ActuatorTruth& truth, const Protocol& proto);

/// Add per-sample pressure offsets (kPa, aligned to the flattened sample
/// order) to the measured pressures. LengthMismatchError unless the offset
/// series matches n_samples().
Dataset inject_external_load(const Dataset& ds, const std::vector<double>& offsets);

}  // namespace hydrofit
