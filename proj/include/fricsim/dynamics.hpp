#pragma once
// Quarter-aircraft braking dynamics: RK4 simulation and the inversion that
// recovers (slip, friction) estimates from speed/wheel-speed/torque samples.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "friction.hpp"

namespace fricsim {

struct AircraftParams {
    double M = 6000.0;    // effective mass per strut, kg
    double J = 1.5;       // wheel inertia, kg m^2
    double r = 0.3;       // wheel radius, m
    double K_D = 2.5;     // aero drag, N s^2/m^2
    double K_P = 0.3 * 6000.0 * 9.81 / (70.0 * 70.0);  // lift: 30% of weight at 70 m/s
    double Q_g = 0.45;    // main-gear weight fraction
    double g = 9.81;

    bool valid() const {
        return M > 0 && J > 0 && r > 0 && K_D > 0 && K_P > 0 && g > 0 && Q_g > 0 && Q_g < 1;
    }
};

struct AircraftState {
    double v;        // m/s
    double omega_L;  // rad/s
    double omega_R;  // rad/s
    double t;        // s
};

struct Forces {
    double F_x_L, F_x_R, F_D, F_z;
};

struct MeasurementSample {
    double v;
    double omega;
    double T_b;
    double t;
};

inline constexpr double kVMin = 1.0;          // slip denominator singularity guard
inline constexpr double kLoadFloor = 1e-6;    // N, below which inversion degenerates

inline double slip(double v, double omega, double r) {
    if (v < kVMin) throw std::domain_error("slip undefined below v_min");
    return std::clamp((v - r * omega) / v, 0.0, 1.0);
}

inline double vertical_load(const AircraftParams& p, double v) {
    return std::clamp(p.Q_g * (p.M * p.g - p.K_P * v * v), 0.0, p.Q_g * p.M * p.g);
}

struct StateDeriv {
    double dv, domega_L, domega_R;
};

inline StateDeriv derivatives(const AircraftState& s, double T_b_L, double T_b_R,
                              const AircraftParams& p, const BurckhardtParams& road) {
    double lam_L = slip(s.v, s.omega_L, p.r);
    double lam_R = slip(s.v, s.omega_R, p.r);
    double F_z = vertical_load(p, s.v);
    double F_x_L = mu(road, lam_L) * F_z;
    double F_x_R = mu(road, lam_R) * F_z;
    return {(-F_x_L - F_x_R - p.K_D * s.v * s.v) / p.M,
            (p.r * F_x_L - T_b_L) / p.J,
            (p.r * F_x_R - T_b_R) / p.J};
}

// Fixed-step RK4; wheels clamped to [0, v/r] after the step (braking regime).
inline AircraftState step(const AircraftState& s, double T_b_L, double T_b_R,
                          const AircraftParams& p, const BurckhardtParams& road, double dt) {
    if (!(dt > 0)) throw std::domain_error("dt must be positive");
    auto add = [](const AircraftState& a, const StateDeriv& d, double h) {
        return AircraftState{a.v + h * d.dv, a.omega_L + h * d.domega_L,
                             a.omega_R + h * d.domega_R, a.t};
    };
    StateDeriv k1 = derivatives(s, T_b_L, T_b_R, p, road);
    StateDeriv k2 = derivatives(add(s, k1, dt / 2), T_b_L, T_b_R, p, road);
    StateDeriv k3 = derivatives(add(s, k2, dt / 2), T_b_L, T_b_R, p, road);
    StateDeriv k4 = derivatives(add(s, k3, dt), T_b_L, T_b_R, p, road);
    AircraftState out{
        s.v + dt / 6.0 * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv),
        s.omega_L + dt / 6.0 * (k1.domega_L + 2 * k2.domega_L + 2 * k3.domega_L + k4.domega_L),
        s.omega_R + dt / 6.0 * (k1.domega_R + 2 * k2.domega_R + 2 * k3.domega_R + k4.domega_R),
        s.t + dt};
    out.omega_L = std::clamp(out.omega_L, 0.0, out.v / p.r);
    out.omega_R = std::clamp(out.omega_R, 0.0, out.v / p.r);
    return out;
}

// Recover (slip, friction) per sample: mu = (J*domega/dt + T_b)/(r*F_z).
// omega-dot via centered differences (forward/backward at the ends), then a
// first-order low-pass with time constant tau.
inline std::vector<std::pair<double, double>> invert_measurements(
    const std::vector<MeasurementSample>& w, const AircraftParams& p, double tau = 0.010) {
    if (w.size() < 2) throw std::domain_error("inversion needs at least 2 samples");
    std::size_t n = w.size();
    std::vector<double> wd(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0)
            wd[i] = (w[1].omega - w[0].omega) / (w[1].t - w[0].t);
        else if (i == n - 1)
            wd[i] = (w[n - 1].omega - w[n - 2].omega) / (w[n - 1].t - w[n - 2].t);
        else
            wd[i] = (w[i + 1].omega - w[i - 1].omega) / (w[i + 1].t - w[i - 1].t);
    }
    double tick = (w[n - 1].t - w[0].t) / static_cast<double>(n - 1);
    double a = tick / (tau + tick);
    double f = wd[0];
    std::vector<std::pair<double, double>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        f += a * (wd[i] - f);
        double F_z = vertical_load(p, w[i].v);
        if (F_z < kLoadFloor) throw std::domain_error("degenerate load in inversion");
        double lam = slip(w[i].v, w[i].omega, p.r);
        double m = std::clamp((p.J * f + w[i].T_b) / (p.r * F_z), 0.0, 1.5);
        out[i] = {lam, m};
    }
    return out;
}

inline double kinetic_energy(const AircraftState& s, const AircraftParams& p) {
    return 0.5 * p.M * s.v * s.v + 0.5 * p.J * (s.omega_L * s.omega_L + s.omega_R * s.omega_R);
}

}  // namespace fricsim
