#pragma once
// Boundary-layer sliding-mode slip regulator with integral action, optional
// torque feed-forward, and speed-scheduled feedback gains.

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fricsim {

struct ControllerConfig {
    double switching_gain = 800.0;      // N*m
    double boundary_layer = 0.02;       // slip
    double equivalent_gain = 3.5e4;     // N*m per unit slip error
    double integral_gain = 1.2e5;       // N*m per unit slip-error integral
    double torque_rate_limit = 2.0e5;   // N*m/s
    double tick = 0.005;                // s
    double sched_ref_speed = 70.0;      // m/s; feedback scale = max(v, floor)/ref
    double sched_floor_speed = 10.0;    // m/s

    bool valid() const {
        return switching_gain > 0 && boundary_layer > 0 && equivalent_gain > 0 &&
               integral_gain >= 0 && torque_rate_limit > 0 && tick > 0 &&
               sched_ref_speed > 0 && sched_floor_speed > 0;
    }
};

struct ControllerState {
    double commanded_torque = 0.0;
    double integral = 0.0;       // integral of slip error, slip*s
    double lambda_set = 0.0;     // last accepted set-point
};

inline double saturate(double s, double phi) {
    if (!(phi > 0.0)) throw std::domain_error("boundary layer must be positive");
    return std::clamp(s / phi, -1.0, 1.0);
}

// One controller tick. feedforward_torque is the law's operating point
// (typically r*F_z(v)*mu_hat); pass a negative value to fall back to T_pilot.
// An out-of-(0,1) set-point is rejected: previous torque held.
inline double control_step(ControllerState& st, double lambda_measured, double lambda_set,
                           double T_pilot, const ControllerConfig& cfg, double v,
                           double feedforward_torque = -1.0) {
    if (!cfg.valid()) throw std::domain_error("invalid controller config");
    if (T_pilot < 0) throw std::domain_error("pilot torque must be non-negative");
    if (!(lambda_set > 0.0 && lambda_set < 1.0)) return st.commanded_torque;
    st.lambda_set = lambda_set;
    double e = lambda_measured - lambda_set;
    double scale = std::max(v, cfg.sched_floor_speed) / cfg.sched_ref_speed;
    st.integral += e * cfg.tick;
    double base = feedforward_torque >= 0.0 ? feedforward_torque : T_pilot;
    double u = base - scale * (cfg.equivalent_gain * e + cfg.integral_gain * st.integral +
                               cfg.switching_gain * saturate(e, cfg.boundary_layer));
    double u_clamped = std::clamp(u, 0.0, T_pilot);
    if (u_clamped != u) st.integral -= e * cfg.tick;  // anti-windup
    double max_step = cfg.torque_rate_limit * cfg.tick;
    st.commanded_torque =
        std::clamp(u_clamped, st.commanded_torque - max_step, st.commanded_torque + max_step);
    st.commanded_torque = std::clamp(st.commanded_torque, 0.0, T_pilot);
    return st.commanded_torque;
}

}  // namespace fricsim
