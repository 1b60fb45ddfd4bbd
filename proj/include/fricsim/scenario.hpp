#pragma once
// Scenario files: INI-style sections of key = value lines describing one
// experiment (aircraft, road schedule, torque profile or controller setup,
// estimator, seeds). Parse errors carry line numbers.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "control.hpp"
#include "dynamics.hpp"
#include "friction.hpp"

namespace fricsim {

struct ScenarioError : std::runtime_error {
    int line;
    ScenarioError(int ln, const std::string& msg)
        : std::runtime_error("scenario line " + std::to_string(ln) + ": " + msg), line(ln) {}
};

struct RoadSegment {
    BurckhardtParams road;
    double start_time;  // s
    std::string name;   // "dry"/"wet"/"snow" or "custom"
};

struct RoadSchedule {
    std::vector<RoadSegment> segments;

    const RoadSegment& at(double t) const {
        const RoadSegment* cur = &segments.front();
        for (const auto& s : segments)
            if (s.start_time <= t) cur = &s;
        return *cur;
    }
};

enum class ProfileKind { Sinusoid, Constant, PilotStep };

struct TorqueProfile {
    ProfileKind kind = ProfileKind::Constant;
    double amplitude = 0.0;  // sinusoid
    double bias = 0.0;       // sinusoid
    double frequency = 0.0;  // Hz
    double level = 0.0;      // constant / pilot step
    double ramp = 0.0;       // pilot step ramp time, s

    // instantaneous demanded torque, clamped non-negative
    double torque(double t) const {
        double u = 0.0;
        switch (kind) {
            case ProfileKind::Sinusoid:
                // starts from zero demand: bias + A*sin(wt - pi/2) with A=bias sweeps [0, 2A]
                u = bias + amplitude * std::sin(2.0 * M_PI * frequency * t - M_PI / 2.0);
                break;
            case ProfileKind::Constant: u = level; break;
            case ProfileKind::PilotStep:
                u = ramp > 0.0 ? level * std::min(1.0, t / ramp) : level;
                break;
        }
        return std::max(0.0, u);
    }
};

enum class SetpointSource { FixedValue, LiveMlp };

struct Scenario {
    enum class Mode { OpenLoop, ClosedLoop } mode = Mode::OpenLoop;

    AircraftParams aircraft;
    RoadSchedule schedule;
    TorqueProfile profile;       // open loop
    double pilot_torque = 7000;  // closed loop
    ControllerConfig controller;

    SetpointSource setpoint_source = SetpointSource::LiveMlp;
    double fixed_setpoint = 0.13;
    double gate_lo = 0.02, gate_hi = 0.5;   // acceptance gate on MLP set-points
    double setpoint_slew = 0.05;            // slip/s
    double dither_amplitude = 0.008;        // slip
    double dither_frequency = 1.0;          // Hz

    std::string model_path;
    std::size_t s_forwards = 500;
    double sigma_obs = 0.017;
    std::size_t window_n = 15;

    double v0 = 70.0;
    double dt = 1e-3;
    double cutoff_speed = 5.0;
    double max_time = 60.0;
    std::uint64_t seed = 0;
};

namespace detail {
inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double to_num(const std::string& v, int line) {
    try {
        std::size_t pos;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ScenarioError(line, "not a number: '" + v + "'");
    }
}
}  // namespace detail

// "wet" | "custom:b1,b2,b3"
inline BurckhardtParams parse_road(const std::string& spec, int line, std::string* name) {
    if (spec.rfind("custom:", 0) == 0) {
        std::istringstream is(spec.substr(7));
        std::string t;
        double b[3];
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(is, t, ',')) throw ScenarioError(line, "custom road needs 3 betas");
            b[i] = detail::to_num(detail::trim(t), line);
        }
        BurckhardtParams p{b[0], b[1], b[2]};
        if (!p.valid()) throw ScenarioError(line, "invalid Burckhardt parameters");
        if (name) *name = "custom";
        return p;
    }
    try {
        BurckhardtParams p = road_by_name(spec);
        if (name) *name = spec;
        return p;
    } catch (const std::exception& e) {
        throw ScenarioError(line, e.what());
    }
}

inline Scenario parse_scenario(std::istream& in) {
    Scenario sc;
    std::string section, raw;
    int ln = 0;
    bool saw_mode = false;
    while (std::getline(in, raw)) {
        ++ln;
        std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ScenarioError(ln, "unterminated section header");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ScenarioError(ln, "expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) throw ScenarioError(ln, "empty key or value");
        auto num = [&] { return detail::to_num(val, ln); };

        if (section == "run") {
            if (key == "mode") {
                if (val == "open_loop") sc.mode = Scenario::Mode::OpenLoop;
                else if (val == "closed_loop") sc.mode = Scenario::Mode::ClosedLoop;
                else throw ScenarioError(ln, "mode must be open_loop or closed_loop");
                saw_mode = true;
            } else if (key == "v0") sc.v0 = num();
            else if (key == "dt") sc.dt = num();
            else if (key == "cutoff_speed") sc.cutoff_speed = num();
            else if (key == "max_time") sc.max_time = num();
            else if (key == "seed") sc.seed = static_cast<std::uint64_t>(num());
            else throw ScenarioError(ln, "unknown key in [run]: " + key);
        } else if (section == "aircraft") {
            if (key == "M") sc.aircraft.M = num();
            else if (key == "J") sc.aircraft.J = num();
            else if (key == "r") sc.aircraft.r = num();
            else if (key == "K_D") sc.aircraft.K_D = num();
            else if (key == "K_P") sc.aircraft.K_P = num();
            else if (key == "Q_g") sc.aircraft.Q_g = num();
            else if (key == "g") sc.aircraft.g = num();
            else throw ScenarioError(ln, "unknown key in [aircraft]: " + key);
        } else if (section == "schedule") {
            if (key != "segment") throw ScenarioError(ln, "unknown key in [schedule]: " + key);
            std::size_t at = val.rfind('@');
            if (at == std::string::npos) throw ScenarioError(ln, "segment needs 'road @ time'");
            RoadSegment seg;
            seg.road = parse_road(detail::trim(val.substr(0, at)), ln, &seg.name);
            seg.start_time = detail::to_num(detail::trim(val.substr(at + 1)), ln);
            if (!sc.schedule.segments.empty() &&
                seg.start_time <= sc.schedule.segments.back().start_time)
                throw ScenarioError(ln, "segments must have increasing start times");
            if (sc.schedule.segments.empty() && seg.start_time != 0.0)
                throw ScenarioError(ln, "first segment must start at 0");
            sc.schedule.segments.push_back(seg);
        } else if (section == "profile") {
            if (key == "kind") {
                if (val == "sinusoid") sc.profile.kind = ProfileKind::Sinusoid;
                else if (val == "constant") sc.profile.kind = ProfileKind::Constant;
                else if (val == "pilot_step") sc.profile.kind = ProfileKind::PilotStep;
                else throw ScenarioError(ln, "unknown profile kind: " + val);
            } else if (key == "amplitude") sc.profile.amplitude = num();
            else if (key == "bias") sc.profile.bias = num();
            else if (key == "frequency") sc.profile.frequency = num();
            else if (key == "level") sc.profile.level = num();
            else if (key == "ramp") sc.profile.ramp = num();
            else throw ScenarioError(ln, "unknown key in [profile]: " + key);
        } else if (section == "pilot") {
            if (key == "torque") sc.pilot_torque = num();
            else throw ScenarioError(ln, "unknown key in [pilot]: " + key);
        } else if (section == "controller") {
            if (key == "switching_gain") sc.controller.switching_gain = num();
            else if (key == "boundary_layer") sc.controller.boundary_layer = num();
            else if (key == "equivalent_gain") sc.controller.equivalent_gain = num();
            else if (key == "integral_gain") sc.controller.integral_gain = num();
            else if (key == "torque_rate_limit") sc.controller.torque_rate_limit = num();
            else if (key == "tick") sc.controller.tick = num();
            else if (key == "sched_ref_speed") sc.controller.sched_ref_speed = num();
            else if (key == "sched_floor_speed") sc.controller.sched_floor_speed = num();
            else throw ScenarioError(ln, "unknown key in [controller]: " + key);
        } else if (section == "setpoint") {
            if (key == "source") {
                if (val == "mlp") sc.setpoint_source = SetpointSource::LiveMlp;
                else if (val == "fixed") sc.setpoint_source = SetpointSource::FixedValue;
                else throw ScenarioError(ln, "setpoint source must be mlp or fixed");
            } else if (key == "fixed_value") sc.fixed_setpoint = num();
            else if (key == "gate_lo") sc.gate_lo = num();
            else if (key == "gate_hi") sc.gate_hi = num();
            else if (key == "slew") sc.setpoint_slew = num();
            else if (key == "dither_amplitude") sc.dither_amplitude = num();
            else if (key == "dither_frequency") sc.dither_frequency = num();
            else throw ScenarioError(ln, "unknown key in [setpoint]: " + key);
        } else if (section == "estimator") {
            if (key == "model") sc.model_path = val;
            else if (key == "s_forwards") sc.s_forwards = static_cast<std::size_t>(num());
            else if (key == "sigma_obs") sc.sigma_obs = num();
            else if (key == "window") sc.window_n = static_cast<std::size_t>(num());
            else throw ScenarioError(ln, "unknown key in [estimator]: " + key);
        } else if (section.empty()) {
            throw ScenarioError(ln, "key outside any [section]");
        } else {
            throw ScenarioError(ln, "unknown section [" + section + "]");
        }
    }
    if (!saw_mode) throw ScenarioError(ln, "missing [run] mode");
    if (sc.schedule.segments.empty()) throw ScenarioError(ln, "missing [schedule] segment");
    if (!sc.aircraft.valid()) throw ScenarioError(ln, "invalid aircraft parameters");
    if (!sc.controller.valid()) throw ScenarioError(ln, "invalid controller config");
    if (!(sc.v0 > sc.cutoff_speed && sc.cutoff_speed >= kVMin))
        throw ScenarioError(ln, "need v0 > cutoff_speed >= 1");
    if (sc.window_n < 2) throw ScenarioError(ln, "estimator window must be >= 2");
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open scenario: " + path);
    return parse_scenario(f);
}

}  // namespace fricsim
