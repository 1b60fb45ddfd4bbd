#pragma once
// Experiment execution: open-loop torque sweeps and closed-loop slip
// regulation over road schedules, with live MC-dropout estimation, metric
// computation, and trace export.

#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "control.hpp"
#include "dynamics.hpp"
#include "net.hpp"
#include "scenario.hpp"

namespace fricsim {

struct TraceRow {
    double t, v, omega_L, omega_R, lambda_L, mu_L, T_b_L, F_z;
    double sigma_norm;        // NaN until the window fills
    double lambda_star_hat;   // NaN until the window fills
    double lambda_star_true;
    double lambda_set;        // closed loop only; NaN otherwise
};

struct ExperimentResult {
    std::vector<TraceRow> trace;
    std::map<std::string, double> metrics;
    // per estimate: max inverted slip in the window, normalized uncertainty
    std::vector<std::pair<double, double>> window_bands;
};

inline constexpr const char* kTraceHeader =
    "t,v,omega_L,omega_R,lambda_L,mu_L,T_b_L,F_z,sigma_norm,lambda_star_hat,lambda_star_true";

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.precision(17);
    f << kTraceHeader << "\n";
    for (const auto& r : trace)
        f << r.t << "," << r.v << "," << r.omega_L << "," << r.omega_R << "," << r.lambda_L
          << "," << r.mu_L << "," << r.T_b_L << "," << r.F_z << "," << r.sigma_norm << ","
          << r.lambda_star_hat << "," << r.lambda_star_true << "\n";
}

// tracking RMSE over valid estimates, stopping distance, per-band
// uncertainty means (low: all window slips <= 0.08; high: any slip > 0.1).
inline std::map<std::string, double> compute_metrics(const ExperimentResult& res, double dt_row) {
    std::map<std::string, double> m;
    double se = 0.0, dist = 0.0;
    std::size_t nest = 0;
    for (const auto& r : res.trace) {
        dist += r.v * dt_row;
        if (std::isfinite(r.lambda_star_hat)) {
            double e = r.lambda_star_hat - r.lambda_star_true;
            se += e * e;
            ++nest;
        }
    }
    m["ticks"] = static_cast<double>(res.trace.size());
    m["estimates"] = static_cast<double>(nest);
    m["stopping_distance_m"] = dist;
    m["stop_time_s"] = res.trace.empty() ? 0.0 : res.trace.back().t;
    m["tracking_rmse"] = nest ? std::sqrt(se / static_cast<double>(nest)) : std::nan("");
    double lo = 0.0, hi = 0.0;
    std::size_t nlo = 0, nhi = 0;
    for (const auto& [max_slip, nu] : res.window_bands) {
        if (!std::isfinite(nu)) continue;
        if (max_slip <= 0.08) { lo += nu; ++nlo; }
        else if (max_slip > 0.1) { hi += nu; ++nhi; }
    }
    m["low_band_count"] = static_cast<double>(nlo);
    m["high_band_count"] = static_cast<double>(nhi);
    m["low_band_mean_norm_unc"] = nlo ? lo / static_cast<double>(nlo) : std::nan("");
    m["high_band_mean_norm_unc"] = nhi ? hi / static_cast<double>(nhi) : std::nan("");
    m["band_ratio"] = (nlo && nhi) ? (lo / static_cast<double>(nlo)) / (hi / static_cast<double>(nhi))
                                   : std::nan("");
    return m;
}

namespace detail {
struct Estimator {
    const MlpModel* model;
    std::size_t n;
    std::size_t s_forwards;
    double sigma_obs;
    std::uint64_t seed;
    std::deque<MeasurementSample> hist;
    std::size_t tick_index = 0;

    // returns true once the window is full; fills pred and window stats
    bool update(const MeasurementSample& s, const AircraftParams& ap, Prediction* pred,
                double* max_slip, double* last_mu) {
        hist.push_back(s);
        if (hist.size() > n) hist.pop_front();
        ++tick_index;
        if (hist.size() < n) return false;
        std::vector<MeasurementSample> w(hist.begin(), hist.end());
        auto pairs = invert_measurements(w, ap);
        std::vector<double> x(2 * n);
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[2 * i] = pairs[i].first;
            x[2 * i + 1] = pairs[i].second;
            mx = std::max(mx, pairs[i].first);
        }
        UncertaintyConfig ucfg{s_forwards, sigma_obs, derive_seed(seed, 1000 + tick_index)};
        *pred = predict_with_uncertainty(*model, x, ucfg);
        *max_slip = mx;
        *last_mu = pairs.back().second;
        return true;
    }
};
}  // namespace detail

inline ExperimentResult run_open_loop(const Scenario& sc, const MlpModel& model) {
    ExperimentResult res;
    const AircraftParams& ap = sc.aircraft;
    AircraftState st{sc.v0, sc.v0 / ap.r, sc.v0 / ap.r, 0.0};
    detail::Estimator est{&model, sc.window_n, sc.s_forwards, sc.sigma_obs, sc.seed, {}, 0};
    std::size_t ticks_per_ctl = static_cast<std::size_t>(std::llround(sc.controller.tick / sc.dt));
    std::size_t k = 0;
    while (st.v > sc.cutoff_speed && st.t < sc.max_time) {
        const RoadSegment& seg = sc.schedule.at(st.t);
        double T_b = sc.profile.torque(st.t);
        if (k % ticks_per_ctl == 0) {
            TraceRow row{};
            row.t = st.t; row.v = st.v; row.omega_L = st.omega_L; row.omega_R = st.omega_R;
            row.lambda_L = slip(st.v, st.omega_L, ap.r);
            row.mu_L = mu(seg.road, row.lambda_L);
            row.T_b_L = T_b;
            row.F_z = vertical_load(ap, st.v);
            row.lambda_star_true = optimal_point_closed_form(seg.road).lambda_star;
            row.lambda_set = std::nan("");
            Prediction p;
            double mx, mu_last;
            if (est.update({st.v, st.omega_L, T_b, st.t}, ap, &p, &mx, &mu_last)) {
                row.lambda_star_hat = p.mean;
                row.sigma_norm = p.normalized_uncertainty;
                res.window_bands.push_back({mx, p.normalized_uncertainty});
            } else {
                row.lambda_star_hat = std::nan("");
                row.sigma_norm = std::nan("");
            }
            res.trace.push_back(row);
        }
        st = step(st, T_b, T_b, ap, seg.road, sc.dt);
        ++k;
    }
    res.metrics = compute_metrics(res, sc.controller.tick);
    return res;
}

inline ExperimentResult run_closed_loop(const Scenario& sc, const MlpModel& model) {
    ExperimentResult res;
    const AircraftParams& ap = sc.aircraft;
    AircraftState st{sc.v0, sc.v0 / ap.r, sc.v0 / ap.r, 0.0};
    detail::Estimator est{&model, sc.window_n, sc.s_forwards, sc.sigma_obs, sc.seed, {}, 0};
    ControllerState cst{sc.pilot_torque, 0.0, sc.fixed_setpoint};
    double lambda_set = sc.setpoint_source == SetpointSource::FixedValue
                            ? sc.fixed_setpoint
                            : 0.10;  // neutral initial set-point until the MLP warms up
    double mu_est = 0.0;
    double T_b = sc.pilot_torque;
    std::size_t ticks_per_ctl = static_cast<std::size_t>(std::llround(sc.controller.tick / sc.dt));
    std::size_t k = 0;
    double se_track = 0.0, max_track = 0.0;
    std::size_t n_track = 0;
    while (st.v > sc.cutoff_speed && st.t < sc.max_time) {
        const RoadSegment& seg = sc.schedule.at(st.t);
        if (k % ticks_per_ctl == 0) {
            double lam = slip(st.v, st.omega_L, ap.r);
            TraceRow row{};
            row.t = st.t; row.v = st.v; row.omega_L = st.omega_L; row.omega_R = st.omega_R;
            row.lambda_L = lam;
            row.mu_L = mu(seg.road, lam);
            row.F_z = vertical_load(ap, st.v);
            row.lambda_star_true = optimal_point_closed_form(seg.road).lambda_star;
            Prediction p;
            double mx, mu_last;
            if (est.update({st.v, st.omega_L, T_b, st.t}, ap, &p, &mx, &mu_last)) {
                row.lambda_star_hat = p.mean;
                row.sigma_norm = p.normalized_uncertainty;
                res.window_bands.push_back({mx, p.normalized_uncertainty});
                mu_est = mu_last;
                if (sc.setpoint_source == SetpointSource::LiveMlp && p.mean >= sc.gate_lo &&
                    p.mean <= sc.gate_hi) {
                    double max_d = sc.setpoint_slew * sc.controller.tick;
                    lambda_set += std::clamp(p.mean - lambda_set, -max_d, max_d);
                }
            } else {
                row.lambda_star_hat = std::nan("");
                row.sigma_norm = std::nan("");
            }
            double target = lambda_set + sc.dither_amplitude *
                                             std::sin(2.0 * M_PI * sc.dither_frequency * st.t);
            double T_ff = mu_est > 0.0 ? ap.r * vertical_load(ap, st.v) * mu_est : -1.0;
            T_b = control_step(cst, lam, target, sc.pilot_torque, sc.controller, st.v, T_ff);
            row.T_b_L = T_b;
            row.lambda_set = lambda_set;
            if (st.t >= 1.5) {
                double e = lam - lambda_set;
                se_track += e * e;
                max_track = std::max(max_track, std::abs(e));
                ++n_track;
            }
            res.trace.push_back(row);
        }
        st = step(st, T_b, T_b, ap, seg.road, sc.dt);
        ++k;
    }
    res.metrics = compute_metrics(res, sc.controller.tick);
    res.metrics["slip_tracking_rmse"] =
        n_track ? std::sqrt(se_track / static_cast<double>(n_track)) : std::nan("");
    res.metrics["slip_tracking_max_err"] = n_track ? max_track : std::nan("");
    return res;
}

inline ExperimentResult run_scenario(const Scenario& sc, const MlpModel& model) {
    return sc.mode == Scenario::Mode::OpenLoop ? run_open_loop(sc, model)
                                               : run_closed_loop(sc, model);
}

inline void write_metrics_report(const std::string& path,
                                 const std::map<std::string, double>& metrics) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.precision(17);
    for (const auto& [k, v] : metrics) f << k << "=" << v << "\n";
}

}  // namespace fricsim
