#pragma once
// Burckhardt slip-friction curves, reference roads, optimal-slip oracles.

#include <cmath>
#include <stdexcept>
#include <string>

namespace fricsim {

struct BurckhardtParams {
    double beta1;
    double beta2;
    double beta3;

    bool valid() const {
        return std::isfinite(beta1) && std::isfinite(beta2) && std::isfinite(beta3) &&
               beta1 > 0.0 && beta2 > 0.0 && beta3 >= 0.0 && beta1 * beta2 > beta3;
    }
};

inline void require_valid(const BurckhardtParams& p) {
    if (!p.valid()) throw std::domain_error("invalid Burckhardt parameters");
}

enum class RoadName { Dry, Wet, Snow };

struct ReferenceRoad {
    RoadName name;
    BurckhardtParams params;
};

inline constexpr BurckhardtParams kDry{1.2801, 23.99, 0.52};
inline constexpr BurckhardtParams kWet{0.857, 33.822, 0.347};
inline constexpr BurckhardtParams kSnow{0.1946, 94.129, 0.0646};

inline const ReferenceRoad kReferenceRoads[3] = {
    {RoadName::Dry, kDry}, {RoadName::Wet, kWet}, {RoadName::Snow, kSnow}};

inline BurckhardtParams road_by_name(const std::string& n) {
    if (n == "dry") return kDry;
    if (n == "wet") return kWet;
    if (n == "snow") return kSnow;
    throw std::domain_error("unknown road name: " + n);
}

// mu(lambda) = b1*(1 - exp(-b2*lambda)) - b3*lambda on [0,1]
inline double mu(const BurckhardtParams& p, double lambda) {
    require_valid(p);
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::domain_error("slip out of [0,1]");
    return p.beta1 * (1.0 - std::exp(-p.beta2 * lambda)) - p.beta3 * lambda;
}

struct OptimalPoint {
    double lambda_star;
    double mu_star;
};

// Stationary point of mu: lambda* = ln(b1*b2/b3)/b2, clamped to 1.
// b3 = 0 means mu is monotone increasing, so the supremum sits at lambda = 1.
inline OptimalPoint optimal_point_closed_form(const BurckhardtParams& p) {
    require_valid(p);
    double ls = 1.0;
    if (p.beta3 > 0.0) {
        ls = std::log(p.beta1 * p.beta2 / p.beta3) / p.beta2;
        if (ls > 1.0) ls = 1.0;
    }
    return {ls, mu(p, ls)};
}

inline OptimalPoint optimal_point_grid(const BurckhardtParams& p, std::size_t num_points) {
    require_valid(p);
    if (num_points < 2) throw std::domain_error("grid needs at least 2 points");
    double best_l = 0.0, best_m = mu(p, 0.0);
    for (std::size_t i = 1; i < num_points; ++i) {
        double l = static_cast<double>(i) / static_cast<double>(num_points - 1);
        double m = p.beta1 * (1.0 - std::exp(-p.beta2 * l)) - p.beta3 * l;
        if (m > best_m) { best_m = m; best_l = l; }
    }
    return {best_l, best_m};
}

}  // namespace fricsim
