#pragma once
// Synthetic friction-cube dataset: curve families, windowing, serialization.
//
// File format (FCUBEDS1): magic bytes "FCUBEDS1", one key=value header line
// terminated by '\n', then packed records of (n*2 + 1) little-endian f64:
// interleaved (lambda, mu) pairs followed by the lambda* label.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "friction.hpp"
#include "rng.hpp"

namespace fricsim {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

struct Window {
    // interleaved (lambda1, mu1, ..., lambdan, mun), length 2n
    std::vector<double> values;
    std::size_t n() const { return values.size() / 2; }
};

struct LabeledWindow {
    Window window;
    double lambda_star;
};

struct FrictionCube {
    double b1_lo = 0.15, b1_hi = 1.35;
    double b2_lo = 20.0, b2_hi = 100.0;
    double b3_lo = 0.05, b3_hi = 0.55;
    std::size_t n1 = 8, n2 = 8, n3 = 8;

    bool valid() const {
        return b1_lo < b1_hi && b2_lo < b2_hi && b3_lo < b3_hi && n1 >= 1 && n2 >= 1 && n3 >= 1;
    }
};

enum class CurveFamily { Neighborhood, Grid };

struct DatasetConfig {
    CurveFamily family = CurveFamily::Neighborhood;
    FrictionCube cube;                  // grid family: the grid; neighborhood: bounding box
    std::size_t per_ref = 70;           // neighborhood: jittered curves per reference road
    double jitter = 0.10;               // neighborhood: uniform +-fraction on each beta
    std::size_t n = 15;                 // window size
    std::size_t num_points = 10000;     // linspace samples per curve
    double noise_sigma = 0.01;          // AWGN std on mu
    std::vector<std::size_t> dilations = {1, 8, 64, 256};
    double cover_lo = 0.02, cover_hi = 0.45;  // window-start coverage in slip
    std::size_t windows_per_dilation = 30;
    std::size_t stride = 0;             // nonzero: classic stride windows instead of dilations
    std::uint64_t seed = 42;
};

struct DatasetManifest {
    std::size_t total_windows = 0;
    DatasetConfig config;
    int format_version = 1;
};

// Cartesian grid over the cube, filtered to beta1*beta2 > beta3, with the
// three reference roads appended (deduplicated).
inline std::vector<BurckhardtParams> enumerate_curves(const FrictionCube& c) {
    if (!c.valid()) throw std::domain_error("invalid friction cube");
    auto lin = [](double lo, double hi, std::size_t k, std::size_t i) {
        return k == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
    };
    std::vector<BurckhardtParams> out;
    for (std::size_t i = 0; i < c.n1; ++i)
        for (std::size_t j = 0; j < c.n2; ++j)
            for (std::size_t k = 0; k < c.n3; ++k) {
                BurckhardtParams p{lin(c.b1_lo, c.b1_hi, c.n1, i), lin(c.b2_lo, c.b2_hi, c.n2, j),
                                   lin(c.b3_lo, c.b3_hi, c.n3, k)};
                if (p.valid()) out.push_back(p);
            }
    for (const auto& ref : kReferenceRoads) {
        bool dup = false;
        for (const auto& p : out)
            if (p.beta1 == ref.params.beta1 && p.beta2 == ref.params.beta2 &&
                p.beta3 == ref.params.beta3)
                dup = true;
        if (!dup) out.push_back(ref.params);
    }
    if (out.empty()) throw std::domain_error("empty friction cube");
    return out;
}

// The reference roads plus per_ref jittered copies of each: every beta scaled
// by an independent U[1-jitter, 1+jitter] draw. Matches the clustered curve
// family the training distribution needs.
inline std::vector<BurckhardtParams> neighborhood_curves(std::size_t per_ref, double jitter,
                                                         std::uint64_t seed) {
    Rng rng(seed, /*stream=*/0);
    std::vector<BurckhardtParams> out;
    for (const auto& ref : kReferenceRoads) out.push_back(ref.params);
    for (const auto& ref : kReferenceRoads)
        for (std::size_t i = 0; i < per_ref; ++i) {
            double f1 = rng.uniform(1.0 - jitter, 1.0 + jitter);
            double f2 = rng.uniform(1.0 - jitter, 1.0 + jitter);
            double f3 = rng.uniform(1.0 - jitter, 1.0 + jitter);
            BurckhardtParams p{ref.params.beta1 * f1, ref.params.beta2 * f2,
                               ref.params.beta3 * f3};
            if (p.valid()) out.push_back(p);
        }
    return out;
}

// Linearly spaced (lambda, mu) samples on [0,1] inclusive.
inline std::vector<std::pair<double, double>> sample_curve(const BurckhardtParams& p,
                                                           std::size_t num_points) {
    require_valid(p);
    if (num_points < 2) throw std::domain_error("need at least 2 sample points");
    std::vector<std::pair<double, double>> out(num_points);
    for (std::size_t i = 0; i < num_points; ++i) {
        double l = static_cast<double>(i) / static_cast<double>(num_points - 1);
        out[i] = {l, mu(p, l)};
    }
    return out;
}

namespace detail {
// Emit one clean + one noisy copy of the subsampled window, each shuffled.
inline void emit_window_pair(const std::vector<std::pair<double, double>>& samples,
                             std::size_t start, std::size_t dil, std::size_t n,
                             double noise_sigma, double label, Rng& rng,
                             std::vector<LabeledWindow>& out) {
    for (int noisy = 0; noisy < 2; ++noisy) {
        std::vector<double> lam(n), m(n);
        for (std::size_t k = 0; k < n; ++k) {
            lam[k] = samples[start + k * dil].first;
            m[k] = samples[start + k * dil].second;
            if (noisy) m[k] += rng.normal(0.0, noise_sigma);
        }
        std::vector<std::size_t> perm = rng.permutation(n);
        Window w;
        w.values.resize(2 * n);
        for (std::size_t k = 0; k < n; ++k) {
            w.values[2 * k] = lam[perm[k]];
            w.values[2 * k + 1] = m[perm[k]];
        }
        out.push_back({std::move(w), label});
    }
}
}  // namespace detail

// Windows for one curve. stride == 0 selects dilation mode: for each dilation
// d, windows_per_dilation evenly spaced starts covering [cover_lo, cover_hi]
// in slip; otherwise classic stride windows over the whole sampling.
inline std::vector<LabeledWindow> make_windows(const std::vector<std::pair<double, double>>& samples,
                                               double label, const DatasetConfig& cfg, Rng& rng) {
    std::size_t n = cfg.n, np = samples.size();
    if (n < 2 || n > np) throw std::domain_error("bad window size");
    std::vector<LabeledWindow> out;
    if (cfg.stride > 0) {
        for (std::size_t s = 0; s + n <= np; s += cfg.stride)
            detail::emit_window_pair(samples, s, 1, n, cfg.noise_sigma, label, rng, out);
        return out;
    }
    for (std::size_t d : cfg.dilations) {
        std::size_t span = (n - 1) * d;
        std::size_t lo = static_cast<std::size_t>(cfg.cover_lo * static_cast<double>(np - 1));
        std::size_t hi_raw = static_cast<std::size_t>(cfg.cover_hi * static_cast<double>(np - 1));
        std::size_t hi;
        if (hi_raw >= span + lo && hi_raw - span >= lo) {
            hi = hi_raw - span;
        } else {
            lo = 0;
            if (span >= np) continue;
            hi = np - 1 - span;
        }
        std::size_t wpd = cfg.windows_per_dilation;
        std::vector<std::size_t> starts;
        for (std::size_t i = 0; i < wpd; ++i) {
            double f = wpd == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(wpd - 1);
            std::size_t s = lo + static_cast<std::size_t>(f * static_cast<double>(hi - lo));
            if (starts.empty() || s != starts.back()) starts.push_back(s);
        }
        for (std::size_t s : starts)
            detail::emit_window_pair(samples, s, d, n, cfg.noise_sigma, label, rng, out);
    }
    return out;
}

// Deterministic under cfg.seed: curve list from stream 0, one RNG stream per
// curve index (so generation order is parallelizable without changing bytes).
inline std::pair<DatasetManifest, std::vector<LabeledWindow>> build_dataset(const DatasetConfig& cfg) {
    std::vector<BurckhardtParams> curves =
        cfg.family == CurveFamily::Grid ? enumerate_curves(cfg.cube)
                                        : neighborhood_curves(cfg.per_ref, cfg.jitter, cfg.seed);
    std::vector<LabeledWindow> all;
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        auto samples = sample_curve(curves[ci], cfg.num_points);
        double label = optimal_point_closed_form(curves[ci]).lambda_star;
        Rng rng(cfg.seed, ci + 1);
        auto ws = make_windows(samples, label, cfg, rng);
        all.insert(all.end(), std::make_move_iterator(ws.begin()),
                   std::make_move_iterator(ws.end()));
    }
    DatasetManifest man;
    man.total_windows = all.size();
    man.config = cfg;
    return {man, std::move(all)};
}

// --- serialization ---

inline std::string manifest_header(const DatasetManifest& m) {
    const DatasetConfig& c = m.config;
    std::ostringstream os;
    os.precision(17);
    os << "format_version=" << m.format_version << " total_windows=" << m.total_windows
       << " n=" << c.n << " noise_sigma=" << c.noise_sigma << " seed=" << c.seed
       << " family=" << (c.family == CurveFamily::Grid ? "grid" : "neighborhood")
       << " cube=" << c.cube.b1_lo << ":" << c.cube.b1_hi << ":" << c.cube.n1 << ","
       << c.cube.b2_lo << ":" << c.cube.b2_hi << ":" << c.cube.n2 << ","
       << c.cube.b3_lo << ":" << c.cube.b3_hi << ":" << c.cube.n3
       << " per_ref=" << c.per_ref << " jitter=" << c.jitter
       << " num_points=" << c.num_points << " stride=" << c.stride << " dilations=";
    for (std::size_t i = 0; i < c.dilations.size(); ++i)
        os << (i ? "," : "") << c.dilations[i];
    os << " coverage=" << c.cover_lo << ":" << c.cover_hi
       << " windows_per_dilation=" << c.windows_per_dilation;
    return os.str();
}

inline std::map<std::string, std::string> parse_kv_line(const std::string& line) {
    std::map<std::string, std::string> kv;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::runtime_error("malformed header token: " + tok);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

inline void save_dataset(const std::string& path, const DatasetManifest& m,
                         const std::vector<LabeledWindow>& data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << "FCUBEDS1" << manifest_header(m) << "\n";
    std::vector<double> rec(2 * m.config.n + 1);
    for (const auto& lw : data) {
        if (lw.window.values.size() != 2 * m.config.n)
            throw std::runtime_error("window size mismatch on save");
        std::copy(lw.window.values.begin(), lw.window.values.end(), rec.begin());
        rec.back() = lw.lambda_star;
        f.write(reinterpret_cast<const char*>(rec.data()),
                static_cast<std::streamsize>(rec.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::pair<DatasetManifest, std::vector<LabeledWindow>> load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (f.gcount() != 8 || std::memcmp(magic, "FCUBEDS1", 8) != 0)
        throw std::runtime_error("bad magic: not a FCUBEDS1 dataset: " + path);
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("truncated header: " + path);
    auto kv = parse_kv_line(header);
    DatasetManifest m;
    m.format_version = std::stoi(kv.at("format_version"));
    if (m.format_version != 1)
        throw std::runtime_error("unsupported dataset format_version " + kv.at("format_version"));
    DatasetConfig& c = m.config;
    m.total_windows = std::stoull(kv.at("total_windows"));
    c.n = std::stoull(kv.at("n"));
    c.noise_sigma = std::stod(kv.at("noise_sigma"));
    c.seed = std::stoull(kv.at("seed"));
    c.family = kv.at("family") == "grid" ? CurveFamily::Grid : CurveFamily::Neighborhood;
    c.per_ref = std::stoull(kv.at("per_ref"));
    c.jitter = std::stod(kv.at("jitter"));
    c.num_points = std::stoull(kv.at("num_points"));
    c.stride = std::stoull(kv.at("stride"));
    {
        std::istringstream ds(kv.at("dilations"));
        std::string t;
        c.dilations.clear();
        while (std::getline(ds, t, ',')) c.dilations.push_back(std::stoull(t));
        std::istringstream cs(kv.at("coverage"));
        std::getline(cs, t, ':');
        c.cover_lo = std::stod(t);
        std::getline(cs, t, ':');
        c.cover_hi = std::stod(t);
        std::istringstream qs(kv.at("cube"));
        double* los[3] = {&c.cube.b1_lo, &c.cube.b2_lo, &c.cube.b3_lo};
        double* his[3] = {&c.cube.b1_hi, &c.cube.b2_hi, &c.cube.b3_hi};
        std::size_t* ns[3] = {&c.cube.n1, &c.cube.n2, &c.cube.n3};
        for (int i = 0; i < 3; ++i) {
            std::getline(qs, t, ':');
            *los[i] = std::stod(t);
            std::getline(qs, t, ':');
            *his[i] = std::stod(t);
            std::getline(qs, t, i < 2 ? ',' : ' ');
            *ns[i] = std::stoull(t);
        }
    }
    c.windows_per_dilation = std::stoull(kv.at("windows_per_dilation"));
    std::vector<LabeledWindow> data;
    data.reserve(m.total_windows);
    std::vector<double> rec(2 * c.n + 1);
    for (std::size_t i = 0; i < m.total_windows; ++i) {
        f.read(reinterpret_cast<char*>(rec.data()),
               static_cast<std::streamsize>(rec.size() * sizeof(double)));
        if (static_cast<std::size_t>(f.gcount()) != rec.size() * sizeof(double))
            throw std::runtime_error("truncated dataset at record " + std::to_string(i));
        LabeledWindow lw;
        lw.window.values.assign(rec.begin(), rec.end() - 1);
        lw.lambda_star = rec.back();
        data.push_back(std::move(lw));
    }
    return {m, std::move(data)};
}

inline void export_dataset_csv(const std::string& path, const DatasetManifest& m,
                               const std::vector<LabeledWindow>& data) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.precision(17);
    for (std::size_t k = 0; k < m.config.n; ++k)
        f << "lambda" << k << ",mu" << k << ",";
    f << "lambda_star\n";
    for (const auto& lw : data) {
        for (double v : lw.window.values) f << v << ",";
        f << lw.lambda_star << "\n";
    }
}

}  // namespace fricsim
