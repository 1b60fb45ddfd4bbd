#pragma once
// From-scratch dropout MLP: f64 forward/backward, SGD with weight decay,
// MC-dropout prediction.
//
// Model file (MLPDROP1): magic bytes "MLPDROP1", one text header line
// "dims=... p=... seed=... format_version=1" terminated by '\n', then all
// parameters as little-endian f64 in layer order (W row-major, then b).

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

namespace fricsim {

enum class DropoutPlacement { BothHidden, FirstHiddenOnly };

struct MlpModel {
    std::vector<std::size_t> dims;          // e.g. {30, 30, 30, 1}
    std::vector<std::vector<double>> W;     // W[l]: dims[l+1] x dims[l], row-major
    std::vector<std::vector<double>> b;     // b[l]: dims[l+1]
    double dropout_p = 0.2;
    DropoutPlacement placement = DropoutPlacement::BothHidden;
    std::uint64_t init_seed = 0;

    std::size_t layers() const { return W.size(); }

    // dropout applies after hidden layer l's activation?
    bool dropped_layer(std::size_t l) const {
        if (l + 1 >= layers()) return false;  // never after the path into the output
        if (placement == DropoutPlacement::FirstHiddenOnly) return l == 0;
        return true;
    }
};

// Uniform fan-in init: W ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), b = 0.
inline MlpModel make_model(const std::vector<std::size_t>& dims, double dropout_p,
                           std::uint64_t seed,
                           DropoutPlacement placement = DropoutPlacement::BothHidden) {
    if (dims.size() < 2) throw std::domain_error("need at least input and output dims");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::domain_error("dropout_p out of [0,1)");
    MlpModel m;
    m.dims = dims;
    m.dropout_p = dropout_p;
    m.placement = placement;
    m.init_seed = seed;
    Rng rng(seed, /*stream=*/1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        std::vector<double> W(dims[l + 1] * dims[l]);
        for (double& w : W) w = rng.uniform(-bound, bound);
        m.W.push_back(std::move(W));
        m.b.push_back(std::vector<double>(dims[l + 1], 0.0));
    }
    return m;
}

// One inverted-dropout mask per dropped hidden layer: keep w.p. 1-p, scale
// kept units by 1/(1-p). Deterministic inference uses empty masks.
using DropoutMasks = std::vector<std::vector<double>>;

inline DropoutMasks sample_masks(const MlpModel& m, Rng& rng) {
    DropoutMasks masks(m.layers());
    for (std::size_t l = 0; l + 1 < m.layers(); ++l) {
        masks[l].assign(m.dims[l + 1], 1.0);
        if (m.dropped_layer(l) && m.dropout_p > 0.0) {
            double keep = 1.0 - m.dropout_p;
            for (double& v : masks[l]) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
        }
    }
    return masks;
}

namespace detail {
struct ForwardTrace {
    std::vector<std::vector<double>> pre;    // pre-activations per layer
    std::vector<std::vector<double>> act;    // post-activation (post-mask) per layer; act[0] = input
};

inline double forward_trace(const MlpModel& m, const std::vector<double>& x,
                            const DropoutMasks* masks, ForwardTrace* tr) {
    if (x.size() != m.dims[0]) throw std::domain_error("input dimension mismatch");
    std::vector<double> a = x;
    if (tr) { tr->pre.clear(); tr->act.clear(); tr->act.push_back(a); }
    for (std::size_t l = 0; l < m.layers(); ++l) {
        std::size_t out = m.dims[l + 1], in = m.dims[l];
        std::vector<double> z(out);
        for (std::size_t i = 0; i < out; ++i) {
            double s = m.b[l][i];
            const double* row = &m.W[l][i * in];
            for (std::size_t j = 0; j < in; ++j) s += row[j] * a[j];
            z[i] = s;
        }
        if (tr) tr->pre.push_back(z);
        if (l + 1 < m.layers()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;  // ReLU
            if (masks && !(*masks)[l].empty())
                for (std::size_t i = 0; i < out; ++i) z[i] *= (*masks)[l][i];
        }
        a = std::move(z);
        if (tr) tr->act.push_back(a);
    }
    return a[0];
}
}  // namespace detail

inline double forward(const MlpModel& m, const std::vector<double>& x) {
    return detail::forward_trace(m, x, nullptr, nullptr);
}

inline double forward_stochastic(const MlpModel& m, const std::vector<double>& x, Rng& rng) {
    DropoutMasks masks = sample_masks(m, rng);
    return detail::forward_trace(m, x, &masks, nullptr);
}

inline double forward_masked(const MlpModel& m, const std::vector<double>& x,
                             const DropoutMasks& masks) {
    return detail::forward_trace(m, x, &masks, nullptr);
}

struct Gradient {
    std::vector<std::vector<double>> W, b;
};

inline Gradient zero_gradient(const MlpModel& m) {
    Gradient g;
    for (std::size_t l = 0; l < m.layers(); ++l) {
        g.W.push_back(std::vector<double>(m.W[l].size(), 0.0));
        g.b.push_back(std::vector<double>(m.b[l].size(), 0.0));
    }
    return g;
}

inline double sum_squared_params(const MlpModel& m) {
    double s = 0.0;
    for (const auto& W : m.W) for (double w : W) s += w * w;
    for (const auto& b : m.b) for (double v : b) s += v * v;
    return s;
}

// loss = MSE over the batch + weight_decay * sum of squared parameters,
// under the given per-sample masks (one mask set per sample; empty = none).
inline double loss(const MlpModel& m, const std::vector<const LabeledWindow*>& batch,
                   double weight_decay, const std::vector<DropoutMasks>* masks = nullptr) {
    if (batch.empty()) throw std::domain_error("empty batch");
    double mse = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        double y = masks ? forward_masked(m, batch[i]->window.values, (*masks)[i])
                         : forward(m, batch[i]->window.values);
        double e = y - batch[i]->lambda_star;
        mse += e * e;
    }
    mse /= static_cast<double>(batch.size());
    return mse + weight_decay * sum_squared_params(m);
}

// Gradient of `loss` w.r.t. every parameter, masks held fixed. Optionally
// reports the batch loss from the same forward passes.
inline Gradient backward(const MlpModel& m, const std::vector<const LabeledWindow*>& batch,
                         double weight_decay, const std::vector<DropoutMasks>& masks,
                         double* out_loss = nullptr) {
    if (batch.empty()) throw std::domain_error("empty batch");
    Gradient g = zero_gradient(m);
    double inv_n = 1.0 / static_cast<double>(batch.size());
    double sq_err = 0.0;
    detail::ForwardTrace tr;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        double y = detail::forward_trace(m, batch[s]->window.values, &masks[s], &tr);
        sq_err += (y - batch[s]->lambda_star) * (y - batch[s]->lambda_star);
        // d(mean squared error)/dy
        std::vector<double> delta{2.0 * (y - batch[s]->lambda_star) * inv_n};
        for (std::size_t l = m.layers(); l-- > 0;) {
            std::size_t out = m.dims[l + 1], in = m.dims[l];
            const std::vector<double>& a_in = tr.act[l];
            for (std::size_t i = 0; i < out; ++i) {
                g.b[l][i] += delta[i];
                double* grow = &g.W[l][i * in];
                for (std::size_t j = 0; j < in; ++j) grow[j] += delta[i] * a_in[j];
            }
            if (l == 0) break;
            std::vector<double> prev(in, 0.0);
            for (std::size_t i = 0; i < out; ++i) {
                const double* row = &m.W[l][i * in];
                for (std::size_t j = 0; j < in; ++j) prev[j] += row[j] * delta[i];
            }
            // back through the previous layer's mask and ReLU
            for (std::size_t j = 0; j < in; ++j) {
                if (!masks[s][l - 1].empty()) prev[j] *= masks[s][l - 1][j];
                if (tr.pre[l - 1][j] <= 0.0) prev[j] = 0.0;
            }
            delta = std::move(prev);
        }
    }
    for (std::size_t l = 0; l < m.layers(); ++l) {
        for (std::size_t i = 0; i < g.W[l].size(); ++i) g.W[l][i] += 2.0 * weight_decay * m.W[l][i];
        for (std::size_t i = 0; i < g.b[l].size(); ++i) g.b[l][i] += 2.0 * weight_decay * m.b[l][i];
    }
    if (out_loss) *out_loss = sq_err * inv_n + weight_decay * sum_squared_params(m);
    return g;
}

struct TrainConfig {
    std::size_t epochs = 100;
    double learning_rate = 0.001;
    double weight_decay = 0.0001;
    std::size_t batch_size = 8;
    std::uint64_t seed = 9;
};

struct DivergenceError : std::runtime_error {
    std::size_t epoch, batch;
    DivergenceError(std::size_t e, std::size_t bidx)
        : std::runtime_error("training diverged (NaN loss) at epoch " + std::to_string(e) +
                             ", batch " + std::to_string(bidx)),
          epoch(e), batch(bidx) {}
};

struct TrainResult {
    MlpModel model;
    std::vector<double> loss_history;  // epoch-averaged training loss (data term + decay)
};

// Plain SGD. Shuffle order and dropout masks flow from one RNG, so a fixed
// seed reproduces the final weights bit-exactly.
inline TrainResult train(const std::vector<LabeledWindow>& data, const TrainConfig& cfg,
                         double dropout_p = 0.2,
                         DropoutPlacement placement = DropoutPlacement::BothHidden) {
    if (data.empty()) throw std::domain_error("empty training set");
    std::size_t in_dim = data[0].window.values.size();
    MlpModel m = make_model({in_dim, 30, 30, 1}, dropout_p, cfg.seed, placement);
    Rng rng(cfg.seed, /*stream=*/2);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> history;
    for (std::size_t ep = 0; ep < cfg.epochs; ++ep) {
        rng.shuffle(order);
        double ep_loss = 0.0;
        std::size_t nb = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size, ++nb) {
            std::size_t bs = std::min(cfg.batch_size, order.size() - at);
            std::vector<const LabeledWindow*> batch(bs);
            std::vector<DropoutMasks> masks(bs);
            for (std::size_t k = 0; k < bs; ++k) {
                batch[k] = &data[order[at + k]];
                masks[k] = sample_masks(m, rng);
            }
            double l = 0.0;
            Gradient g = backward(m, batch, cfg.weight_decay, masks, &l);
            if (!std::isfinite(l)) throw DivergenceError(ep, nb);
            ep_loss += l;
            for (std::size_t li = 0; li < m.layers(); ++li) {
                for (std::size_t i = 0; i < m.W[li].size(); ++i)
                    m.W[li][i] -= cfg.learning_rate * g.W[li][i];
                for (std::size_t i = 0; i < m.b[li].size(); ++i)
                    m.b[li][i] -= cfg.learning_rate * g.b[li][i];
            }
        }
        history.push_back(ep_loss / static_cast<double>(nb));
    }
    return {std::move(m), std::move(history)};
}

struct UncertaintyConfig {
    std::size_t s_forwards = 500;
    double sigma_obs = 0.017;
    std::uint64_t seed = 0;
};

struct Prediction {
    double mean;
    double variance;
    double std;
    double normalized_uncertainty;  // std/mean; NaN if mean below epsilon
    std::size_t s_forwards;
};

// MC dropout: mean = (1/S) sum f_s; variance = sigma_obs^2 + (1/S) sum f_s^2 - mean^2.
inline Prediction predict_with_uncertainty(const MlpModel& m, const std::vector<double>& x,
                                           const UncertaintyConfig& cfg) {
    if (cfg.s_forwards < 2) throw std::domain_error("s_forwards must be >= 2");
    Rng rng(cfg.seed, /*stream=*/3);
    std::vector<double> ys(cfg.s_forwards);
    double sum = 0.0;
    for (double& y : ys) {
        y = forward_stochastic(m, x, rng);
        sum += y;
    }
    double S = static_cast<double>(cfg.s_forwards);
    double mean = sum / S;
    // Two-pass variance: exact zero when every forward agrees (p = 0).
    double mc = 0.0;
    for (double y : ys) mc += (y - mean) * (y - mean);
    mc /= S;
    Prediction p;
    p.mean = mean;
    p.variance = cfg.sigma_obs * cfg.sigma_obs + mc;
    p.std = std::sqrt(p.variance);
    p.normalized_uncertainty = mean > 1e-9 ? p.std / mean : std::nan("");
    p.s_forwards = cfg.s_forwards;
    return p;
}

// --- serialization ---

inline void save_model(const std::string& path, const MlpModel& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    std::ostringstream hdr;
    hdr.precision(17);
    hdr << "dims=";
    for (std::size_t i = 0; i < m.dims.size(); ++i) hdr << (i ? "," : "") << m.dims[i];
    hdr << " p=" << m.dropout_p << " seed=" << m.init_seed << " format_version=1";
    f << "MLPDROP1" << hdr.str() << "\n";
    for (std::size_t l = 0; l < m.layers(); ++l) {
        f.write(reinterpret_cast<const char*>(m.W[l].data()),
                static_cast<std::streamsize>(m.W[l].size() * sizeof(double)));
        f.write(reinterpret_cast<const char*>(m.b[l].data()),
                static_cast<std::streamsize>(m.b[l].size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline MlpModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (f.gcount() != 8 || std::memcmp(magic, "MLPDROP1", 8) != 0)
        throw std::runtime_error("bad magic: not a MLPDROP1 model: " + path);
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("truncated model header: " + path);
    auto kv = parse_kv_line(header);
    if (std::stoi(kv.at("format_version")) != 1)
        throw std::runtime_error("unsupported model format_version " + kv.at("format_version"));
    MlpModel m;
    {
        std::istringstream ds(kv.at("dims"));
        std::string t;
        while (std::getline(ds, t, ',')) m.dims.push_back(std::stoull(t));
    }
    if (m.dims.size() < 2) throw std::runtime_error("model dims invalid");
    m.dropout_p = std::stod(kv.at("p"));
    m.init_seed = std::stoull(kv.at("seed"));
    for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
        std::vector<double> W(m.dims[l + 1] * m.dims[l]);
        std::vector<double> b(m.dims[l + 1]);
        f.read(reinterpret_cast<char*>(W.data()),
               static_cast<std::streamsize>(W.size() * sizeof(double)));
        f.read(reinterpret_cast<char*>(b.data()),
               static_cast<std::streamsize>(b.size() * sizeof(double)));
        if (!f) throw std::runtime_error("truncated model parameters in layer " + std::to_string(l));
        m.W.push_back(std::move(W));
        m.b.push_back(std::move(b));
    }
    return m;
}

}  // namespace fricsim
