// fricsim: friction-curve dataset generation, dropout-MLP training, and
// braking-simulation experiments from one command line.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "../vendor/CLI11.hpp"
#include "fricsim/dataset.hpp"
#include "fricsim/friction.hpp"
#include "fricsim/harness.hpp"
#include "fricsim/net.hpp"
#include "fricsim/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitScenario = 5;

fricsim::BurckhardtParams parse_betas(const std::string& s) {
    std::istringstream is(s);
    std::string t;
    double b[3];
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(is, t, ',')) throw CLI::ValidationError("--betas needs b1,b2,b3");
        b[i] = std::stod(t);
    }
    return {b[0], b[1], b[2]};
}

struct HoldoutSplit {
    std::vector<fricsim::LabeledWindow> train;
    std::vector<const fricsim::LabeledWindow*> holdout_clean;
};

// Windows arrive as consecutive (clean, noisy) pairs; every 10th pair is held
// out, and the holdout metric uses the clean member only.
HoldoutSplit split_holdout(const std::vector<fricsim::LabeledWindow>& data) {
    HoldoutSplit s;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::size_t pair = i / 2;
        if (pair % 10 == 0) {
            if (i % 2 == 0) s.holdout_clean.push_back(&data[i]);
        } else {
            s.train.push_back(data[i]);
        }
    }
    return s;
}

double holdout_rmse(const fricsim::MlpModel& m,
                    const std::vector<const fricsim::LabeledWindow*>& hold) {
    double se = 0.0;
    for (const auto* lw : hold) {
        double e = fricsim::forward(m, lw->window.values) - lw->lambda_star;
        se += e * e;
    }
    return std::sqrt(se / static_cast<double>(hold.size()));
}

int cmd_oracle(const std::string& road, const std::string& betas) {
    fricsim::BurckhardtParams p = betas.empty() ? fricsim::road_by_name(road) : parse_betas(betas);
    auto op = fricsim::optimal_point_closed_form(p);
    std::printf("lambda_star=%.6f mu_star=%.6f\n", op.lambda_star, op.mu_star);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fricsim: slip-friction dataset generation, dropout-MLP training, and "
                 "uncertainty-aware braking simulation"};
    app.require_subcommand(1);

    // --- gen-dataset ---
    auto* gen = app.add_subcommand("gen-dataset", "Generate a synthetic friction-cube dataset");
    fricsim::DatasetConfig dcfg;
    std::string gen_out, gen_csv, family = "neighborhood", coverage, dilations, cube_spec;
    gen->add_option("--out", gen_out, "Output dataset file")->required();
    gen->add_option("--family", family, "Curve family: neighborhood|grid")
        ->check(CLI::IsMember({"neighborhood", "grid"}));
    gen->add_option("--per-ref", dcfg.per_ref, "Jittered curves per reference road");
    gen->add_option("--jitter", dcfg.jitter, "Multiplicative jitter fraction");
    gen->add_option("--cube", cube_spec, "Grid cube: b1lo:b1hi:n1,b2lo:b2hi:n2,b3lo:b3hi:n3");
    gen->add_option("--n", dcfg.n, "Window size")->check(CLI::Range(std::size_t{2}, std::size_t{10000}));
    gen->add_option("--num-points", dcfg.num_points, "Curve sample count");
    gen->add_option("--noise-sigma", dcfg.noise_sigma, "AWGN std on mu");
    gen->add_option("--stride", dcfg.stride, "Nonzero: stride windows instead of dilations");
    gen->add_option("--dilations", dilations, "Comma-separated sample dilations");
    gen->add_option("--coverage", coverage, "Window-start slip coverage lo:hi");
    gen->add_option("--windows-per-dilation", dcfg.windows_per_dilation, "Starts per dilation");
    gen->add_option("--seed", dcfg.seed, "RNG seed");
    gen->add_option("--csv", gen_csv, "Also export CSV for inspection");

    // --- train ---
    auto* tr = app.add_subcommand("train", "Train the dropout MLP on a dataset");
    fricsim::TrainConfig tcfg;
    std::string tr_data, tr_out, tr_losslog, placement = "both";
    double dropout_p = 0.2;
    tr->add_option("--dataset", tr_data, "Input dataset file")->required();
    tr->add_option("--out", tr_out, "Output model file")->required();
    tr->add_option("--epochs", tcfg.epochs, "Training epochs");
    tr->add_option("--lr", tcfg.learning_rate, "Learning rate");
    tr->add_option("--weight-decay", tcfg.weight_decay, "L2 coefficient");
    tr->add_option("--batch-size", tcfg.batch_size, "SGD batch size");
    tr->add_option("--seed", tcfg.seed, "Init/shuffle/mask seed");
    tr->add_option("--dropout", dropout_p, "Dropout probability");
    tr->add_option("--dropout-placement", placement, "both|first (hidden layers with dropout)")
        ->check(CLI::IsMember({"both", "first"}));
    tr->add_option("--loss-log", tr_losslog, "Per-epoch loss CSV path");

    // --- eval ---
    auto* ev = app.add_subcommand("eval", "Evaluate a model on a dataset's holdout split");
    std::string ev_model, ev_data;
    fricsim::UncertaintyConfig ucfg;
    ev->add_option("--model", ev_model, "Model file")->required();
    ev->add_option("--dataset", ev_data, "Dataset file")->required();
    ev->add_option("--s-forwards", ucfg.s_forwards, "MC forwards per prediction");
    ev->add_option("--sigma-obs", ucfg.sigma_obs, "Observation-noise std");
    ev->add_option("--seed", ucfg.seed, "MC seed");

    // --- simulate ---
    auto* sim = app.add_subcommand("simulate", "Run a scenario file");
    std::string sim_scn, sim_model, sim_out, sim_metrics;
    sim->add_option("--scenario", sim_scn, "Scenario file")->required();
    sim->add_option("--model", sim_model, "Model file (overrides scenario)");
    sim->add_option("--out", sim_out, "Trace CSV path")->required();
    sim->add_option("--metrics", sim_metrics, "Metrics report path (default <out>.metrics)");

    // --- oracle ---
    auto* orc = app.add_subcommand("oracle", "Print optimal slip/friction for a road");
    std::string orc_road, orc_betas;
    orc->add_option("--road", orc_road, "dry|wet|snow");
    orc->add_option("--betas", orc_betas, "Custom b1,b2,b3");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) {
            if (family == "grid") dcfg.family = fricsim::CurveFamily::Grid;
            if (!cube_spec.empty()) {
                std::istringstream is(cube_spec);
                std::string axis;
                double* lo[3] = {&dcfg.cube.b1_lo, &dcfg.cube.b2_lo, &dcfg.cube.b3_lo};
                double* hi[3] = {&dcfg.cube.b1_hi, &dcfg.cube.b2_hi, &dcfg.cube.b3_hi};
                std::size_t* cnt[3] = {&dcfg.cube.n1, &dcfg.cube.n2, &dcfg.cube.n3};
                for (int i = 0; i < 3; ++i) {
                    if (!std::getline(is, axis, ','))
                        throw std::domain_error("--cube needs three lo:hi:n axes");
                    std::istringstream as(axis);
                    std::string t;
                    std::getline(as, t, ':'); *lo[i] = std::stod(t);
                    std::getline(as, t, ':'); *hi[i] = std::stod(t);
                    std::getline(as, t, ':'); *cnt[i] = std::stoull(t);
                }
            }
            if (!dilations.empty()) {
                dcfg.dilations.clear();
                std::istringstream is(dilations);
                std::string t;
                while (std::getline(is, t, ',')) dcfg.dilations.push_back(std::stoull(t));
            }
            if (!coverage.empty()) {
                std::istringstream is(coverage);
                std::string t;
                std::getline(is, t, ':'); dcfg.cover_lo = std::stod(t);
                std::getline(is, t, ':'); dcfg.cover_hi = std::stod(t);
            }
            auto [man, data] = fricsim::build_dataset(dcfg);
            fricsim::save_dataset(gen_out, man, data);
            if (!gen_csv.empty()) fricsim::export_dataset_csv(gen_csv, man, data);
            std::cout << fricsim::manifest_header(man) << "\n";
            return kExitOk;
        }

        if (*tr) {
            auto [man, data] = fricsim::load_dataset(tr_data);
            HoldoutSplit split = split_holdout(data);
            std::cerr << "training on " << split.train.size() << " windows, holdout "
                      << split.holdout_clean.size() << " clean windows\n";
            auto placement_v = placement == "first" ? fricsim::DropoutPlacement::FirstHiddenOnly
                                                    : fricsim::DropoutPlacement::BothHidden;
            fricsim::TrainResult result;
            try {
                result = fricsim::train(split.train, tcfg, dropout_p, placement_v);
            } catch (const fricsim::DivergenceError& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitDivergence;
            }
            fricsim::save_model(tr_out, result.model);
            if (!tr_losslog.empty()) {
                std::ofstream f(tr_losslog);
                if (!f) throw std::runtime_error("cannot open for write: " + tr_losslog);
                f.precision(17);
                f << "epoch,loss\n";
                for (std::size_t i = 0; i < result.loss_history.size(); ++i)
                    f << i + 1 << "," << result.loss_history[i] << "\n";
            }
            double rmse = holdout_rmse(result.model, split.holdout_clean);
            std::printf("holdout_rmse=%.6f final_epoch_loss=%.8f\n", rmse,
                        result.loss_history.empty() ? std::nan("") : result.loss_history.back());
            return kExitOk;
        }

        if (*ev) {
            fricsim::MlpModel model = fricsim::load_model(ev_model);
            auto [man, data] = fricsim::load_dataset(ev_data);
            HoldoutSplit split = split_holdout(data);
            if (model.dims[0] != 2 * man.config.n)
                throw std::domain_error("model input dim does not match dataset window size");
            double rmse = holdout_rmse(model, split.holdout_clean);
            // calibration: fraction of |error| <= k*std for k = 1,2,3
            std::size_t within[3] = {0, 0, 0};
            std::map<std::string, std::pair<double, std::size_t>> per_road;
            for (std::size_t i = 0; i < split.holdout_clean.size(); ++i) {
                const auto* lw = split.holdout_clean[i];
                fricsim::UncertaintyConfig u = ucfg;
                u.seed = fricsim::derive_seed(ucfg.seed, i);
                auto p = fricsim::predict_with_uncertainty(model, lw->window.values, u);
                double err = std::abs(p.mean - lw->lambda_star);
                for (int k = 1; k <= 3; ++k)
                    if (err <= k * p.std) ++within[k - 1];
                // nearest reference road by label
                const char* names[3] = {"dry", "wet", "snow"};
                const fricsim::BurckhardtParams refs[3] = {fricsim::kDry, fricsim::kWet,
                                                           fricsim::kSnow};
                int best = 0;
                double bd = 1e9;
                for (int k = 0; k < 3; ++k) {
                    double d = std::abs(fricsim::optimal_point_closed_form(refs[k]).lambda_star -
                                        lw->lambda_star);
                    if (d < bd) { bd = d; best = k; }
                }
                double e2 = fricsim::forward(model, lw->window.values) - lw->lambda_star;
                auto& acc = per_road[names[best]];
                acc.first += e2 * e2;
                acc.second += 1;
            }
            double nh = static_cast<double>(split.holdout_clean.size());
            std::printf("holdout_rmse=%.6f\n", rmse);
            for (int k = 1; k <= 3; ++k)
                std::printf("calibration_within_%dstd=%.4f\n", k,
                            static_cast<double>(within[k - 1]) / nh);
            for (const auto& [name, acc] : per_road)
                std::printf("rmse_near_%s=%.6f (n=%zu)\n", name.c_str(),
                            std::sqrt(acc.first / static_cast<double>(acc.second)), acc.second);
            return kExitOk;
        }

        if (*sim) {
            fricsim::Scenario sc;
            try {
                sc = fricsim::load_scenario(sim_scn);
            } catch (const fricsim::ScenarioError& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitScenario;
            }
            std::string model_path = !sim_model.empty() ? sim_model : sc.model_path;
            if (model_path.empty())
                throw std::domain_error("no model: pass --model or set [estimator] model");
            fricsim::MlpModel model = fricsim::load_model(model_path);
            fricsim::ExperimentResult res = fricsim::run_scenario(sc, model);
            fricsim::write_trace_csv(sim_out, res.trace);
            std::string mpath = sim_metrics.empty() ? sim_out + ".metrics" : sim_metrics;
            fricsim::write_metrics_report(mpath, res.metrics);
            for (const auto& [k, v] : res.metrics) std::printf("%s=%.8g\n", k.c_str(), v);
            return kExitOk;
        }

        if (*orc) {
            if (orc_road.empty() == orc_betas.empty())
                throw std::domain_error("oracle needs exactly one of --road/--betas");
            return cmd_oracle(orc_road, orc_betas);
        }
    } catch (const fricsim::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const fricsim::ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitScenario;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitUsage;
}
