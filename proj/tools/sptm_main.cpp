// Command-line front end for the CSI feedback pipeline:
// generate -> augment -> train -> eval, plus CR sweeps and encoder FLOP
// accounting. All randomness flows from --seed; artifacts embed the
// config fingerprint so runs can be reproduced.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "sptm/augment.hpp"
#include "sptm/channel.hpp"
#include "sptm/codec.hpp"
#include "sptm/eval.hpp"
#include "sptm/training.hpp"

using nlohmann::json;

namespace {

struct RunConfig {
    std::string profile = "desk";
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    bool deterministic = false;  // single-threaded reductions (always on in this build)

    sptm::ChannelScenarioConfig scenario;
    sptm::AugmentPolicy augment;
    sptm::TrainConfig train;
    std::vector<double> crs{0.25};
    int n_generate = 1000;
    int n_test = 1000;

    json to_json() const;
};

void apply_profile(RunConfig& cfg) {
    if (cfg.profile == "paper") {
        cfg.scenario.n_subcarriers = 1024;
        cfg.train.n_iter = 9;
        cfg.train.channels = 32;
    } else if (cfg.profile == "desk") {
        cfg.scenario.n_subcarriers = 256;
        cfg.train.n_iter = 3;
        cfg.train.channels = 8;
    } else {
        throw CLI::ValidationError("--profile must be 'paper' or 'desk'");
    }
}

json RunConfig::to_json() const {
    json j;
    j["profile"] = profile;
    j["seed"] = seed;
    j["out"] = out_dir;
    j["deterministic"] = deterministic;
    j["scenario"] = {
        {"n_antennas", scenario.n_antennas},
        {"n_subcarriers", scenario.n_subcarriers},
        {"bandwidth_hz", scenario.bandwidth_hz},
        {"n_paths_min", scenario.n_paths_min},
        {"n_paths_max", scenario.n_paths_max},
        {"delay_spread_max_s", scenario.delay_spread_max_s},
        {"angle_range_rad", scenario.angle_range_rad},
        {"path_loss_spread_db", scenario.path_loss_spread_db},
        {"r_delay", scenario.r_delay},
    };
    j["augment"] = {
        {"delay_shift_min", augment.delay_shift_min},
        {"delay_shift_max", augment.delay_shift_max},
        {"angular_shift_min", augment.angular_shift_min},
        {"angular_shift_max", augment.angular_shift_max},
        {"use_ads", augment.use_ads},
        {"use_pr", augment.use_pr},
        {"target_size", augment.target_size},
    };
    j["train"] = {
        {"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"learning_rate", train.learning_rate},
        {"gamma", train.gamma},
        {"cr", train.cr},
        {"n_iter", train.n_iter},
        {"channels", train.channels},
        {"spherical", train.spherical},
        {"phi_trainable", train.phi_mode == sptm::MeasurementMode::Trainable},
        {"val_fraction", train.val_fraction},
    };
    j["eval"] = {{"crs", crs}, {"n_generate", n_generate}, {"n_test", n_test}};
    return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    json j = json::parse(is);
    maybe(j, "profile", cfg.profile);
    apply_profile(cfg);
    maybe(j, "seed", cfg.seed);
    maybe(j, "out", cfg.out_dir);
    maybe(j, "deterministic", cfg.deterministic);
    if (j.contains("scenario")) {
        const json& s = j["scenario"];
        maybe(s, "n_antennas", cfg.scenario.n_antennas);
        maybe(s, "n_subcarriers", cfg.scenario.n_subcarriers);
        maybe(s, "bandwidth_hz", cfg.scenario.bandwidth_hz);
        maybe(s, "n_paths_min", cfg.scenario.n_paths_min);
        maybe(s, "n_paths_max", cfg.scenario.n_paths_max);
        maybe(s, "delay_spread_max_s", cfg.scenario.delay_spread_max_s);
        maybe(s, "angle_range_rad", cfg.scenario.angle_range_rad);
        maybe(s, "path_loss_spread_db", cfg.scenario.path_loss_spread_db);
        maybe(s, "r_delay", cfg.scenario.r_delay);
    }
    if (j.contains("augment")) {
        const json& a = j["augment"];
        maybe(a, "delay_shift_min", cfg.augment.delay_shift_min);
        maybe(a, "delay_shift_max", cfg.augment.delay_shift_max);
        maybe(a, "angular_shift_min", cfg.augment.angular_shift_min);
        maybe(a, "angular_shift_max", cfg.augment.angular_shift_max);
        maybe(a, "use_ads", cfg.augment.use_ads);
        maybe(a, "use_pr", cfg.augment.use_pr);
        std::int64_t ts = cfg.augment.target_size;
        maybe(a, "target_size", ts);
        cfg.augment.target_size = ts;
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        maybe(t, "epochs", cfg.train.epochs);
        maybe(t, "batch_size", cfg.train.batch_size);
        maybe(t, "learning_rate", cfg.train.learning_rate);
        maybe(t, "gamma", cfg.train.gamma);
        maybe(t, "cr", cfg.train.cr);
        maybe(t, "n_iter", cfg.train.n_iter);
        maybe(t, "channels", cfg.train.channels);
        maybe(t, "spherical", cfg.train.spherical);
        bool trainable = cfg.train.phi_mode == sptm::MeasurementMode::Trainable;
        maybe(t, "phi_trainable", trainable);
        cfg.train.phi_mode = trainable ? sptm::MeasurementMode::Trainable
                                       : sptm::MeasurementMode::FixedRandomGaussian;
        maybe(t, "val_fraction", cfg.train.val_fraction);
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        maybe(e, "crs", cfg.crs);
        maybe(e, "n_generate", cfg.n_generate);
        maybe(e, "n_test", cfg.n_test);
    }
}

/// FNV-1a over the canonical config dump.
std::string fingerprint(const RunConfig& cfg) {
    std::string s = cfg.to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void sync_seeds(RunConfig& cfg) {
    cfg.scenario.rng_seed = cfg.seed;
    cfg.augment.rng_seed = cfg.seed;
    cfg.train.seed = cfg.seed;
}

sptm::AugStrategy parse_strategy(const std::string& s) {
    if (s == "none") return sptm::AugStrategy::None;
    if (s == "ads") return sptm::AugStrategy::Ads;
    if (s == "pr") return sptm::AugStrategy::Pr;
    if (s == "ads_pr") return sptm::AugStrategy::AdsPr;
    throw CLI::ValidationError("--strategy must be one of none|ads|pr|ads_pr");
}

double power_spread_db(const sptm::Dataset& ds) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& s : ds.samples) {
        double p = s.squaredNorm();
        if (first) {
            lo = hi = p;
            first = false;
        } else {
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
    }
    return first || lo <= 0.0 ? 0.0 : 10.0 * std::log10(hi / lo);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SPTM2-ISTANet+ CSI feedback pipeline"};
    app.require_subcommand(1);

    RunConfig cfg;
    // environment defaults, overridden by flags
    if (const char* e = std::getenv("SPTM_SEED")) cfg.seed = std::strtoull(e, nullptr, 10);
    if (const char* e = std::getenv("SPTM_PROFILE")) cfg.profile = e;
    if (const char* e = std::getenv("SPTM_OUT")) cfg.out_dir = e;
    apply_profile(cfg);

    std::string config_path, in_path, out_path, model_path, test_path, strategy = "ads_pr";
    std::string train_path;
    std::int64_t target_size = 0;
    int n_samples = -1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", cfg.seed, "master RNG seed");
        sub->add_option("--profile", cfg.profile, "paper|desk");
        sub->add_option("--cr", cfg.train.cr, "compression ratio M/N");
        sub->add_flag("--deterministic", cfg.deterministic,
                      "force single-threaded reductions (this build is always single-threaded)");
        sub->add_option("--out", out_path, "output path");
    };

    CLI::App* c_generate = app.add_subcommand("generate", "generate a synthetic CSI dataset");
    add_common(c_generate);
    c_generate->add_option("--n", n_samples, "number of samples");

    CLI::App* c_augment = app.add_subcommand("augment", "expand a dataset with ADS/PR augmentation");
    add_common(c_augment);
    c_augment->add_option("--in", in_path, "input dataset")->required();
    c_augment->add_option("--strategy", strategy, "none|ads|pr|ads_pr");
    c_augment->add_option("--target", target_size, "target dataset size");

    CLI::App* c_train = app.add_subcommand("train", "train the unfolding codec");
    add_common(c_train);
    c_train->add_option("--in", in_path, "training dataset")->required();
    c_train->add_option("--epochs", cfg.train.epochs, "training epochs");
    c_train->add_option("--batch", cfg.train.batch_size, "batch size");
    c_train->add_option("--lr", cfg.train.learning_rate, "learning rate");

    CLI::App* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a test dataset");
    add_common(c_eval);
    c_eval->add_option("--model", model_path, "checkpoint file")->required();
    c_eval->add_option("--test", test_path, "test dataset")->required();

    CLI::App* c_sweep = app.add_subcommand("sweep", "train + evaluate across compression ratios");
    add_common(c_sweep);
    c_sweep->add_option("--train", train_path, "training dataset")->required();
    c_sweep->add_option("--test", test_path, "test dataset")->required();
    std::string crs_arg;
    c_sweep->add_option("--crs", crs_arg, "comma-separated CR list, e.g. 0.25,0.125");

    CLI::App* c_flops = app.add_subcommand("flops", "encoder FLOP table");
    add_common(c_flops);
    int flops_n = 2048;
    c_flops->add_option("--n", flops_n, "vector length N");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) load_config_file(cfg, config_path);
        apply_profile(cfg);
        // re-apply flag overrides that profile/config may have clobbered
        for (CLI::App* sub : {c_generate, c_augment, c_train, c_eval, c_sweep, c_flops}) {
            if (sub->parsed()) {
                if (sub->count("--seed")) cfg.seed = sub->get_option("--seed")->as<std::uint64_t>();
                if (sub->count("--cr")) cfg.train.cr = sub->get_option("--cr")->as<double>();
            }
        }
        sync_seeds(cfg);
        std::string fp = fingerprint(cfg);

        if (c_generate->parsed()) {
            if (n_samples < 0) n_samples = cfg.n_generate;
            if (out_path.empty()) out_path = cfg.out_dir + "/dataset.csid";
            sptm::Dataset ds = sptm::generate_dataset(cfg.scenario, n_samples);
            sptm::save_dataset(ds, out_path);
            std::cout << "wrote " << out_path << ": " << ds.size() << " samples, dims "
                      << ds.r_delay << "x" << ds.n_antennas << ", power spread "
                      << power_spread_db(ds) << " dB, seed " << cfg.seed
                      << ", fingerprint " << fp << "\n";
        } else if (c_augment->parsed()) {
            if (out_path.empty()) out_path = cfg.out_dir + "/augmented.csid";
            sptm::Dataset in = sptm::load_dataset(in_path);
            sptm::AugStrategy strat = parse_strategy(strategy);
            sptm::AugmentPolicy policy = cfg.augment;
            policy.use_ads = strat == sptm::AugStrategy::Ads || strat == sptm::AugStrategy::AdsPr;
            policy.use_pr = strat == sptm::AugStrategy::Pr || strat == sptm::AugStrategy::AdsPr;
            policy.target_size = target_size > 0 ? target_size
                                 : (cfg.augment.target_size > 0 ? cfg.augment.target_size
                                                                : static_cast<std::int64_t>(in.size()));
            sptm::Dataset out = sptm::build_augmented_dataset(in, policy);
            sptm::save_dataset(out, out_path);
            std::cout << "wrote " << out_path << ": " << out.size() << " samples ("
                      << in.size() << " measured), strategy " << sptm::to_string(strat)
                      << ", fingerprint " << fp << "\n";
        } else if (c_train->parsed()) {
            if (out_path.empty()) out_path = cfg.out_dir + "/checkpoint.sptm";
            sptm::Dataset ds = sptm::load_dataset(in_path);
            sptm::TrainConfig tc = cfg.train;
            tc.checkpoint_path = out_path;
            if (tc.checkpoint_every == 0) tc.checkpoint_every = 10;
            std::ofstream log(out_path + ".log");
            log << "# fingerprint " << fp << " seed " << cfg.seed << "\n";
            sptm::TrainResult res = sptm::train(ds, tc, &log);
            sptm::save_params(res.params, out_path);
            std::cout << "wrote " << out_path << "; final val NMSE "
                      << res.history.back().val_nmse_db << " dB, fingerprint " << fp << "\n";
        } else if (c_eval->parsed()) {
            if (out_path.empty()) out_path = cfg.out_dir + "/report.kv";
            sptm::UnfoldingParams params = sptm::load_params(model_path);
            sptm::Dataset test = sptm::load_dataset(test_path);
            double lin = sptm::evaluate_params(params, test);
            sptm::EvalReport report;
            report.fingerprint = fp;
            report.seed = cfg.seed;
            sptm::ReportCell cell;
            cell.label = "eval";
            cell.set("nmse", lin);
            cell.set("nmse_db", sptm::nmse_db(lin));
            cell.set("n_test", static_cast<double>(test.size()));
            report.cells.push_back(cell);
            report.write_kv(out_path);
            std::cout << report.table();
        } else if (c_sweep->parsed()) {
            if (out_path.empty()) out_path = cfg.out_dir + "/sweep.kv";
            std::vector<double> crs = cfg.crs;
            if (!crs_arg.empty()) {
                crs.clear();
                std::stringstream ss(crs_arg);
                std::string tok;
                while (std::getline(ss, tok, ',')) crs.push_back(std::stod(tok));
            }
            sptm::Dataset train_ds = sptm::load_dataset(train_path);
            sptm::Dataset test_ds = sptm::load_dataset(test_path);
            auto factory = [&](const sptm::Dataset& d, double cr) {
                sptm::TrainConfig tc = cfg.train;
                tc.cr = cr;
                return sptm::train(d, tc, &std::cerr).params;
            };
            sptm::EvalReport report = sptm::run_cr_sweep(factory, train_ds, test_ds, crs);
            report.fingerprint = fp;
            report.seed = cfg.seed;
            report.write_kv(out_path);
            report.write_plot_data(out_path + ".xy", "cr", "nmse_db");
            std::cout << report.table();
        } else if (c_flops->parsed()) {
            sptm::EvalReport report;
            report.fingerprint = fp;
            report.seed = cfg.seed;
            for (double cr : {0.25, 0.125, 0.0625, 0.03125}) {
                sptm::ReportCell cell;
                cell.label = "cr_1_over_" + std::to_string(static_cast<int>(std::round(1.0 / cr)));
                std::int64_t f = sptm::encoder_flops(cr, flops_n, true);
                cell.set("cr", cr);
                cell.set("flops", static_cast<double>(f));
                cell.set("mflops", sptm::flops_millions(f));
                report.cells.push_back(cell);
            }
            std::cout << report.table();
            if (!out_path.empty()) report.write_kv(out_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
