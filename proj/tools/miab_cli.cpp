// Command-line front end: train, eval, baseline, inspect-link, ccdf.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "miab/checkpoint.hpp"
#include "miab/config.hpp"
#include "miab/errors.hpp"
#include "miab/harness.hpp"
#include "miab/learning.hpp"

namespace {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kCheckpoint = 3,
    kIo = 4,
    kDivergence = 5,
    kDomain = 6,
};

miab::Config base_config(const std::string& path) { return path.empty() ? miab::Config{} : miab::load_config(path); }

void apply_ues(miab::Config& cfg, int ues) {
    if (ues >= 0) cfg.scenario.n_ue = ues;
    cfg.validate();
}

int write_eval(const std::vector<miab::EvalRow>& rows, const std::string& out_dir) {
    if (out_dir.empty()) {
        miab::write_eval_csv(std::cout, rows);
        return kOk;
    }
    miab::ensure_directory(out_dir);
    auto out = miab::open_output(out_dir + "/eval.csv");
    auto timing = miab::open_output(out_dir + "/eval_timing.csv");
    miab::write_eval_csv(out, rows, &timing);
    const auto s = miab::summarize(rows);
    std::cerr << rows.size() << " runs  mean sum_rate_miab " << s.mean[1] << "  mean kappa " << s.mean[3] << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mobile-relay mmWave IAB simulator with hierarchical multi-agent learning"};
    app.require_subcommand(1);

    std::string config_path, out_dir, algo_name = "bench-a", checkpoint_path, in_path, column = "sum_rate_miab";
    std::uint64_t seed = 1;
    int runs = 500, ues = -1, episodes = 0, station = 1, ue = 0;
    bool idle = false, quiet = false;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--config", config_path, "Configuration file (key = value)");
        c->add_option("--seed", seed, "Master seed");
        c->add_option("--out", out_dir, "Output directory");
    };

    auto* train = app.add_subcommand("train", "Train the hierarchical policies");
    add_common(train);
    train->add_option("--episodes", episodes, "Override the episode count");
    train->add_option("--ues", ues, "Number of users K");
    train->add_flag("--quiet", quiet, "No progress lines");

    auto* eval = app.add_subcommand("eval", "Monte-Carlo evaluation of a trained checkpoint or a benchmark");
    add_common(eval);
    eval->add_option("--runs", runs, "Number of deployments");
    eval->add_option("--ues", ues, "Number of users K");
    eval->add_option("--algo", algo_name, "hmarl, bench-a or bench-b");
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint (required for hmarl)");

    auto* baseline = app.add_subcommand("baseline", "Monte-Carlo evaluation of a benchmark");
    add_common(baseline);
    baseline->add_option("--runs", runs, "Number of deployments");
    baseline->add_option("--ues", ues, "Number of users K");
    baseline->add_option("--algo", algo_name, "bench-a or bench-b");

    auto* inspect = app.add_subcommand("inspect-link", "Per-term interference breakdown of one link");
    add_common(inspect);
    inspect->add_option("--station", station, "Station index (0 = donor)");
    inspect->add_option("--ue", ue, "User index");
    inspect->add_option("--ues", ues, "Number of users K");
    inspect->add_flag("--idle", idle, "No associations (idle network)");

    auto* ccdf = app.add_subcommand("ccdf", "Service coverage P(X >= threshold) from an evaluation CSV");
    ccdf->add_option("--in", in_path, "Evaluation CSV")->required();
    ccdf->add_option("--column", column, "Column to use");
    ccdf->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (train->parsed()) {
            auto cfg = base_config(config_path);
            apply_ues(cfg, ues);
            if (out_dir.empty()) throw miab::ConfigError("--out", "train needs an output directory");
            miab::TrainOptions opt;
            opt.config = cfg;
            opt.seed = seed;
            opt.out_dir = out_dir;
            opt.episodes = episodes;
            opt.log = quiet ? nullptr : &std::cerr;
            miab::run_training(opt);
            return kOk;
        }
        if (eval->parsed() || baseline->parsed()) {
            auto cfg = base_config(config_path);
            const auto algo = miab::parse_algorithm(algo_name);
            if (baseline->parsed() && algo == miab::Algorithm::Hmarl)
                throw miab::ConfigError("--algo", "baseline accepts bench-a or bench-b; use eval for hmarl");
            if (runs < 1) throw miab::ConfigError("--runs", "must be >= 1");
            std::optional<miab::Checkpoint> ck;
            if (algo == miab::Algorithm::Hmarl) {
                if (checkpoint_path.empty()) throw miab::ConfigError("--checkpoint", "required for hmarl");
                ck = miab::load_checkpoint(checkpoint_path);
                cfg.learning = ck->config.learning;
                if (cfg.scenario.n_miab != static_cast<int>(ck->agents.miab.size()))
                    throw miab::CheckpointError("checkpoint has " + std::to_string(ck->agents.miab.size()) +
                                                " relay policies, configuration has " +
                                                std::to_string(cfg.scenario.n_miab) + " relays");
            }
            apply_ues(cfg, ues);
            const auto rows = miab::run_evaluation(algo, ck ? &ck->agents : nullptr, cfg, seed,
                                                   static_cast<std::size_t>(runs), miab::thread_count_from_env());
            return write_eval(rows, out_dir);
        }
        if (inspect->parsed()) {
            auto cfg = base_config(config_path);
            apply_ues(cfg, ues);
            if (station < 0 || ue < 0) throw miab::ContractViolation("inspect-link: indices must be >= 0");
            if (out_dir.empty()) {
                miab::inspect_link(std::cout, cfg.scenario, seed, static_cast<std::size_t>(station),
                                   static_cast<std::size_t>(ue), idle);
            } else {
                miab::ensure_directory(out_dir);
                auto out = miab::open_output(out_dir + "/inspect_link.csv");
                miab::inspect_link(out, cfg.scenario, seed, static_cast<std::size_t>(station), static_cast<std::size_t>(ue),
                                   idle);
            }
            return kOk;
        }
        if (ccdf->parsed()) {
            std::ifstream in(in_path);
            if (!in) throw miab::IoError("cannot open '" + in_path + "'");
            const auto values = miab::read_csv_column(in, column);
            const auto thresholds = miab::default_ccdf_thresholds();
            const auto curve = miab::compute_ccdf(values, thresholds);
            if (out_dir.empty()) {
                miab::write_ccdf_csv(std::cout, curve);
            } else {
                miab::ensure_directory(out_dir);
                auto out = miab::open_output(out_dir + "/ccdf.csv");
                miab::write_ccdf_csv(out, curve);
            }
            return kOk;
        }
    } catch (const miab::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const miab::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kCheckpoint;
    } catch (const miab::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIo;
    } catch (const miab::DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return kDivergence;
    } catch (const miab::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kDomain;
    } catch (const miab::ContractViolation& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kDomain;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
