#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "miab/allocation.hpp"
#include "miab/checkpoint.hpp"
#include "miab/config.hpp"
#include "miab/errors.hpp"
#include "miab/learning.hpp"
#include "miab/radio.hpp"
#include "miab/random.hpp"
#include "miab/scenario.hpp"

namespace miab {

inline std::string fmt_num(double v) { return detail::format_double(v); }

/// RFC-4180 writer: comma separated, CRLF-free (LF line ends), fields with
/// commas, quotes or newlines are quoted with doubled quotes.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    static std::string escape(const std::string& field) {
        if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
        std::string q = "\"";
        for (char c : field) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t k = 0; k < fields.size(); ++k) {
            if (k) out_ << ',';
            out_ << escape(fields[k]);
        }
        out_ << '\n';
    }

private:
    std::ostream& out_;
};

/// Parses one RFC-4180 record (quoted fields may not span lines here).
inline std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

/// Mean and population standard deviation over the last `size` values
/// (fewer at the start of a series).
class RollingWindow {
public:
    explicit RollingWindow(std::size_t size = 100) : size_(size) {
        if (size == 0) throw DomainError("RollingWindow: size must be >= 1");
    }

    void push(double v) {
        values_.push_back(v);
        if (values_.size() > size_) values_.pop_front();
    }

    std::size_t count() const noexcept { return values_.size(); }

    double mean() const {
        if (values_.empty()) return 0.0;
        return values_.front() + shifted_mean();
    }

    // Deviations are taken from the first value so a constant series gives exactly 0.
    double stddev() const {
        if (values_.empty()) return 0.0;
        const double m = shifted_mean(), v0 = values_.front();
        double s = 0.0;
        for (double v : values_) s += (v - v0 - m) * (v - v0 - m);
        return std::sqrt(s / static_cast<double>(values_.size()));
    }

private:
    double shifted_mean() const {
        double s = 0.0;
        for (double v : values_) s += v - values_.front();
        return s / static_cast<double>(values_.size());
    }

    std::size_t size_;
    std::deque<double> values_;
};

/// P(X >= tau) for each threshold.
inline std::vector<std::pair<double, double>> compute_ccdf(std::span<const double> values, std::span<const double> thresholds) {
    if (values.empty()) throw DomainError("compute_ccdf: no values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> out;
    out.reserve(thresholds.size());
    const double n = static_cast<double>(sorted.size());
    for (double t : thresholds) {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
        out.emplace_back(t, static_cast<double>(sorted.end() - it) / n);
    }
    return out;
}

/// 0 to 12 Gbit/s in 0.1 Gbit/s steps.
inline std::vector<double> default_ccdf_thresholds() {
    std::vector<double> t;
    for (int k = 0; k <= 120; ++k) t.push_back(1e8 * k);
    return t;
}

/// Worker count from MIAB_THREADS (default 1).
inline unsigned thread_count_from_env() {
    const char* v = std::getenv("MIAB_THREADS");
    if (!v || !*v) return 1;
    const long n = std::strtol(v, nullptr, 10);
    if (n < 1) throw ConfigError("MIAB_THREADS", "must be a positive integer");
    return static_cast<unsigned>(std::min<long>(n, 256));
}

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainRow {
    long episode = 0;
    std::uint64_t seed = 0;
    std::size_t K = 0;
    EpisodeResult result;
    double kappa_running_avg = 0.0;
    double kappa_roll_mean = 0.0, kappa_roll_std = 0.0;
    double high_roll_mean = 0.0, high_roll_std = 0.0;
    double low_roll_mean = 0.0, low_roll_std = 0.0;
    double ue_policy_loss = 0.0, ue_value_loss = 0.0, ue_entropy = 0.0;
    double wall_time = 0.0;
};

inline const std::vector<std::string>& convergence_header() {
    static const std::vector<std::string> h{
        "episode", "seed", "algo", "K", "sum_rate", "sum_rate_miab", "sum_backhaul", "kappa", "kappa_running_avg",
        "high_reward_avg", "low_reward_avg", "kappa_roll_mean", "kappa_roll_std", "high_reward_roll_mean",
        "high_reward_roll_std", "low_reward_roll_mean", "low_reward_roll_std", "ue_policy_loss", "ue_value_loss",
        "ue_entropy"};
    return h;
}

inline std::vector<std::string> convergence_fields(const TrainRow& r) {
    const auto& e = r.result;
    return {std::to_string(r.episode), std::to_string(r.seed), "hmarl", std::to_string(r.K), fmt_num(e.sum_rate),
            fmt_num(e.sum_rate_miab), fmt_num(e.sum_backhaul), fmt_num(e.kappa), fmt_num(r.kappa_running_avg),
            fmt_num(e.high_reward), fmt_num(e.low_reward), fmt_num(r.kappa_roll_mean), fmt_num(r.kappa_roll_std),
            fmt_num(r.high_roll_mean), fmt_num(r.high_roll_std), fmt_num(r.low_roll_mean), fmt_num(r.low_roll_std),
            fmt_num(r.ue_policy_loss), fmt_num(r.ue_value_loss), fmt_num(r.ue_entropy)};
}

struct TrainOptions {
    Config config;
    std::uint64_t seed = 0;
    std::string out_dir;          // empty: no files
    int episodes = 0;             // 0: config value
    std::size_t window = 100;
    std::ostream* log = nullptr;  // progress lines
    int log_every = 50;
    std::function<void(const TrainRow&)> on_episode;
};

struct TrainOutcome {
    std::vector<TrainRow> rows;
    Checkpoint final_checkpoint;
};

/// Runs training, writing convergence.csv (one row per episode, flushed as
/// it goes), timing.csv (wall time per episode) and checkpoint.ckpt
/// (refreshed every checkpoint_every episodes and at the end).
inline TrainOutcome run_training(const TrainOptions& opt) {
    opt.config.validate();
    const int episodes = opt.episodes > 0 ? opt.episodes : opt.config.learning.episodes;
    Trainer trainer(opt.config, opt.seed);
    const bool files = !opt.out_dir.empty();
    std::ofstream conv, timing;
    std::optional<CsvWriter> conv_csv, timing_csv;
    if (files) {
        ensure_directory(opt.out_dir);
        conv = open_output(opt.out_dir + "/convergence.csv");
        timing = open_output(opt.out_dir + "/timing.csv");
        conv_csv.emplace(conv);
        timing_csv.emplace(timing);
        conv_csv->row(convergence_header());
        timing_csv->row({"episode", "wall_time"});
    }
    auto snapshot = [&] {
        return Checkpoint{opt.config, opt.seed, trainer.episode(), trainer.agents(), trainer.normalizer()};
    };
    TrainOutcome outcome;
    RollingWindow kw(opt.window), hw(opt.window), lw(opt.window);
    double kappa_total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        auto rec = trainer.train_episode();
        TrainRow row;
        row.episode = rec.episode;
        row.seed = rec.seed;
        row.K = static_cast<std::size_t>(opt.config.scenario.n_ue);
        row.result = std::move(rec.result);
        kappa_total += row.result.kappa;
        row.kappa_running_avg = kappa_total / static_cast<double>(e + 1);
        kw.push(row.result.kappa);
        hw.push(row.result.high_reward);
        lw.push(row.result.low_reward);
        row.kappa_roll_mean = kw.mean();
        row.kappa_roll_std = kw.stddev();
        row.high_roll_mean = hw.mean();
        row.high_roll_std = hw.stddev();
        row.low_roll_mean = lw.mean();
        row.low_roll_std = lw.stddev();
        row.ue_policy_loss = rec.ue_stats.policy_loss;
        row.ue_value_loss = rec.ue_stats.value_loss;
        row.ue_entropy = rec.ue_stats.entropy;
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (files) {
            conv_csv->row(convergence_fields(row));
            conv.flush();
            timing_csv->row({std::to_string(row.episode), fmt_num(row.wall_time)});
            timing.flush();
            if ((e + 1) % opt.config.learning.checkpoint_every == 0 && e + 1 < episodes)
                save_checkpoint(opt.out_dir + "/checkpoint.ckpt", snapshot());
        }
        if (opt.log && opt.log_every > 0 && ((e + 1) % opt.log_every == 0 || e == 0)) {
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "episode %ld  kappa %.3f (roll %.3f)  high %.3f (roll %.3f)  low %.3f (roll %.3f)  %.2fs\n",
                          row.episode, row.result.kappa, row.kappa_roll_mean, row.result.high_reward, row.high_roll_mean,
                          row.result.low_reward, row.low_roll_mean, row.wall_time);
            *opt.log << buf << std::flush;
        }
        if (opt.on_episode) opt.on_episode(row);
        outcome.rows.push_back(std::move(row));
    }
    outcome.final_checkpoint = snapshot();
    if (files) save_checkpoint(opt.out_dir + "/checkpoint.ckpt", outcome.final_checkpoint);
    return outcome;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRow {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    Algorithm algo = Algorithm::BenchA;
    std::size_t K = 0;
    EpisodeResult result;
    double kappa_running_avg = 0.0;
    double wall_time = 0.0;
};

/// Seed of Monte-Carlo run r; shared by all algorithms so they face the same
/// deployments.
inline std::uint64_t eval_run_seed(std::uint64_t master, std::size_t run) {
    return derive_seed(master, stream::eval_run, run);
}

/// Independent deployments, spread over `threads` workers; rows come back in
/// run order.
inline std::vector<EvalRow> run_evaluation(Algorithm algo, const Agents* agents, const Config& cfg, std::uint64_t seed,
                                           std::size_t runs, unsigned threads = 1, bool check_constraints = true) {
    cfg.validate();
    if (algo == Algorithm::Hmarl && !agents) throw ContractViolation("run_evaluation: hmarl needs trained agents");
    std::vector<EvalRow> rows(runs);
    std::vector<std::exception_ptr> errors(runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < runs; r = next++) {
            try {
                const auto t0 = std::chrono::steady_clock::now();
                EvalRow& row = rows[r];
                row.run = r;
                row.seed = eval_run_seed(seed, r);
                row.algo = algo;
                row.K = static_cast<std::size_t>(cfg.scenario.n_ue);
                row.result = evaluate_run(algo, agents, cfg, row.seed, check_constraints);
                row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(runs, 1))));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    double kappa_total = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
        kappa_total += rows[r].result.kappa;
        rows[r].kappa_running_avg = kappa_total / static_cast<double>(r + 1);
    }
    return rows;
}

inline const std::vector<std::string>& eval_header() {
    static const std::vector<std::string> h{"run", "seed", "algo", "K", "sum_rate", "sum_rate_miab", "sum_backhaul",
                                            "kappa", "kappa_running_avg", "high_reward_avg", "low_reward_avg",
                                            "violations"};
    return h;
}

struct EvalSummary {
    double mean[7] = {};
    double std[7] = {};
};

/// Mean and population std of sum_rate, sum_rate_miab, sum_backhaul, kappa,
/// kappa_running_avg, high and low reward.
inline EvalSummary summarize(const std::vector<EvalRow>& rows) {
    EvalSummary s;
    if (rows.empty()) return s;
    auto value = [](const EvalRow& r, int k) {
        switch (k) {
            case 0: return r.result.sum_rate;
            case 1: return r.result.sum_rate_miab;
            case 2: return r.result.sum_backhaul;
            case 3: return r.result.kappa;
            case 4: return r.kappa_running_avg;
            case 5: return r.result.high_reward;
            default: return r.result.low_reward;
        }
    };
    const double n = static_cast<double>(rows.size());
    for (int k = 0; k < 7; ++k) {
        double m = 0.0;
        for (const auto& r : rows) m += value(r, k);
        m /= n;
        double v = 0.0;
        for (const auto& r : rows) v += (value(r, k) - m) * (value(r, k) - m);
        s.mean[k] = m;
        s.std[k] = std::sqrt(v / n);
    }
    return s;
}

/// Per-run rows followed by "mean" and "std" summary rows; wall times go to
/// an optional separate stream so the main body is reproducible.
inline void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows, std::ostream* timing = nullptr) {
    CsvWriter csv(out);
    csv.row(eval_header());
    std::size_t violations = 0;
    for (const auto& r : rows) {
        const auto& e = r.result;
        violations += e.violations;
        csv.row({std::to_string(r.run), std::to_string(r.seed), algorithm_name(r.algo), std::to_string(r.K),
                 fmt_num(e.sum_rate), fmt_num(e.sum_rate_miab), fmt_num(e.sum_backhaul), fmt_num(e.kappa),
                 fmt_num(r.kappa_running_avg), fmt_num(e.high_reward), fmt_num(e.low_reward), std::to_string(e.violations)});
    }
    if (!rows.empty()) {
        const auto s = summarize(rows);
        const std::string algo = algorithm_name(rows.front().algo), K = std::to_string(rows.front().K);
        csv.row({"mean", "", algo, K, fmt_num(s.mean[0]), fmt_num(s.mean[1]), fmt_num(s.mean[2]), fmt_num(s.mean[3]),
                 fmt_num(s.mean[4]), fmt_num(s.mean[5]), fmt_num(s.mean[6]), std::to_string(violations)});
        csv.row({"std", "", algo, K, fmt_num(s.std[0]), fmt_num(s.std[1]), fmt_num(s.std[2]), fmt_num(s.std[3]),
                 fmt_num(s.std[4]), fmt_num(s.std[5]), fmt_num(s.std[6]), ""});
    }
    if (timing) {
        CsvWriter t(*timing);
        t.row({"run", "wall_time"});
        for (const auto& r : rows) t.row({std::to_string(r.run), fmt_num(r.wall_time)});
    }
}

/// Reads a numeric column of a CSV file, skipping summary rows (first field
/// "mean" or "std").
inline std::vector<double> read_csv_column(std::istream& in, const std::string& column) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty CSV input");
    const auto header = parse_csv_line(line);
    const auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end()) throw ConfigError("--column", "column '" + column + "' not found");
    const auto col = static_cast<std::size_t>(it - header.begin());
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = parse_csv_line(line);
        if (!f.empty() && (f[0] == "mean" || f[0] == "std")) continue;
        if (col >= f.size()) throw IoError("short CSV row");
        values.push_back(detail::parse_double(column, f[col]));
    }
    return values;
}

inline void write_ccdf_csv(std::ostream& out, const std::vector<std::pair<double, double>>& ccdf) {
    CsvWriter csv(out);
    csv.row({"threshold", "probability"});
    for (const auto& [t, p] : ccdf) csv.row({fmt_num(t), fmt_num(p)});
}

// ---------------------------------------------------------------------------
// Link inspection

/// Interference breakdown for station i and user j on a fresh deployment,
/// with Max-SNR association and optimal backhaul split unless `idle`.
inline void inspect_link(std::ostream& out, const ScenarioConfig& sc, std::uint64_t seed, std::size_t i, std::size_t j,
                         bool idle = false) {
    NetworkState s = init_scenario(sc, seed);
    if (i >= s.n_stations()) throw ContractViolation("inspect-link: station index out of range");
    if (j >= s.n_ues()) throw ContractViolation("inspect-link: user index out of range");
    if (!idle) {
        const RadioContext ctx(s);
        commit_allocation(s, allocate(s, ctx, max_snr_association(s, ctx), BetaRule::OptimalP1));
    }
    const RadioContext ctx(s);
    std::vector<InterferenceTerm> terms;
    const double ia = ctx.access_interference(s.x, s.backhaul.z, i, j, &terms);
    double ib = 0.0;
    if (i != kDonor) ib = ctx.backhaul_interference(s.x, s.backhaul.z, i, &terms);
    CsvWriter csv(out);
    csv.row({"link", "term", "source_station", "beam_target_node", "watts"});
    for (const auto& t : terms)
        csv.row({t.link == SinrLink::Access ? "access" : "backhaul", std::to_string(t.term), std::to_string(t.source), std::to_string(t.beam_target),
                 fmt_num(t.watts)});
    csv.row({"access", "total", std::to_string(i), std::to_string(s.ue_node(j)), fmt_num(ia)});
    if (i != kDonor) csv.row({"backhaul", "total", std::to_string(i), "", fmt_num(ib)});
}

}  // namespace miab
