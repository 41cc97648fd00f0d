#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "miab/harness.hpp"
#include "oracles.hpp"

using namespace miab;

namespace {

Config tiny_config() {
    Config c;
    c.scenario.n_ue = 8;
    c.learning.p = 4;
    c.learning.n = 4;
    c.learning.n_heads = 2;
    c.learning.T_h = 4;
    c.learning.T_l = 4;
    c.learning.macro_rounds = 1;
    c.learning.minibatch = 32;
    c.learning.epochs = 1;
    c.learning.warmup_episodes = 2;
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("miab_test_" + name);
    std::filesystem::remove_all(dir);
    return dir.string();
}

std::vector<std::vector<std::string>> parse_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) rows.push_back(parse_csv_line(line));
    return rows;
}

}  // namespace

TEST(Ccdf, Examples) {
    const std::vector<double> v{1, 2, 3}, t{0, 2, 3.5};
    const auto c = compute_ccdf(v, t);
    EXPECT_DOUBLE_EQ(c[0].second, 1.0);
    EXPECT_DOUBLE_EQ(c[1].second, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(c[2].second, 0.0);
    EXPECT_THROW(compute_ccdf(std::vector<double>{}, t), DomainError);
}

TEST(Ccdf, MonotoneOnDefaultThresholds) {
    std::vector<double> v;
    Rng rng(1);
    std::uniform_real_distribution<double> u(0, 1.2e10);
    for (int k = 0; k < 500; ++k) v.push_back(u(rng));
    const auto th = default_ccdf_thresholds();
    ASSERT_EQ(th.size(), 121u);
    EXPECT_EQ(th.back(), 1.2e10);
    const auto c = compute_ccdf(v, th);
    for (std::size_t k = 1; k < c.size(); ++k) EXPECT_LE(c[k].second, c[k - 1].second);
}

TEST(Rolling, ConstantSeriesHasZeroStd) {
    RollingWindow w(100);
    for (int k = 0; k < 250; ++k) {
        w.push(0.42);
        EXPECT_EQ(w.stddev(), 0.0);
        EXPECT_DOUBLE_EQ(w.mean(), 0.42);
    }
    EXPECT_EQ(w.count(), 100u);
}

TEST(Rolling, WindowDropsOldValues) {
    RollingWindow w(3);
    for (double v : {1.0, 2.0, 3.0, 10.0}) w.push(v);
    EXPECT_DOUBLE_EQ(w.mean(), 5.0);
    EXPECT_NEAR(w.stddev(), std::sqrt(((2 - 5.0) * (2 - 5.0) + 4 + 25) / 3.0), 1e-12);
    EXPECT_THROW(RollingWindow(0), DomainError);
}

TEST(Csv, QuotingRoundTrip) {
    std::ostringstream out;
    CsvWriter csv(out);
    const std::vector<std::string> fields{"plain", "with,comma", "say \"hi\"", ""};
    csv.row(fields);
    EXPECT_EQ(out.str(), "plain,\"with,comma\",\"say \"\"hi\"\"\",\n");
    std::string line = out.str();
    line.pop_back();
    EXPECT_EQ(parse_csv_line(line), fields);
}

TEST(Csv, NumbersRoundTripExactly) {
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) EXPECT_EQ(std::stod(fmt_num(v)), v);
}

TEST(Training, TenEpisodeSmokeRun) {
    const auto dir = temp_dir("train");
    TrainOptions opt;
    opt.config = tiny_config();
    opt.seed = 11;
    opt.out_dir = dir;
    opt.episodes = 10;
    const auto outcome = run_training(opt);
    ASSERT_EQ(outcome.rows.size(), 10u);
    const auto rows = parse_rows(slurp(dir + "/convergence.csv"));
    ASSERT_EQ(rows.size(), 11u);
    EXPECT_EQ(rows[0], convergence_header());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        EXPECT_EQ(rows[r].size(), convergence_header().size());
        EXPECT_EQ(rows[r][0], std::to_string(r - 1));
        const double kappa = std::stod(rows[r][7]);
        EXPECT_GE(kappa, 0.0);
        EXPECT_LE(kappa, 1.0);
    }
    std::size_t checkpoints = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) checkpoints += e.path().extension() == ".ckpt";
    EXPECT_EQ(checkpoints, 1u);
    const auto ck = load_checkpoint(dir + "/checkpoint.ckpt");
    EXPECT_EQ(ck.episode, 10);
    EXPECT_EQ(ck.seed, 11u);
    EXPECT_EQ(parse_rows(slurp(dir + "/timing.csv")).size(), 11u);

    const auto dir2 = temp_dir("train2");
    opt.out_dir = dir2;
    run_training(opt);
    EXPECT_EQ(slurp(dir + "/convergence.csv"), slurp(dir2 + "/convergence.csv"));
    EXPECT_EQ(slurp(dir + "/checkpoint.ckpt"), slurp(dir2 + "/checkpoint.ckpt"));
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST(Training, UnwritableDirectoryIsIoError) {
    TrainOptions opt;
    opt.config = tiny_config();
    opt.out_dir = "/proc/miab_cannot_write_here";
    opt.episodes = 1;
    EXPECT_THROW(run_training(opt), IoError);
}

TEST(Evaluation, DeterministicAndThreadIndependent) {
    Config cfg = tiny_config();
    cfg.learning.eval_T_h = 3;
    cfg.learning.eval_T_l = 3;
    const auto agents = make_agents(cfg, 5);
    for (auto algo : {Algorithm::BenchA, Algorithm::BenchB, Algorithm::Hmarl}) {
        std::ostringstream a, b, c;
        write_eval_csv(a, run_evaluation(algo, &agents, cfg, 9, 6, 1));
        write_eval_csv(b, run_evaluation(algo, &agents, cfg, 9, 6, 1));
        write_eval_csv(c, run_evaluation(algo, &agents, cfg, 9, 6, 3));
        EXPECT_EQ(a.str(), b.str());
        EXPECT_EQ(a.str(), c.str());
        const auto rows = parse_rows(a.str());
        ASSERT_EQ(rows.size(), 1u + 6u + 2u);
        EXPECT_EQ(rows[7][0], "mean");
        EXPECT_EQ(rows[8][0], "std");
        EXPECT_EQ(rows[7].back(), "0");
        std::istringstream in(a.str());
        EXPECT_EQ(read_csv_column(in, "kappa").size(), 6u);
    }
    EXPECT_THROW(run_evaluation(Algorithm::Hmarl, nullptr, cfg, 1, 1), ContractViolation);
}

TEST(Evaluation, SameDeploymentsAcrossAlgorithms) {
    Config cfg = tiny_config();
    cfg.learning.eval_T_h = 2;
    cfg.learning.eval_T_l = 2;
    const auto a = run_evaluation(Algorithm::BenchA, nullptr, cfg, 3, 4);
    const auto b = run_evaluation(Algorithm::BenchB, nullptr, cfg, 3, 4);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_EQ(a[r].seed, b[r].seed);
        EXPECT_GE(b[r].result.sum_rate_miab, a[r].result.sum_rate_miab * (1 - 1e-12));
    }
}

TEST(InspectLink, TermsSumToTotals) {
    ScenarioConfig sc;
    for (std::size_t i = 0; i < 4; ++i) {
        std::ostringstream out;
        inspect_link(out, sc, 21, i, 3);
        const auto rows = parse_rows(out.str());
        double sa = 0, sb = 0, ta = -1, tb = -1;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const double w = std::stod(rows[r][4]);
            if (rows[r][1] == "total") (rows[r][0] == "access" ? ta : tb) = w;
            else (rows[r][0] == "access" ? sa : sb) += w;
        }
        EXPECT_NEAR(sa, ta, 1e-12 * std::max(1e-300, ta));
        if (i != 0) {
            EXPECT_NEAR(sb, tb, 1e-12 * std::max(1e-300, tb));
        }
    }
}

TEST(InspectLink, TotalsMatchOracle) {
    ScenarioConfig sc;
    std::ostringstream out;
    inspect_link(out, sc, 21, 2, 5);
    auto s = init_scenario(sc, 21);
    const RadioContext ctx(s);
    const auto r = allocate(s, ctx, max_snr_association(s, ctx), BetaRule::OptimalP1);
    const double ia = oracle::access_interference(s, r.x, r.backhaul.z, 2, 5);
    const double ib = oracle::backhaul_interference(s, r.x, r.backhaul.z, 2);
    const auto rows = parse_rows(out.str());
    for (const auto& row : rows) {
        if (row.size() < 5 || row[1] != "total") continue;
        const double v = std::stod(row[4]);
        const double ref = row[0] == "access" ? ia : ib;
        EXPECT_LE(std::fabs(v - ref), 1e-12 * std::fabs(ref));
    }
}

TEST(InspectLink, IdleNetworkIsZero) {
    ScenarioConfig sc;
    std::ostringstream out;
    inspect_link(out, sc, 4, 1, 0, true);
    const auto rows = parse_rows(out.str());
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(std::stod(rows[1][4]), 0.0);
    EXPECT_EQ(std::stod(rows[2][4]), 0.0);
    std::ostringstream bad;
    EXPECT_THROW(inspect_link(bad, sc, 4, 9, 0), ContractViolation);
}

TEST(Threads, EnvironmentVariable) {
    unsetenv("MIAB_THREADS");
    EXPECT_EQ(thread_count_from_env(), 1u);
    setenv("MIAB_THREADS", "4", 1);
    EXPECT_EQ(thread_count_from_env(), 4u);
    setenv("MIAB_THREADS", "0", 1);
    EXPECT_THROW(thread_count_from_env(), ConfigError);
    unsetenv("MIAB_THREADS");
}
