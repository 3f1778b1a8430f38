// End-to-end tests of the ddlab executable.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "../tools/ddlab/commands.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ddlab_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

CliRun run_tool(const std::string& args, const std::string& env = "") {
    const fs::path log = scratch("stdout.txt");
    const std::string cmd = env + " " + std::string(DDLAB_BINARY) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    r.out = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> data_rows(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

const std::string kConfigDir = DDLAB_CONFIG_DIR;

}  // namespace

TEST(CliRange, ParsesInclusiveRanges) {
    EXPECT_EQ(ddlab::cli::parse_range("10:190:10").size(), 19u);
    EXPECT_EQ(ddlab::cli::parse_range("3:5"), (std::vector<ddlab::Index>{3, 4, 5}));
    EXPECT_THROW(ddlab::cli::parse_range("5:3"), ddlab::InvalidInput);
    EXPECT_THROW(ddlab::cli::parse_range("1:x:2"), ddlab::InvalidInput);
    EXPECT_THROW(ddlab::cli::parse_range("1:9:0"), ddlab::InvalidInput);
}

TEST(CliCurve, IsotropicGridHasPeakAtInterpolationThreshold) {
    const fs::path out = scratch("curve_iso");
    const CliRun r = run_tool("curve --profile isotropic --d 100 --n-range 10:190:10 --no-mc --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = data_rows(out / "curve.csv");
    ASSERT_EQ(rows.size(), 19u);
    for (const auto& row : rows) {
        ASSERT_EQ(row.size(), 10u);
        if (row[0] == "100") EXPECT_NEAR(std::stod(row[2]), 100.0, 1e-9);
        EXPECT_TRUE(row[3].empty()) << "--no-mc leaves Monte Carlo columns empty";
        EXPECT_TRUE(row[6].empty());
    }
}

TEST(CliCurve, RerunsAreByteIdenticalAndThreadInvariant) {
    const std::string args = "curve --profile diag_exp --kappa 100 --d 20 --n-values 5,10,20,30 --trials 300 --seed 7";
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b"), c = scratch("rerun_c");
    ASSERT_EQ(run_tool(args + " --threads 1 --out " + a.string()).code, 0);
    ASSERT_EQ(run_tool(args + " --threads 1 --out " + b.string()).code, 0);
    ASSERT_EQ(run_tool(args + " --out " + c.string(), "DDLAB_THREADS=3").code, 0);
    const std::string first = slurp(a / "curve.csv");
    EXPECT_FALSE(first.empty());
    EXPECT_EQ(first, slurp(b / "curve.csv"));
    EXPECT_EQ(first, slurp(c / "curve.csv"));
    EXPECT_NE(first.find("# seed = 7"), std::string::npos);
    EXPECT_EQ(first.find("threads"), std::string::npos);
}

TEST(CliCurve, PresetConfigAndFlagOverride) {
    const fs::path out = scratch("preset1");
    const CliRun r = run_tool("curve --config " + kConfigDir + "/figure1.cfg --no-mc --kappa 1,10000 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(out / "curve_k1.csv"));
    EXPECT_TRUE(fs::exists(out / "curve_k10000.csv"));
    EXPECT_FALSE(fs::exists(out / "curve_k100.csv")) << "command-line kappa wins over the preset";
    EXPECT_TRUE(fs::exists(out / "curve.svg"));
    const std::string svg = slurp(out / "curve.svg");
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("null estimator"), std::string::npos);
    for (const auto& row : data_rows(out / "curve_k10000.csv"))
        if (row[0] == "100") EXPECT_NEAR(std::stod(row[2]), 100.0, 1e-9);
}

TEST(CliCurve, DimensionSweepPreset) {
    const fs::path out = scratch("preset4");
    const CliRun r = run_tool("curve --config " + kConfigDir + "/figure4.cfg --no-mc --kappa 1 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = data_rows(out / "curve.csv");
    ASSERT_EQ(rows.size(), 29u);
    double peak = 0.0;
    std::string peak_d;
    for (const auto& row : rows) {
        if (std::stod(row[2]) > peak) {
            peak = std::stod(row[2]);
            peak_d = row[1];
        }
    }
    EXPECT_EQ(peak_d, "100");
}

TEST(CliErrors, ExitCodesAndNoPartialOutput) {
    const fs::path out = scratch("errors");
    EXPECT_EQ(run_tool("curve --bogus-flag --out " + out.string()).code, 1);
    EXPECT_EQ(run_tool("curve --d 0 --no-mc --out " + out.string()).code, 1);
    EXPECT_EQ(run_tool("curve --profile nonsense --no-mc --out " + out.string()).code, 1);
    EXPECT_EQ(run_tool("curve --w-star 1,2 --d 3 --no-mc --out " + out.string()).code, 1);
    EXPECT_EQ(run_tool("sample --n 3 --d 6 --entry-law rademacher --out " + out.string()).code, 1);
    EXPECT_EQ(run_tool("dp-verify --scenario nope --out " + out.string()).code, 1);
    EXPECT_EQ(run_tool("dp-verify --scenario gaussian_entries --trials 500 --out " + out.string()).code, 1);
    EXPECT_EQ(run_tool("discrepancy --aspects 0.01 --d-values 10,20 --out " + out.string()).code, 1);
    EXPECT_FALSE(fs::exists(out)) << "failed runs must not write anything";
}

TEST(CliErrors, UnknownConfigKeyIsRejected) {
    const fs::path dir = scratch("badcfg");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.cfg") << "[curve]\nkapa = 3\n";
    EXPECT_EQ(run_tool("curve --no-mc --config " + (dir / "bad.cfg").string() + " --out " + (dir / "o").string()).code, 1);
    EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(CliErrors, BlockedTargetLeavesNoFiles) {
    const fs::path out = scratch("blocked");
    fs::create_directories(out / "curve.svg");  // a directory where the chart should go
    const CliRun r = run_tool("curve --profile isotropic --d 10 --n-values 2,5 --no-mc --svg --out " + out.string());
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(fs::exists(out / "curve.csv"));
    EXPECT_FALSE(fs::exists(out / "curve.csv.tmp"));
    EXPECT_FALSE(fs::exists(out / "curve.svg.tmp"));
}

TEST(CliDp, CounterexampleIsViolatedAndPoissonGramConsistent) {
    const fs::path out = scratch("dp");
    const CliRun bad = run_tool("dp-verify --scenario rank2_scaled_counterexample --out " + out.string());
    ASSERT_EQ(bad.code, 0) << bad.out;
    EXPECT_NE(bad.out.find("verdict: violated"), std::string::npos) << bad.out;
    const CliRun good = run_tool("dp-verify --scenario poisson_gram --out " + out.string());
    ASSERT_EQ(good.code, 0) << good.out;
    EXPECT_NE(good.out.find("verdict: consistent"), std::string::npos) << good.out;
    EXPECT_NE(good.out.find("target det(gamma Sigma) = 9"), std::string::npos) << good.out;
    const auto rows = data_rows(out / "dp_poisson_gram.csv");
    EXPECT_EQ(rows.size(), 5u);  // four 1x1 minors and the determinant
}

TEST(CliDp, NormalizationTarget) {
    const fs::path out = scratch("dpnorm");
    const CliRun r = run_tool("dp-verify --scenario normalization --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = data_rows(out / "dp_normalization.csv");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_NEAR(std::stod(rows[0][4]), 2.0 * std::exp(-1.0), 1e-12);
    EXPECT_LE(std::abs(std::stod(rows[0][5])), 3.0);
}

TEST(CliSample, WritesDesignAndSummary) {
    const fs::path out = scratch("sample");
    const CliRun r = run_tool("sample --n 4 --d 8 --chain-steps 200 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = data_rows(out / "sample.csv");
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows.front().size(), 9u);  // x_1..x_8, y
    const std::string summary = slurp(out / "sample_summary.txt");
    EXPECT_NE(summary.find("k = " + std::to_string(rows.size())), std::string::npos);
    EXPECT_NE(summary.find("acceptance_rate"), std::string::npos);
}

TEST(CliSample, RepeatModeMeanSize) {
    const fs::path out = scratch("repeat");
    const CliRun r = run_tool("sample --n 5 --d 10 --chain-steps 50 --repeat 400 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = data_rows(out / "sample_repeat.csv");
    ASSERT_EQ(rows.size(), 400u);
    double sum = 0.0, sq = 0.0;
    for (const auto& row : rows) {
        const double k = std::stod(row[1]);
        sum += k;
        sq += k * k;
    }
    const double mean = sum / 400.0;
    const double se = std::sqrt((sq / 400.0 - mean * mean) / 399.0);
    EXPECT_LE(std::abs(mean - 5.0), 4.0 * se);
}

TEST(CliDiscrepancy, SmallVarianceRunPrintsSlopes) {
    const fs::path out = scratch("disc");
    const CliRun r = run_tool("discrepancy --kind variance --aspects 0.5 --d-values 10,20,40 --trials 200 --trial-cap 4000 --out " +
                        out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("slope variance aspect=0.5"), std::string::npos) << r.out;
    const auto rows = data_rows(out / "discrepancy.csv");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].size(), 9u);
}

TEST(CliDiscrepancy, BiasBeyondCapIsFlaggedNotFailed) {
    const fs::path out = scratch("disc_cap");
    const CliRun r = run_tool("discrepancy --kind bias --profile diag_exp --aspects 0.5 --d-values 8,12 --bias-d-cap 8 "
                        "--trials 200 --trial-cap 800 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = data_rows(out / "discrepancy.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][8], "d_cap_exceeded");
    EXPECT_EQ(rows[1][7], "200");
}
