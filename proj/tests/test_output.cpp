#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <qnet/experiments.hpp>
#include <qnet/output.hpp>

#include "temp_dir.hpp"

using namespace qnet;

namespace {

std::string slurp(fs::path const& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

ExperimentResult small_result()
{
    SimParams p;
    p.t_total = 0.1;
    p.burn_in = 0.02;
    return single_run_diagnostics(p, {5, 5}, {2, 2});
}

std::vector<std::string> const all_formats{"csv", "dat", "json"};

}  // namespace

TEST(Format, NineSignificantDigits)
{
    EXPECT_EQ(format_sig9(0.1), "0.1");
    EXPECT_EQ(format_sig9(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(format_sig9(123456789012.0), "1.23456789e+11");
    EXPECT_EQ(format_sig9(2.0), "2");
    EXPECT_EQ(format_sig9(-0.000123456789123), "-0.000123456789");
    EXPECT_EQ(round_sig9(1.0 / 3.0), 0.333333333);
}

TEST(WriteOutputs, EmptyResultHasHeadersOnly)
{
    scratch::TempDir dir("empty");
    ExperimentResult r;
    auto manifest = write_outputs(r, dir.path(), all_formats);
    EXPECT_EQ(manifest.size(), 7u);
    EXPECT_EQ(slurp(dir.path() / "spikes.csv"), "t,row,col\n");
    EXPECT_EQ(slurp(dir.path() / "cumulative.csv"), "t,count\n");
    EXPECT_EQ(slurp(dir.path() / "rates.csv"), "bin_start,mean_rate,stderr\n");
    EXPECT_EQ(slurp(dir.path() / "spikes.dat"), "# t row col\n");
    auto j = nlohmann::json::parse(slurp(dir.path() / "summary.json"));
    EXPECT_EQ(j["n_intervals"], 0);
    EXPECT_TRUE(j["period"]["mean"].is_null());
    EXPECT_EQ(j["period"]["n_intervals"], 0);
    EXPECT_FALSE(fs::exists(dir.path() / ".qnet.lock"));
}

TEST(WriteOutputs, RewriteIsByteIdentical)
{
    scratch::TempDir a("rewrite_a");
    scratch::TempDir b("rewrite_b");
    auto r = small_result();
    auto ma = write_outputs(r, a.path(), all_formats, "cfg");
    auto mb = write_outputs(r, b.path(), all_formats, "cfg");
    ASSERT_EQ(ma.size(), mb.size());
    for (std::size_t i = 0; i < ma.size(); ++i)
    {
        EXPECT_EQ(ma[i].filename(), mb[i].filename());
        EXPECT_EQ(slurp(ma[i]), slurp(mb[i])) << ma[i];
    }
    auto again = write_outputs(r, a.path(), all_formats, "cfg");
    for (std::size_t i = 0; i < ma.size(); ++i)
        EXPECT_EQ(slurp(again[i]), slurp(mb[i]));
}

TEST(WriteOutputs, CsvSchemaAndDatMirror)
{
    scratch::TempDir dir("schema");
    auto r = small_result();
    write_outputs(r, dir.path(), all_formats);
    auto csv = slurp(dir.path() / "spikes.csv");
    auto dat = slurp(dir.path() / "spikes.dat");
    std::istringstream cs(csv);
    std::istringstream ds(dat);
    std::string cl;
    std::string dl;
    std::getline(cs, cl);
    std::getline(ds, dl);
    EXPECT_EQ(cl, "t,row,col");
    EXPECT_EQ(dl, "# t row col");
    std::size_t rows = 0;
    while (std::getline(cs, cl) && std::getline(ds, dl))
    {
        std::replace(cl.begin(), cl.end(), ',', ' ');
        ASSERT_EQ(cl, dl);
        ++rows;
    }
    EXPECT_EQ(rows, r.raster.events.size());
    EXPECT_TRUE(fs::exists(dir.path() / "tracked_cumulative.csv"));
    EXPECT_EQ(slurp(dir.path() / "tracked_cumulative.csv").substr(0, 8), "t,count\n");
}

TEST(WriteOutputs, SummaryCarriesReproductionInputs)
{
    scratch::TempDir dir("summary");
    auto r = small_result();
    write_outputs(r, dir.path(), {"json"}, "[dynamics]\nseed = 1\n");
    auto j = nlohmann::json::parse(slurp(dir.path() / "summary.json"));
    EXPECT_EQ(j["seed"], 1);
    EXPECT_EQ(j["tool"]["version"], std::string(qnet::version));
    EXPECT_EQ(j["config_text"], "[dynamics]\nseed = 1\n");
    EXPECT_EQ(j["config"]["lattice"]["rows"], 5);
    EXPECT_DOUBLE_EQ(j["config"]["dynamics"]["k_rate"].get<double>(), 1900.0);
    ASSERT_FALSE(j["prediction"].is_null());
    EXPECT_EQ(j["events"], r.raster.events.size());
    EXPECT_FALSE(fs::exists(dir.path() / "spikes.csv"));
}

TEST(WriteOutputs, LockedDirectoryIsIoError)
{
    scratch::TempDir dir("locked");
    {
        std::ofstream(dir.path() / ".qnet.lock") << "held";
    }
    EXPECT_THROW(write_outputs(ExperimentResult{}, dir.path(), all_formats), IoError);
    EXPECT_FALSE(fs::exists(dir.path() / "spikes.csv"));
}

TEST(WriteOutputs, UnwritablePath)
{
    scratch::TempDir dir("blocked");
    std::ofstream(dir.path() / "file") << "x";
    EXPECT_THROW(write_outputs(ExperimentResult{}, dir.path() / "file" / "sub", all_formats),
                 IoError);
}

TEST(WriteOutputs, UnknownFormat)
{
    scratch::TempDir dir("format");
    EXPECT_THROW(write_outputs(ExperimentResult{}, dir.path(), {"xml"}), InputError);
}

TEST(WriteSweepOutputs, TopLevelSummary)
{
    scratch::TempDir dir("sweep");
    SimParams p;
    p.t_total = 0.1;
    p.burn_in = 0.02;
    ExperimentOptions opt;
    opt.runs = 2;
    std::vector<double> values{0.2, 0.6};
    auto results = sweep(values, SweepParam::PulseStrength, p, {5, 5}, opt);
    auto manifest = write_sweep_outputs(results, dir.path(), all_formats, "cfg");
    EXPECT_TRUE(fs::exists(dir.path() / "v_0" / "spikes.csv"));
    EXPECT_TRUE(fs::exists(dir.path() / "v_1" / "summary.json"));
    EXPECT_EQ(manifest.back(), dir.path() / "summary.json");
    auto j = nlohmann::json::parse(slurp(dir.path() / "summary.json"));
    ASSERT_EQ(j["points"].size(), 2u);
    EXPECT_EQ(j["points"][1]["value"], 0.6);
    EXPECT_EQ(j["points"][1]["dir"], "v_1");
    EXPECT_DOUBLE_EQ(j["points"][1]["predicted"].get<double>(), round_sig9(*results[1].prediction));
    EXPECT_DOUBLE_EQ(j["points"][0]["simulated"].get<double>(),
                     round_sig9(results[0].period->mean_period));
    EXPECT_FALSE(j["fit"].is_null());
}
