#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "output.hpp"
#include "predictor.hpp"
#include "version.hpp"

namespace qnet {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int validation = 2;
inline constexpr int runtime = 3;
}  // namespace exit_code

namespace detail {

inline std::string read_text_file(std::string const& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline fs::path resolve_out_dir(std::optional<std::string> const& flag, RunConfig const& cfg)
{
    if (flag && !flag->empty())
        return *flag;
    if (!cfg.output.dir.empty())
        return cfg.output.dir;
    if (char const* env = std::getenv("QNET_OUT"); env && *env)
        return env;
    return "qnet_out";
}

inline void print_manifest(Manifest const& m, std::ostream& out)
{
    for (auto const& p : m)
        out << p.string() << "\n";
}

/// Parses `v0,v,width,period` rows; a non-numeric first line is a header.
inline std::vector<PeriodObservation> read_observations(std::string const& text)
{
    std::vector<PeriodObservation> obs;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#')
            continue;
        std::vector<double> cells;
        std::stringstream row(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(row, cell, ','))
        {
            auto b = cell.find_first_not_of(" \t");
            auto e = cell.find_last_not_of(" \t");
            cell = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
            double d = 0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), d);
            if (cell.empty() || ec != std::errc() || p != cell.data() + cell.size())
            {
                numeric = false;
                break;
            }
            cells.push_back(d);
        }
        if (!numeric)
        {
            if (obs.empty() && line_no == 1)
                continue;
            throw ValidationError("expected four numbers v0,v,width,period", line_no);
        }
        if (cells.size() != 4)
            throw ValidationError("expected four numbers v0,v,width,period", line_no);
        obs.push_back({cells[0], cells[1], cells[2], cells[3]});
    }
    return obs;
}

}  // namespace detail

/// Entry point of the `qnet` command-line tool.
///
///   simulate  --config FILE [--seed N] [--out DIR]
///   sweep     --param v|width --values a,b,... --config FILE [--runs N] [--seed N] [--out DIR]
///   predict   --v0 X --v X --width X --k X --q X
///   fit       --data FILE          (rows of v0,v,width,period)
///   input-exp --pattern all-one|alternating|random|all-zero [--runs N] --config FILE
///             [--seed N] [--out DIR]
///
/// Exit codes: 0 success, 1 usage, 2 validation, 3 runtime/resource/I/O.
inline int cli_main(int argc, char const* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr)
{
    CLI::App app{"Monte Carlo simulator and period predictor for semiclassical "
                 "integrate-and-fire lattices",
                 "qnet"};
    app.set_version_flag("--version", std::string(qnet::version) + " (" + qnet::git_describe + ")");
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> runs;

    auto* simulate = app.add_subcommand("simulate", "single run with raster and cumulative series");
    simulate->add_option("--config", config_path, "configuration file")->required();
    simulate->add_option("--seed", seed, "master seed (overrides the config)");
    simulate->add_option("--out", out_dir, "output directory");

    std::string param;
    std::vector<double> values;
    auto* sweep_cmd = app.add_subcommand("sweep", "seeded runs across pulse strengths or widths");
    sweep_cmd->add_option("--param", param, "swept parameter")
        ->required()
        ->check(CLI::IsMember({"v", "width"}));
    sweep_cmd->add_option("--values", values, "comma-separated values")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--config", config_path, "configuration file")->required();
    sweep_cmd->add_option("--runs", runs, "runs per value");
    sweep_cmd->add_option("--seed", seed, "master seed (overrides the config)");
    sweep_cmd->add_option("--out", out_dir, "output directory");

    double p_v0 = 0, p_v = 0, p_width = 0, p_k = 0, p_q = 0;
    auto* predict = app.add_subcommand("predict", "average period from the analytic law");
    predict->add_option("--v0", p_v0, "background potential")->required();
    predict->add_option("--v", p_v, "pulse strength")->required();
    predict->add_option("--width", p_width, "pulse width")->required();
    predict->add_option("--k", p_k, "normalization constant")->required();
    predict->add_option("--q", p_q, "neighbor randomness factor")->required();

    std::string data_path;
    auto* fit = app.add_subcommand("fit", "least-squares (k, q) from measured periods");
    fit->add_option("--data", data_path, "CSV of v0,v,width,period")->required();

    std::string pattern;
    auto* input = app.add_subcommand("input-exp", "multi-run input-pattern experiment");
    input->add_option("--pattern", pattern, "initial pattern")
        ->required()
        ->check(CLI::IsMember({"all-one", "alternating", "random", "all-zero"}));
    input->add_option("--runs", runs, "number of runs");
    input->add_option("--config", config_path, "configuration file")->required();
    input->add_option("--seed", seed, "master seed (overrides the config)");
    input->add_option("--out", out_dir, "output directory");

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::Success const& e)
    {
        return app.exit(e, out, err);
    }
    catch (CLI::ParseError const& e)
    {
        app.exit(e, out, err);
        err << app.help();
        return exit_code::usage;
    }

    try
    {
        auto load = [&](ExperimentKind kind) {
            auto cfg = parse_config(detail::read_text_file(config_path), kind);
            if (seed)
                cfg.dynamics.seed = *seed;
            if (runs)
                cfg.experiment.runs = *runs;
            if (cfg.experiment.runs == 0)
                throw ValidationError("runs must be at least 1");
            cfg.experiment.kind = kind;
            return cfg;
        };

        if (*simulate)
        {
            auto cfg = load(ExperimentKind::Simulate);
            auto res = single_run_diagnostics(cfg.dynamics, cfg.lattice, cfg.tracked_node(),
                                              cfg.options());
            auto manifest = write_outputs(res, detail::resolve_out_dir(out_dir, cfg),
                                          cfg.output.formats, serialize_config(cfg));
            detail::print_manifest(manifest, out);
        }
        else if (*sweep_cmd)
        {
            auto cfg = load(ExperimentKind::Sweep);
            cfg.experiment.param = sweep_param_from_string(param);
            cfg.experiment.values = values;
            auto results = qnet::sweep(values, cfg.experiment.param, cfg.dynamics, cfg.lattice,
                                       cfg.options());
            auto manifest = write_sweep_outputs(results, detail::resolve_out_dir(out_dir, cfg),
                                                cfg.output.formats, serialize_config(cfg));
            detail::print_manifest(manifest, out);
        }
        else if (*predict)
        {
            double tau = predicted_period({p_k, p_q, p_v0, p_v, p_width});
            out << "tau = " << format_sig9(tau) << "\n";
        }
        else if (*fit)
        {
            auto obs = detail::read_observations(detail::read_text_file(data_path));
            auto result = fit_kq(obs);
            out << "k = " << format_sig9(result.k) << "\n"
                << "q = " << format_sig9(result.q) << "\n"
                << "rms_log_residual = " << format_sig9(result.rms_log_residual) << "\n"
                << "max_abs_relative_residual = "
                << format_sig9(result.max_abs_relative_residual) << "\n"
                << "v0,v,width,period,relative_residual\n";
            for (std::size_t i = 0; i < obs.size(); ++i)
            {
                out << format_sig9(obs[i].v0) << "," << format_sig9(obs[i].v) << ","
                    << format_sig9(obs[i].width) << "," << format_sig9(obs[i].period) << ","
                    << format_sig9(result.relative_residuals[i]) << "\n";
            }
        }
        else if (*input)
        {
            auto cfg = load(ExperimentKind::Input);
            cfg.experiment.pattern = pattern_from_string(pattern);
            auto res = input_experiment(cfg.experiment.pattern, cfg.dynamics, cfg.lattice,
                                        cfg.options());
            auto manifest = write_outputs(res, detail::resolve_out_dir(out_dir, cfg),
                                          cfg.output.formats, serialize_config(cfg));
            detail::print_manifest(manifest, out);
        }
        return exit_code::ok;
    }
    catch (InputError const& e)
    {
        err << "qnet: " << e.what() << "\n";
        return exit_code::validation;
    }
    catch (std::exception const& e)
    {
        err << "qnet: " << e.what() << "\n";
        return exit_code::runtime;
    }
}

}  // namespace qnet
