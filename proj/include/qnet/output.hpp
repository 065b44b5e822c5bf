#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "experiments.hpp"
#include "predictor.hpp"
#include "version.hpp"

namespace qnet {

namespace fs = std::filesystem;
using Manifest = std::vector<fs::path>;

/// Nine significant digits, '.' separator regardless of locale.
inline std::string format_sig9(double x)
{
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 9);
    return std::string(buf, p);
}

/// `x` rounded to nine significant digits, so JSON output prints at most nine.
inline double round_sig9(double x)
{
    auto s = format_sig9(x);
    double out = x;
    std::from_chars(s.data(), s.data() + s.size(), out);
    return out;
}

/// Exclusive claim on an output directory, released on destruction.
class OutputLock
{
  public:
    explicit OutputLock(fs::path const& dir) : path_(dir / ".qnet.lock")
    {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw IoError("output directory " + dir.string() + " is locked or not writable");
        ::close(fd);
    }
    OutputLock(OutputLock const&) = delete;
    OutputLock& operator=(OutputLock const&) = delete;
    ~OutputLock()
    {
        std::error_code ec;
        fs::remove(path_, ec);
    }

  private:
    fs::path path_;
};

namespace detail {

/// Writes `content` to `path` through a temporary file and a rename, so a
/// failed write leaves no partial file behind.
inline void write_file_atomic(fs::path const& path, std::string const& content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os)
            throw IoError("cannot open " + tmp.string() + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        os.flush();
        if (!os)
        {
            os.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("failed writing " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
    {
        fs::remove(tmp, ec);
        throw IoError("cannot move " + tmp.string() + " to " + path.string());
    }
}

struct Table
{
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const { return render(",", ""); }
    std::string dat() const { return render(" ", "# "); }

  private:
    std::string render(std::string_view sep, std::string_view header_prefix) const
    {
        std::string out(header_prefix);
        for (std::size_t i = 0; i < columns.size(); ++i)
        {
            if (i)
                out += sep;
            out += columns[i];
        }
        out += '\n';
        for (auto const& row : rows)
        {
            for (std::size_t i = 0; i < row.size(); ++i)
            {
                if (i)
                    out += sep;
                out += row[i];
            }
            out += '\n';
        }
        return out;
    }
};

inline Table spikes_table(SpikeLog const& log)
{
    Table t{{"t", "row", "col"}, {}};
    t.rows.reserve(log.events.size());
    for (auto const& e : log.events)
    {
        auto n = log.lattice.node(e.node);
        t.rows.push_back({format_sig9(e.t), std::to_string(n.row), std::to_string(n.col)});
    }
    return t;
}

inline Table cumulative_table(std::vector<CountPoint> const& series)
{
    Table t{{"t", "count"}, {}};
    for (auto const& p : series)
        t.rows.push_back({format_sig9(p.t), std::to_string(p.count)});
    return t;
}

inline Table rates_table(RateSeries const& rates)
{
    Table t{{"bin_start", "mean_rate", "stderr"}, {}};
    for (auto const& b : rates.bins)
        t.rows.push_back({format_sig9(b.start), format_sig9(b.mean), format_sig9(b.std_error)});
    return t;
}

using json = nlohmann::ordered_json;

inline json tool_json()
{
    return {{"name", "qnet"}, {"version", qnet::version}, {"git_describe", qnet::git_describe}};
}

inline json num(double x)
{
    return std::isfinite(x) ? json(round_sig9(x)) : json(nullptr);
}

inline json period_json(std::optional<PeriodEstimate> const& p)
{
    if (!p)
        return {{"mean", nullptr}, {"std_error", nullptr}, {"n_intervals", 0}};
    return {{"mean", num(p->mean_period)},
            {"std_error", num(p->std_error)},
            {"n_intervals", p->n_intervals}};
}

inline json fit_json(std::optional<LinearFit> const& f)
{
    if (!f)
        return nullptr;
    return {{"slope", num(f->slope)},
            {"intercept", num(f->intercept)},
            {"r_squared", num(f->r_squared)}};
}

inline json params_json(SimParams const& d)
{
    return {{"v0", num(d.v0)},           {"v", num(d.v)},
            {"width", num(d.width)},     {"k_rate", num(d.k_rate)},
            {"dt", num(d.dt)},           {"t_total", num(d.t_total)},
            {"burn_in", num(d.burn_in)}, {"a_init", num(d.a_init)},
            {"seed", d.seed},            {"max_steps", d.max_steps}};
}

inline json lattice_json(LatticeSpec const& l)
{
    return {{"rows", l.rows}, {"cols", l.cols}, {"boundary", to_string(l.boundary)}};
}

inline json summary_json(ExperimentResult const& r, std::string_view config_text)
{
    json config = {{"lattice", lattice_json(r.lattice)}, {"dynamics", params_json(r.params)}};
    config["pattern"] = r.pattern ? json(to_string(*r.pattern)) : json(nullptr);
    if (r.swept)
        config["swept"] = {{"param", to_string(*r.swept)}, {"value", num(r.swept_value)}};
    else
        config["swept"] = nullptr;
    if (r.tracked)
        config["tracked"] = {r.tracked->row, r.tracked->col};

    json j;
    j["tool"] = tool_json();
    j["kind"] = r.kind;
    j["experiment_id"] = r.experiment_id;
    j["seed"] = r.params.seed;
    j["config"] = std::move(config);
    j["config_text"] = std::string(config_text);
    j["period"] = period_json(r.period);
    j["n_intervals"] = r.period ? r.period->n_intervals : 0;
    json runs = json::array();
    for (auto const& p : r.per_run_periods)
        runs.push_back(p ? num(p->mean_period) : json(nullptr));
    j["per_run_periods"] = std::move(runs);
    if (r.prediction && r.prediction_params)
    {
        j["prediction"] = {{"tau", num(*r.prediction)},
                           {"k", num(r.prediction_params->k)},
                           {"q", num(r.prediction_params->q)}};
    }
    else
    {
        j["prediction"] = nullptr;
    }
    j["fits"] = {{"pooled", fit_json(r.pooled_fit)}, {"tracked", fit_json(r.tracked_fit)}};
    json rates = {{"bin_width", num(r.rates.bin_width)}, {"bins", r.rates.bins.size()}};
    rates["plateau"] = r.plateau ? json{{"mean", num(r.plateau->mean)},
                                        {"std_error", num(r.plateau->std_error)},
                                        {"bins", r.plateau->bins}}
                                 : json(nullptr);
    rates["memory_decay_time"] = r.decay_time ? num(*r.decay_time) : json(nullptr);
    rates["epsilon"] = num(r.epsilon);
    j["rates"] = std::move(rates);
    j["events"] = r.raster.events.size();
    return j;
}

inline std::set<std::string> check_formats(std::vector<std::string> const& formats)
{
    std::set<std::string> set;
    for (auto const& f : formats)
    {
        if (f != "csv" && f != "dat" && f != "json")
            throw InputError("unknown output format '" + f + "'");
        set.insert(f);
    }
    return set;
}

inline void prepare_dir(fs::path const& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError("cannot create output directory " + dir.string());
}

inline Manifest write_result_files(ExperimentResult const& r, fs::path const& dir,
                                   std::set<std::string> const& formats,
                                   std::string_view config_text)
{
    Manifest written;
    std::vector<std::pair<std::string, Table>> tables;
    tables.emplace_back("spikes", spikes_table(r.raster));
    tables.emplace_back("cumulative", cumulative_table(r.cumulative));
    if (r.tracked)
        tables.emplace_back("tracked_cumulative", cumulative_table(r.tracked_cumulative));
    tables.emplace_back("rates", rates_table(r.rates));

    for (auto const& [name, table] : tables)
    {
        if (formats.count("csv"))
        {
            write_file_atomic(dir / (name + ".csv"), table.csv());
            written.push_back(dir / (name + ".csv"));
        }
        if (formats.count("dat"))
        {
            write_file_atomic(dir / (name + ".dat"), table.dat());
            written.push_back(dir / (name + ".dat"));
        }
    }
    if (formats.count("json"))
    {
        write_file_atomic(dir / "summary.json", summary_json(r, config_text).dump(2) + "\n");
        written.push_back(dir / "summary.json");
    }
    return written;
}

}  // namespace detail

/// Writes spikes, cumulative counts, rates (CSV and/or .dat) and
/// summary.json for one result into `dir`. Returns the written paths.
inline Manifest write_outputs(ExperimentResult const& result, fs::path const& dir,
                              std::vector<std::string> const& formats,
                              std::string_view config_text = {})
{
    auto set = detail::check_formats(formats);
    detail::prepare_dir(dir);
    OutputLock lock(dir);
    return detail::write_result_files(result, dir, set, config_text);
}

/// Writes each sweep point into `dir/<param>_<index>/` and a top-level
/// summary.json of (value, predicted, simulated) triples plus a (k, q) fit
/// of the simulated periods.
inline Manifest write_sweep_outputs(std::vector<ExperimentResult> const& results,
                                    fs::path const& dir, std::vector<std::string> const& formats,
                                    std::string_view config_text = {})
{
    auto set = detail::check_formats(formats);
    detail::prepare_dir(dir);
    OutputLock lock(dir);

    Manifest written;
    detail::json points = detail::json::array();
    std::vector<PeriodObservation> obs;
    for (std::size_t i = 0; i < results.size(); ++i)
    {
        auto const& r = results[i];
        std::string name = std::string(r.swept ? to_string(*r.swept) : "point") + "_"
                           + std::to_string(i);
        auto sub = dir / name;
        detail::prepare_dir(sub);
        auto files = detail::write_result_files(r, sub, set, config_text);
        written.insert(written.end(), files.begin(), files.end());

        detail::json pt;
        pt["value"] = detail::num(r.swept_value);
        pt["predicted"] = r.prediction ? detail::num(*r.prediction) : detail::json(nullptr);
        pt["simulated"] = r.period ? detail::num(r.period->mean_period) : detail::json(nullptr);
        pt["std_error"] = r.period ? detail::num(r.period->std_error) : detail::json(nullptr);
        pt["n_intervals"] = r.period ? r.period->n_intervals : 0;
        pt["dir"] = name;
        points.push_back(std::move(pt));
        if (r.period)
            obs.push_back({r.params.v0, r.params.v, r.params.width, r.period->mean_period});
    }

    if (set.count("json"))
    {
        detail::json j;
        j["tool"] = detail::tool_json();
        j["kind"] = "sweep";
        j["param"] = results.empty() || !results.front().swept
                         ? detail::json(nullptr)
                         : detail::json(to_string(*results.front().swept));
        j["seed"] = results.empty() ? 0 : results.front().params.seed;
        j["config_text"] = std::string(config_text);
        if (!results.empty() && results.front().prediction_params)
        {
            j["calibration"] = {{"k", detail::num(results.front().prediction_params->k)},
                                {"q", detail::num(results.front().prediction_params->q)}};
        }
        else
        {
            j["calibration"] = nullptr;
        }
        j["points"] = std::move(points);
        j["fit"] = nullptr;
        try
        {
            auto fit = fit_kq(obs);
            detail::json residuals = detail::json::array();
            for (double r : fit.relative_residuals)
                residuals.push_back(detail::num(r));
            j["fit"] = {{"k", detail::num(fit.k)},
                        {"q", detail::num(fit.q)},
                        {"rms_log_residual", detail::num(fit.rms_log_residual)},
                        {"max_abs_relative_residual", detail::num(fit.max_abs_relative_residual)},
                        {"relative_residuals", std::move(residuals)}};
        }
        catch (InputError const&)
        {
        }
        detail::write_file_atomic(dir / "summary.json", j.dump(2) + "\n");
        written.push_back(dir / "summary.json");
    }
    return written;
}

}  // namespace qnet
