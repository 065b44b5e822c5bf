#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dynamics.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "lattice.hpp"

namespace qnet {

enum class ExperimentKind
{
    Simulate,
    Sweep,
    Input,
};

inline std::string_view to_string(ExperimentKind k)
{
    switch (k)
    {
        case ExperimentKind::Simulate: return "simulate";
        case ExperimentKind::Sweep: return "sweep";
        case ExperimentKind::Input: return "input";
    }
    return "?";
}

struct ExperimentConfig
{
    ExperimentKind kind = ExperimentKind::Simulate;
    SweepParam param = SweepParam::PulseStrength;
    std::vector<double> values;
    std::size_t runs = 20;
    PatternKind pattern = PatternKind::AllPeripheralOne;
    std::optional<Node> tracked;
    double bin_width = 0.0;
    double epsilon = 0.05;
    std::size_t tail_bins = 10;
    double q = 1.4;
    std::optional<double> k;
    std::size_t threads = 1;

    friend bool operator==(ExperimentConfig const&, ExperimentConfig const&) = default;
};

struct OutputConfig
{
    std::string dir;
    std::vector<std::string> formats{"csv", "dat", "json"};

    friend bool operator==(OutputConfig const&, OutputConfig const&) = default;
};

struct RunConfig
{
    LatticeSpec lattice;
    SimParams dynamics;
    ExperimentConfig experiment;
    OutputConfig output;

    friend bool operator==(RunConfig const&, RunConfig const&) = default;

    ExperimentOptions options() const
    {
        ExperimentOptions o;
        o.runs = experiment.runs;
        o.threads = experiment.threads;
        o.bin_width = experiment.bin_width;
        o.epsilon = experiment.epsilon;
        o.tail_bins = experiment.tail_bins;
        o.q = experiment.q;
        o.k = experiment.k;
        return o;
    }

    Node tracked_node() const
    {
        return experiment.tracked.value_or(Node{lattice.rows / 2, lattice.cols / 2});
    }
};

namespace detail {

/// One parsed `key = value` right-hand side of the configuration subset:
/// integers, floats, booleans, basic strings, and flat arrays of those.
struct ConfigValue
{
    enum class Type
    {
        Integer,
        Float,
        Boolean,
        String,
        Array,
    };

    Type type = Type::Integer;
    std::string text;
    bool boolean = false;
    std::vector<ConfigValue> items;
    std::size_t line = 0;
    std::size_t column = 0;
};

struct ConfigEntry
{
    ConfigValue value;
    std::size_t line = 0;
};

using ConfigTable = std::map<std::string, std::map<std::string, ConfigEntry>>;

class ConfigLexer
{
  public:
    ConfigLexer(std::string_view line, std::size_t line_no) : s_(line), line_(line_no) {}

    void skip_ws()
    {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t'))
            ++pos_;
    }

    bool at_end_or_comment()
    {
        skip_ws();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }

    [[noreturn]] void fail(std::string const& what) const
    {
        throw SyntaxError(what, line_, pos_ + 1);
    }

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

    void expect(char c)
    {
        skip_ws();
        if (peek() != c)
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string bare_key()
    {
        skip_ws();
        auto start = pos_;
        while (pos_ < s_.size()
               && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'
                   || s_[pos_] == '-'))
        {
            ++pos_;
        }
        if (start == pos_)
            fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    ConfigValue value()
    {
        skip_ws();
        ConfigValue v;
        v.line = line_;
        v.column = pos_ + 1;
        char c = peek();
        if (c == '"')
        {
            v.type = ConfigValue::Type::String;
            v.text = string_literal();
        }
        else if (c == '[')
        {
            v.type = ConfigValue::Type::Array;
            ++pos_;
            skip_ws();
            if (peek() == ']')
            {
                ++pos_;
                return v;
            }
            while (true)
            {
                auto item = value();
                if (item.type == ConfigValue::Type::Array)
                    fail("nested arrays are not supported");
                v.items.push_back(std::move(item));
                skip_ws();
                if (peek() == ',')
                {
                    ++pos_;
                    skip_ws();
                    if (peek() == ']')
                    {
                        ++pos_;
                        break;
                    }
                    continue;
                }
                if (peek() == ']')
                {
                    ++pos_;
                    break;
                }
                fail("expected ',' or ']' in array");
            }
        }
        else if (s_.substr(pos_, 4) == "true")
        {
            v.type = ConfigValue::Type::Boolean;
            v.boolean = true;
            pos_ += 4;
        }
        else if (s_.substr(pos_, 5) == "false")
        {
            v.type = ConfigValue::Type::Boolean;
            pos_ += 5;
        }
        else
        {
            auto start = pos_;
            while (pos_ < s_.size()
                   && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'
                       || s_[pos_] == '+' || s_[pos_] == '-' || s_[pos_] == '_'))
            {
                ++pos_;
            }
            std::string tok(s_.substr(start, pos_ - start));
            tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
            if (tok.empty())
                fail("expected a value");
            double d = 0;
            auto [p, ec] = std::from_chars(tok.data() + (tok[0] == '+'), tok.data() + tok.size(), d);
            if (ec != std::errc() || p != tok.data() + tok.size())
            {
                pos_ = start;
                fail("invalid value '" + tok + "'");
            }
            bool is_float = tok.find_first_of(".eE") != std::string::npos
                            || tok.find("inf") != std::string::npos
                            || tok.find("nan") != std::string::npos;
            v.type = is_float ? ConfigValue::Type::Float : ConfigValue::Type::Integer;
            v.text = tok[0] == '+' ? tok.substr(1) : tok;
        }
        return v;
    }

  private:
    std::string string_literal()
    {
        ++pos_;
        std::string out;
        while (true)
        {
            if (pos_ >= s_.size())
                fail("unterminated string");
            char c = s_[pos_++];
            if (c == '"')
                return out;
            if (c == '\\')
            {
                if (pos_ >= s_.size())
                    fail("unterminated escape");
                char e = s_[pos_++];
                switch (e)
                {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    default: --pos_; fail(std::string("unsupported escape '\\") + e + "'");
                }
                continue;
            }
            out += c;
        }
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_;
};

inline ConfigTable parse_table(std::string_view text)
{
    ConfigTable table;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size())
    {
        auto eol = text.find('\n', pos);
        auto line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        ++line_no;
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

        ConfigLexer lex(line, line_no);
        if (lex.at_end_or_comment())
            continue;
        if (lex.peek() == '[')
        {
            lex.expect('[');
            section = lex.bare_key();
            lex.expect(']');
            if (!lex.at_end_or_comment())
                lex.fail("unexpected text after section header");
            if (table.count(section))
                throw SyntaxError("duplicate section [" + section + "]", line_no, 1);
            table[section];
            continue;
        }
        auto key = lex.bare_key();
        lex.expect('=');
        auto value = lex.value();
        if (!lex.at_end_or_comment())
            lex.fail("unexpected text after value");
        auto& sec = table[section];
        if (sec.count(key))
            throw SyntaxError("duplicate key '" + key + "'", line_no, 1);
        sec[key] = ConfigEntry{std::move(value), line_no};
    }
    return table;
}

/// Typed reads with line-annotated errors; every consumed key is recorded so
/// leftovers can be rejected as unknown.
class SectionReader
{
  public:
    SectionReader(ConfigTable& table, std::string name) : name_(std::move(name))
    {
        auto it = table.find(name_);
        if (it != table.end())
            entries_ = &it->second;
    }

    ConfigEntry const* find(std::string const& key)
    {
        if (!entries_)
            return nullptr;
        auto it = entries_->find(key);
        if (it == entries_->end())
            return nullptr;
        used_.insert(key);
        return &it->second;
    }

    std::optional<double> number(std::string const& key)
    {
        auto e = find(key);
        if (!e)
            return std::nullopt;
        return as_number(e->value, key);
    }

    template<class Int>
    std::optional<Int> integer(std::string const& key)
    {
        auto e = find(key);
        if (!e)
            return std::nullopt;
        return as_integer<Int>(e->value, key);
    }

    std::optional<std::string> string(std::string const& key)
    {
        auto e = find(key);
        if (!e)
            return std::nullopt;
        if (e->value.type != ConfigValue::Type::String)
            throw ValidationError(qualified(key) + " must be a string", e->line);
        return e->value.text;
    }

    ConfigValue const* array(std::string const& key)
    {
        auto e = find(key);
        if (!e)
            return nullptr;
        if (e->value.type != ConfigValue::Type::Array)
            throw ValidationError(qualified(key) + " must be an array", e->line);
        return &e->value;
    }

    std::size_t line_of(std::string const& key) const
    {
        if (!entries_)
            return 0;
        auto it = entries_->find(key);
        return it == entries_->end() ? 0 : it->second.line;
    }

    void reject_unknown() const
    {
        if (!entries_)
            return;
        for (auto const& [key, entry] : *entries_)
        {
            if (!used_.count(key))
                throw ValidationError("unknown key '" + qualified(key) + "'", entry.line);
        }
    }

    std::string qualified(std::string const& key) const { return name_ + "." + key; }

    double as_number(ConfigValue const& v, std::string const& key) const
    {
        if (v.type != ConfigValue::Type::Integer && v.type != ConfigValue::Type::Float)
            throw ValidationError(qualified(key) + " must be a number", v.line);
        double d = 0;
        std::from_chars(v.text.data(), v.text.data() + v.text.size(), d);
        return d;
    }

    template<class Int>
    Int as_integer(ConfigValue const& v, std::string const& key) const
    {
        Int out{};
        auto [p, ec] = std::from_chars(v.text.data(), v.text.data() + v.text.size(), out);
        if (v.type != ConfigValue::Type::Integer || ec != std::errc()
            || p != v.text.data() + v.text.size())
        {
            throw ValidationError(qualified(key) + " must be an integer in range", v.line);
        }
        return out;
    }

  private:
    std::string name_;
    std::map<std::string, ConfigEntry>* entries_ = nullptr;
    std::set<std::string> used_;
};

inline std::string format_double(double x)
{
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    std::string s(buf, p);
    if (s.find_first_of(".eEn") == std::string::npos)
        s += ".0";
    return s;
}

inline std::string quote(std::string_view s)
{
    std::string out = "\"";
    for (char c : s)
    {
        switch (c)
        {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

}  // namespace detail

/// Parse a configuration document with sections [lattice], [dynamics],
/// [experiment] and [output].
///
/// | key                   | default                                  |
/// |-----------------------|------------------------------------------|
/// | lattice.rows, cols    | 40, 40                                   |
/// | lattice.boundary      | "open" for input experiments, else "periodic" |
/// | dynamics.v0, v, width | 1.0, 0.2, 0.2                            |
/// | dynamics.k_rate       | 1900                                     |
/// | dynamics.dt           | 1e-4                                     |
/// | dynamics.t_total      | 1.0                                      |
/// | dynamics.burn_in      | 0.2 * t_total                            |
/// | dynamics.a_init       | 1.0                                      |
/// | dynamics.seed         | 1                                        |
/// | dynamics.max_steps    | 100000000                                |
/// | experiment.kind       | "simulate"                               |
/// | experiment.param      | "v"                                      |
/// | experiment.values     | []                                       |
/// | experiment.runs       | 100 for input experiments, else 20       |
/// | experiment.pattern    | "all-one"                                |
/// | experiment.tracked    | lattice center                           |
/// | experiment.bin_width  | 0 (predicted period)                     |
/// | experiment.epsilon    | 0.05                                     |
/// | experiment.tail_bins  | 10                                       |
/// | experiment.q          | 1.4                                      |
/// | experiment.k          | unset (calibrated on the first sweep point) |
/// | experiment.threads    | 1                                        |
/// | output.dir            | "" (QNET_OUT, then ./qnet_out)           |
/// | output.formats        | ["csv", "dat", "json"]                   |
///
/// `default_kind` supplies experiment.kind when the document omits it, which
/// also selects the kind-dependent defaults above.
inline RunConfig parse_config(std::string_view text,
                              ExperimentKind default_kind = ExperimentKind::Simulate)
{
    auto table = detail::parse_table(text);
    for (auto const& [name, entries] : table)
    {
        if (name != "lattice" && name != "dynamics" && name != "experiment" && name != "output")
        {
            std::size_t line = entries.empty() ? 0 : entries.begin()->second.line;
            if (name.empty())
                throw ValidationError("keys must appear inside a section", line);
            throw ValidationError("unknown section [" + name + "]", line);
        }
    }

    RunConfig cfg;
    detail::SectionReader lat(table, "lattice");
    detail::SectionReader dyn(table, "dynamics");
    detail::SectionReader exp(table, "experiment");
    detail::SectionReader out(table, "output");

    auto& e = cfg.experiment;
    e.kind = default_kind;
    if (auto s = exp.string("kind"))
    {
        if (*s == "simulate")
            e.kind = ExperimentKind::Simulate;
        else if (*s == "sweep")
            e.kind = ExperimentKind::Sweep;
        else if (*s == "input")
            e.kind = ExperimentKind::Input;
        else
            throw ValidationError("experiment.kind must be simulate|sweep|input", exp.line_of("kind"));
    }
    auto rethrow_at = [](auto& reader, std::string const& key, auto&& fn) {
        try
        {
            fn();
        }
        catch (ValidationError const&)
        {
            throw;
        }
        catch (InputError const& err)
        {
            throw ValidationError(err.what(), reader.line_of(key));
        }
    };
    if (auto s = exp.string("param"))
        rethrow_at(exp, "param", [&] { e.param = sweep_param_from_string(*s); });
    if (auto s = exp.string("pattern"))
        rethrow_at(exp, "pattern", [&] { e.pattern = pattern_from_string(*s); });
    if (auto const* arr = exp.array("values"))
    {
        for (auto const& item : arr->items)
            e.values.push_back(exp.as_number(item, "values"));
    }
    e.runs = exp.integer<std::size_t>("runs").value_or(e.kind == ExperimentKind::Input ? 100 : 20);
    if (auto const* arr = exp.array("tracked"))
    {
        if (arr->items.size() != 2)
            throw ValidationError("experiment.tracked must be [row, col]", exp.line_of("tracked"));
        e.tracked = Node{exp.as_integer<int>(arr->items[0], "tracked"),
                         exp.as_integer<int>(arr->items[1], "tracked")};
    }
    e.bin_width = exp.number("bin_width").value_or(e.bin_width);
    e.epsilon = exp.number("epsilon").value_or(e.epsilon);
    e.tail_bins = exp.integer<std::size_t>("tail_bins").value_or(e.tail_bins);
    e.q = exp.number("q").value_or(e.q);
    e.k = exp.number("k");
    e.threads = exp.integer<std::size_t>("threads").value_or(e.threads);

    auto& l = cfg.lattice;
    l.rows = lat.integer<int>("rows").value_or(l.rows);
    l.cols = lat.integer<int>("cols").value_or(l.cols);
    l.boundary = e.kind == ExperimentKind::Input ? Boundary::Open : Boundary::Periodic;
    if (auto s = lat.string("boundary"))
        rethrow_at(lat, "boundary", [&] { l.boundary = boundary_from_string(*s); });

    auto& d = cfg.dynamics;
    d.v0 = dyn.number("v0").value_or(d.v0);
    d.v = dyn.number("v").value_or(d.v);
    d.width = dyn.number("width").value_or(d.width);
    d.k_rate = dyn.number("k_rate").value_or(d.k_rate);
    d.dt = dyn.number("dt").value_or(d.dt);
    d.t_total = dyn.number("t_total").value_or(d.t_total);
    d.burn_in = dyn.number("burn_in").value_or(0.2 * d.t_total);
    d.a_init = dyn.number("a_init").value_or(d.a_init);
    d.seed = dyn.integer<std::uint64_t>("seed").value_or(d.seed);
    d.max_steps = dyn.integer<std::uint64_t>("max_steps").value_or(d.max_steps);

    if (auto s = out.string("dir"))
        cfg.output.dir = *s;
    if (auto const* arr = out.array("formats"))
    {
        cfg.output.formats.clear();
        for (auto const& item : arr->items)
        {
            if (item.type != detail::ConfigValue::Type::String
                || (item.text != "csv" && item.text != "dat" && item.text != "json"))
            {
                throw ValidationError("output.formats entries must be \"csv\", \"dat\" or \"json\"",
                                      item.line);
            }
            cfg.output.formats.push_back(item.text);
        }
    }

    lat.reject_unknown();
    dyn.reject_unknown();
    exp.reject_unknown();
    out.reject_unknown();

    // Attribute invariant violations to the line of the offending key.
    auto line_for = [&](std::string_view msg) -> std::size_t {
        for (auto key : {"v0", "v", "width", "k_rate", "dt", "t_total", "burn_in", "a_init"})
        {
            std::string prefix = std::string(key) + " must";
            if (msg.substr(0, prefix.size()) == prefix)
                return dyn.line_of(key);
        }
        for (auto key : {"rows", "cols"})
        {
            std::string prefix = std::string(key) + " must";
            if (msg.substr(0, prefix.size()) == prefix)
                return lat.line_of(key);
        }
        return 0;
    };
    try
    {
        validate(cfg.lattice);
        validate(cfg.dynamics);
    }
    catch (ValidationError const& err)
    {
        throw ValidationError(err.what(), line_for(err.what()));
    }

    if (e.runs == 0)
        throw ValidationError("runs must be at least 1", exp.line_of("runs"));
    if (!(e.bin_width >= 0))
        throw ValidationError("bin_width must be non-negative", exp.line_of("bin_width"));
    if (!(e.epsilon >= 0))
        throw ValidationError("epsilon must be non-negative", exp.line_of("epsilon"));
    if (e.tail_bins == 0)
        throw ValidationError("tail_bins must be at least 1", exp.line_of("tail_bins"));
    if (!(e.q > 0))
        throw ValidationError("q must be positive", exp.line_of("q"));
    if (e.k && !(*e.k > 0))
        throw ValidationError("k must be positive", exp.line_of("k"));
    if (e.tracked && !cfg.lattice.contains(*e.tracked))
        throw ValidationError("tracked node must lie inside the lattice", exp.line_of("tracked"));
    for (double v : e.values)
        if (!(v > 0))
            throw ValidationError("sweep values must be positive", exp.line_of("values"));
    return cfg;
}

/// Canonical text form; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(RunConfig const& c)
{
    using detail::format_double;
    using detail::quote;
    std::ostringstream os;
    os << "[lattice]\n"
       << "rows = " << c.lattice.rows << "\n"
       << "cols = " << c.lattice.cols << "\n"
       << "boundary = " << quote(to_string(c.lattice.boundary)) << "\n\n";
    auto const& d = c.dynamics;
    os << "[dynamics]\n"
       << "v0 = " << format_double(d.v0) << "\n"
       << "v = " << format_double(d.v) << "\n"
       << "width = " << format_double(d.width) << "\n"
       << "k_rate = " << format_double(d.k_rate) << "\n"
       << "dt = " << format_double(d.dt) << "\n"
       << "t_total = " << format_double(d.t_total) << "\n"
       << "burn_in = " << format_double(d.burn_in) << "\n"
       << "a_init = " << format_double(d.a_init) << "\n"
       << "seed = " << d.seed << "\n"
       << "max_steps = " << d.max_steps << "\n\n";
    auto const& e = c.experiment;
    os << "[experiment]\n"
       << "kind = " << quote(to_string(e.kind)) << "\n"
       << "param = " << quote(to_string(e.param)) << "\n"
       << "values = [";
    for (std::size_t i = 0; i < e.values.size(); ++i)
        os << (i ? ", " : "") << format_double(e.values[i]);
    os << "]\n"
       << "runs = " << e.runs << "\n"
       << "pattern = " << quote(to_string(e.pattern)) << "\n";
    if (e.tracked)
        os << "tracked = [" << e.tracked->row << ", " << e.tracked->col << "]\n";
    os << "bin_width = " << format_double(e.bin_width) << "\n"
       << "epsilon = " << format_double(e.epsilon) << "\n"
       << "tail_bins = " << e.tail_bins << "\n"
       << "q = " << format_double(e.q) << "\n";
    if (e.k)
        os << "k = " << format_double(*e.k) << "\n";
    os << "threads = " << e.threads << "\n\n";
    os << "[output]\n"
       << "dir = " << quote(c.output.dir) << "\n"
       << "formats = [";
    for (std::size_t i = 0; i < c.output.formats.size(); ++i)
        os << (i ? ", " : "") << quote(c.output.formats[i]);
    os << "]\n";
    return os.str();
}

}  // namespace qnet
