#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qnet {

/// Invalid argument to an operation (bad node, degenerate coefficient, ...).
class InputError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// A parameter set violates a named invariant. The message is the invariant.
class ValidationError : public InputError
{
  public:
    explicit ValidationError(std::string const& what, std::size_t line = 0)
        : InputError(line ? "line " + std::to_string(line) + ": " + what : what)
        , line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Malformed configuration text.
class SyntaxError : public InputError
{
  public:
    SyntaxError(std::string const& what, std::size_t line, std::size_t column)
        : InputError("line " + std::to_string(line) + ", column "
                     + std::to_string(column) + ": " + what)
        , line_(line)
        , column_(column)
    {
    }

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

  private:
    std::size_t line_;
    std::size_t column_;
};

/// Too few spikes to form a statistic.
class InsufficientData : public std::runtime_error
{
  public:
    InsufficientData(std::string const& what, std::size_t events, std::size_t intervals)
        : std::runtime_error(what + " (events=" + std::to_string(events)
                             + ", intervals=" + std::to_string(intervals) + ")")
        , events_(events)
        , intervals_(intervals)
    {
    }

    std::size_t events() const noexcept { return events_; }
    std::size_t intervals() const noexcept { return intervals_; }

  private:
    std::size_t events_;
    std::size_t intervals_;
};

/// A request exceeds a configured resource budget.
class ResourceError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace qnet
