#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace qnet {

enum class Boundary
{
    Periodic,
    Open,
};

inline std::string_view to_string(Boundary b)
{
    return b == Boundary::Periodic ? "periodic" : "open";
}

inline Boundary boundary_from_string(std::string_view s)
{
    if (s == "periodic")
        return Boundary::Periodic;
    if (s == "open")
        return Boundary::Open;
    throw InputError("unknown boundary '" + std::string(s) + "' (expected periodic|open)");
}

struct Node
{
    int row = 0;
    int col = 0;

    friend bool operator==(Node const&, Node const&) = default;
    friend auto operator<=>(Node const&, Node const&) = default;
};

/// Flattened node index: row * cols + col.
using NodeIndex = std::uint32_t;

struct LatticeSpec
{
    int rows = 40;
    int cols = 40;
    Boundary boundary = Boundary::Periodic;

    friend bool operator==(LatticeSpec const&, LatticeSpec const&) = default;

    std::size_t size() const noexcept
    {
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }

    bool contains(Node n) const noexcept
    {
        return n.row >= 0 && n.row < rows && n.col >= 0 && n.col < cols;
    }

    NodeIndex index(Node n) const noexcept
    {
        return static_cast<NodeIndex>(n.row * cols + n.col);
    }

    Node node(NodeIndex i) const noexcept
    {
        return {static_cast<int>(i) / cols, static_cast<int>(i) % cols};
    }
};

inline void validate(LatticeSpec const& lat)
{
    if (lat.rows < 2)
        throw ValidationError("rows must be at least 2");
    if (lat.cols < 2)
        throw ValidationError("cols must be at least 2");
}

/// Von Neumann neighborhood in the order up, down, left, right (before
/// wrap-around), with duplicates removed for 2-wide periodic lattices.
inline std::vector<Node> neighbors(LatticeSpec const& lat, Node node)
{
    if (!lat.contains(node))
    {
        throw InputError("node (" + std::to_string(node.row) + ","
                         + std::to_string(node.col) + ") outside "
                         + std::to_string(lat.rows) + "x" + std::to_string(lat.cols)
                         + " lattice");
    }
    constexpr std::array<std::array<int, 2>, 4> offsets{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

    std::vector<Node> result;
    result.reserve(4);
    for (auto [dr, dc] : offsets)
    {
        Node n{node.row + dr, node.col + dc};
        if (lat.boundary == Boundary::Periodic)
        {
            n.row = (n.row + lat.rows) % lat.rows;
            n.col = (n.col + lat.cols) % lat.cols;
        }
        else if (!lat.contains(n))
        {
            continue;
        }
        if (n == node)
            continue;
        bool dup = false;
        for (auto const& r : result)
            dup = dup || r == n;
        if (!dup)
            result.push_back(n);
    }
    return result;
}

inline bool is_peripheral(LatticeSpec const& lat, Node n) noexcept
{
    return n.row == 0 || n.row == lat.rows - 1 || n.col == 0 || n.col == lat.cols - 1;
}

/// Outer ring of the lattice, defined geometrically regardless of boundary.
/// Ordered as a clockwise walk starting at (0,0): along row 0, down the last
/// column, back along the last row, up column 0.
inline std::vector<Node> peripheral_nodes(LatticeSpec const& lat)
{
    validate(lat);
    std::vector<Node> ring;
    ring.reserve(static_cast<std::size_t>(2 * lat.rows + 2 * lat.cols - 4));
    for (int c = 0; c < lat.cols; ++c)
        ring.push_back({0, c});
    for (int r = 1; r < lat.rows; ++r)
        ring.push_back({r, lat.cols - 1});
    for (int c = lat.cols - 2; c >= 0; --c)
        ring.push_back({lat.rows - 1, c});
    for (int r = lat.rows - 2; r >= 1; --r)
        ring.push_back({r, 0});
    return ring;
}

/// Flat neighbor table: four slots per node, unused slots hold size() as a
/// sentinel so callers can index a padded array without branching.
class NeighborTable
{
  public:
    explicit NeighborTable(LatticeSpec const& lat) : sentinel_(static_cast<NodeIndex>(lat.size()))
    {
        validate(lat);
        slots_.assign(lat.size() * 4, sentinel_);
        for (NodeIndex i = 0; i < lat.size(); ++i)
        {
            auto nb = neighbors(lat, lat.node(i));
            for (std::size_t k = 0; k < nb.size(); ++k)
                slots_[i * 4 + k] = lat.index(nb[k]);
        }
    }

    NodeIndex const* of(NodeIndex i) const noexcept { return slots_.data() + i * 4; }
    NodeIndex sentinel() const noexcept { return sentinel_; }

  private:
    NodeIndex sentinel_;
    std::vector<NodeIndex> slots_;
};

}  // namespace qnet
