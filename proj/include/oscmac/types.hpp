#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>

namespace oscmac {

/// Node identifier. Strongly typed so it cannot be mixed up with counts or indices.
enum class NodeId : std::uint32_t {};

inline constexpr NodeId kNoNode{std::numeric_limits<std::uint32_t>::max()};

constexpr std::uint32_t to_index(NodeId id) noexcept { return static_cast<std::uint32_t>(id); }

inline std::string to_string(NodeId id) { return std::to_string(to_index(id)); }

/// Simulation time. Integer microseconds keep event ordering and trace equality exact.
using SimTime = std::chrono::microseconds;

using Joules = double;

constexpr double to_seconds(SimTime t) noexcept { return static_cast<double>(t.count()) * 1e-6; }

/// Rounds to the nearest microsecond.
inline SimTime from_seconds(double s)
{
    return SimTime{static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5))};
}

struct Position
{
    double x{0.0};
    double y{0.0};

    friend bool operator==(const Position&, const Position&) = default;
};

double distance(Position a, Position b) noexcept;

} // namespace oscmac
