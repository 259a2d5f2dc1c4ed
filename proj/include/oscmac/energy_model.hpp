#pragma once

#include "oscmac/types.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace oscmac {

/// First-order radio model constants. Idle listening draws p_rx; there is no separate field for it.
struct RadioEnergyParams
{
    double e_elec{50e-9};     ///< J/bit, transmitter electronics
    double e_fs{10e-12};      ///< J/bit/m^2, free-space amplifier
    double e_mp{0.0013e-12};  ///< J/bit/m^4, multipath amplifier
    double e_rx{50e-9};       ///< J/bit, receive
    double p_rx{1e-3};        ///< J/s, receive (and idle listening) draw
    double p_sleep{1e-8};     ///< J/s, sleep draw

    /// Throws std::invalid_argument naming the first non-positive field.
    void validate() const;

    friend bool operator==(const RadioEnergyParams&, const RadioEnergyParams&) = default;
};

enum class EnergyCategory : std::uint8_t { transmit, receive, idle_listen, sleep, overhear };

inline constexpr std::size_t kEnergyCategoryCount = 5;

std::string_view to_string(EnergyCategory c) noexcept;

double crossover_distance(const RadioEnergyParams& params) noexcept;

/// Energy to send `bits` over `distance` metres: d^2 amplifier below the crossover, d^4 at or above it.
Joules tx_energy(std::uint64_t bits, double distance, const RadioEnergyParams& params) noexcept;

Joules rx_energy(std::uint64_t bits, const RadioEnergyParams& params) noexcept;

Joules idle_energy(SimTime duration, const RadioEnergyParams& params) noexcept;

Joules sleep_energy(SimTime duration, const RadioEnergyParams& params) noexcept;

/// Neumaier-compensated running sum; keeps long drain histories exact to a few ulps.
struct CompensatedSum
{
    double sum{0.0};
    double carry{0.0};

    void add(double x) noexcept;
    double value() const noexcept { return sum + carry; }
};

struct Battery
{
    Joules initial{0.0};
    Joules residual{0.0};
    std::array<Joules, kEnergyCategoryCount> consumed{};
    bool alive{true};
    CompensatedSum drawn;  ///< residual is derived from this, not decremented in place

    static Battery full(Joules initial_energy);

    Joules consumed_in(EnergyCategory c) const noexcept { return consumed[static_cast<std::size_t>(c)]; }
    Joules consumed_total() const noexcept;
};

struct DrainResult
{
    Battery battery;
    Joules drawn{0.0};
    bool was_dead{false};  ///< the battery was already dead; nothing changed
    bool died{false};      ///< this drain emptied the battery
};

/// Draws min(amount, residual) and books it under `category`. Draining a dead battery is a no-op.
DrainResult drain(const Battery& battery, Joules amount, EnergyCategory category);

} // namespace oscmac
