#include "oscmac/energy_model.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace oscmac {

double distance(Position a, Position b) noexcept
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

void RadioEnergyParams::validate() const
{
    auto check = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("radio.") + name + " must be strictly positive");
        }
    };
    check(e_elec, "e_elec");
    check(e_fs, "e_fs");
    check(e_mp, "e_mp");
    check(e_rx, "e_rx");
    check(p_rx, "p_rx");
    check(p_sleep, "p_sleep");
    if (!std::isfinite(crossover_distance(*this))) {
        throw std::invalid_argument("radio: crossover distance sqrt(e_fs/e_mp) is not finite");
    }
}

std::string_view to_string(EnergyCategory c) noexcept
{
    switch (c) {
    case EnergyCategory::transmit: return "transmit";
    case EnergyCategory::receive: return "receive";
    case EnergyCategory::idle_listen: return "idle_listen";
    case EnergyCategory::sleep: return "sleep";
    case EnergyCategory::overhear: return "overhear";
    }
    return "unknown";
}

double crossover_distance(const RadioEnergyParams& params) noexcept
{
    return std::sqrt(params.e_fs / params.e_mp);
}

Joules tx_energy(std::uint64_t bits, double distance, const RadioEnergyParams& params) noexcept
{
    const auto l = static_cast<double>(bits);
    if (distance >= crossover_distance(params)) {
        const double d2 = distance * distance;
        return l * params.e_elec + l * params.e_mp * (d2 * d2);
    }
    return l * params.e_elec + l * params.e_fs * (distance * distance);
}

Joules rx_energy(std::uint64_t bits, const RadioEnergyParams& params) noexcept
{
    return static_cast<double>(bits) * params.e_rx;
}

Joules idle_energy(SimTime duration, const RadioEnergyParams& params) noexcept
{
    return to_seconds(duration) * params.p_rx;
}

Joules sleep_energy(SimTime duration, const RadioEnergyParams& params) noexcept
{
    return to_seconds(duration) * params.p_sleep;
}

void CompensatedSum::add(double x) noexcept
{
    const double t = sum + x;
    carry += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
}

Battery Battery::full(Joules initial_energy)
{
    if (!(initial_energy > 0.0)) {
        throw std::invalid_argument("battery initial energy must be positive");
    }
    Battery b;
    b.initial = initial_energy;
    b.residual = initial_energy;
    return b;
}

Joules Battery::consumed_total() const noexcept
{
    return std::accumulate(consumed.begin(), consumed.end(), 0.0);
}

DrainResult drain(const Battery& battery, Joules amount, EnergyCategory category)
{
    if (amount < 0.0) {
        throw std::invalid_argument("drain amount must be non-negative");
    }
    DrainResult out{battery, 0.0, false, false};
    if (!battery.alive) {
        out.was_dead = true;
        return out;
    }
    const Joules drawn = amount < battery.residual ? amount : battery.residual;
    out.drawn = drawn;
    out.battery.consumed[static_cast<std::size_t>(category)] += drawn;
    out.battery.drawn.add(drawn);
    const Joules left = battery.initial - out.battery.drawn.value();
    if ((drawn == battery.residual && amount > 0.0) || left <= 0.0) {
        out.battery.residual = 0.0;
        out.battery.alive = false;
        out.died = true;
    } else {
        out.battery.residual = left;
    }
    return out;
}

} // namespace oscmac
