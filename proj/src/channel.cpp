#include "oscmac/channel.hpp"

#include <algorithm>
#include <cmath>

namespace oscmac {

bool in_reach(Position sender, Position receiver, double base_range) noexcept
{
    return distance(sender, receiver) <= base_range;
}

bool ct_reach(std::span<const Position> senders, Position receiver, double base_range, double alpha) noexcept
{
    if (senders.empty()) {
        return false;
    }
    if (senders.size() == 1) {
        // (R/d)^alpha >= 1 reduces to d <= R; compare directly so the boundary is exact.
        return in_reach(senders.front(), receiver, base_range);
    }
    double power = 0.0;
    for (const auto& s : senders) {
        const double d = distance(s, receiver);
        if (d == 0.0) {
            return true;
        }
        power += std::pow(base_range / d, alpha);
    }
    return power >= 1.0;
}

double path_loss_exponent(std::span<const Position> senders, Position receiver,
                          const RadioEnergyParams& params) noexcept
{
    double farthest = 0.0;
    for (const auto& s : senders) {
        farthest = std::max(farthest, distance(s, receiver));
    }
    return farthest >= crossover_distance(params) ? 4.0 : 2.0;
}

bool ct_reach(std::span<const Position> senders, Position receiver, double base_range,
              const RadioEnergyParams& params) noexcept
{
    return ct_reach(senders, receiver, base_range, path_loss_exponent(senders, receiver, params));
}

} // namespace oscmac
