#pragma once

#include "oscmac/energy_model.hpp"
#include "oscmac/types.hpp"

#include <span>

namespace oscmac {

/// Closed unit disk: true iff the Euclidean distance is at most base_range.
bool in_reach(Position sender, Position receiver, double base_range) noexcept;

/// Aggregate reach of simultaneous equal-power senders: sum_i (R / d_i)^alpha >= 1.
/// A sender co-located with the receiver closes the link. An empty sender set never does.
bool ct_reach(std::span<const Position> senders, Position receiver, double base_range, double alpha) noexcept;

/// Path-loss exponent for a sender group: 4 when the farthest sender is at or beyond d0, else 2.
double path_loss_exponent(std::span<const Position> senders, Position receiver,
                          const RadioEnergyParams& params) noexcept;

/// ct_reach with the exponent picked by path_loss_exponent.
bool ct_reach(std::span<const Position> senders, Position receiver, double base_range,
              const RadioEnergyParams& params) noexcept;

} // namespace oscmac
