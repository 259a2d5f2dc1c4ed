#pragma once

#include "oscmac/energy_model.hpp"
#include "oscmac/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace oscmac {

/// Thrown when a selection input breaks its documented precondition.
class SelectionError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// Payload a transmitter sends to the Wi-LEM station.
struct CtRequest
{
    NodeId requester{};
    std::uint32_t packet_size_bytes{0};  ///< S, octets per packet
    std::uint32_t packet_count{0};       ///< N, packets to move in the CT phase
    double next_hop_distance{0.0};       ///< D, metres
    std::vector<NodeId> neighbor_ids;

    void validate() const;
    std::uint64_t packet_bits() const noexcept { return std::uint64_t{8} * packet_size_bytes; }
};

struct CandidateRecord
{
    NodeId node{};
    Joules energy{0.0};               ///< residual measured by the station
    Joules per_packet_tx_energy{0.0}; ///< cost for this node to send one packet in the CT phase
    double distance_to_requester{0.0};
};

struct ElectedList
{
    std::vector<NodeId> helpers;  ///< descending energy
    std::optional<NodeId> leader;

    bool empty() const noexcept { return helpers.empty(); }
    friend bool operator==(const ElectedList&, const ElectedList&) = default;
};

/// Keeps the records whose energy covers e_elec*S_bits + e_fs*S_bits*D^2.
/// The input must be sorted by descending energy; order is preserved.
std::vector<CandidateRecord> filter_candidates(std::span<const CandidateRecord> neighbors,
                                               const CtRequest& request,
                                               const RadioEnergyParams& params);

/// Threshold evaluated by filter_candidates. D is squared even beyond the crossover distance.
Joules candidate_threshold(const CtRequest& request, const RadioEnergyParams& params) noexcept;

/// Keeps candidates with energy / (N * per_packet_tx_energy) >= 1.
ElectedList elect_helpers(std::span<const CandidateRecord> candidates, std::uint32_t packet_count);

/// Max energy, ties to the smallest id.
NodeId leader_helper(std::span<const CandidateRecord> elected);

/// What the station knows about one node.
struct NodeReading
{
    Joules residual{0.0};
    Position position{};
};

/// Station view of the network, updated whenever a battery changes.
using EnergyRegistry = std::map<NodeId, NodeReading>;

struct CtReply
{
    ElectedList elected;
    std::vector<NodeId> unknown_neighbors;  ///< listed but not measurable; skipped
};

/// Station-side composition: rank neighbours, filter, then elect.
CtReply handle_ct_request(const CtRequest& request, const EnergyRegistry& registry,
                          const RadioEnergyParams& params);

/// Records built by the station for a request, sorted by (energy desc, id asc).
std::vector<CandidateRecord> rank_candidates(const CtRequest& request, const EnergyRegistry& registry,
                                             const RadioEnergyParams& params,
                                             std::vector<NodeId>* unknown = nullptr);

} // namespace oscmac
