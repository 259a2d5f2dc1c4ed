#include "oscmac/helper_selection.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace oscmac {

void CtRequest::validate() const
{
    if (packet_size_bytes == 0) {
        throw SelectionError("ct_request.packet_size_bytes must be positive");
    }
    if (packet_count == 0) {
        throw SelectionError("ct_request.packet_count must be positive");
    }
    if (!(next_hop_distance >= 0.0)) {
        throw SelectionError("ct_request.next_hop_distance must be non-negative");
    }
}

Joules candidate_threshold(const CtRequest& request, const RadioEnergyParams& params) noexcept
{
    const auto bits = static_cast<double>(request.packet_bits());
    const double d = request.next_hop_distance;
    return params.e_elec * bits + params.e_fs * bits * (d * d);
}

std::vector<CandidateRecord> filter_candidates(std::span<const CandidateRecord> neighbors,
                                               const CtRequest& request,
                                               const RadioEnergyParams& params)
{
    request.validate();
    for (std::size_t i = 1; i < neighbors.size(); ++i) {
        if (neighbors[i].energy > neighbors[i - 1].energy) {
            throw SelectionError("filter_candidates: neighbours not sorted by descending energy at index " +
                                 std::to_string(i));
        }
    }
    const Joules threshold = candidate_threshold(request, params);
    std::vector<CandidateRecord> out;
    // Full scan: per-node records may differ, so a failure does not end the list.
    for (const auto& rec : neighbors) {
        if (rec.energy >= threshold) {
            out.push_back(rec);
        }
    }
    return out;
}

NodeId leader_helper(std::span<const CandidateRecord> elected)
{
    if (elected.empty()) {
        throw SelectionError("leader_helper: empty elected list");
    }
    const CandidateRecord* best = &elected.front();
    for (const auto& rec : elected.subspan(1)) {
        if (rec.energy > best->energy || (rec.energy == best->energy && rec.node < best->node)) {
            best = &rec;
        }
    }
    return best->node;
}

ElectedList elect_helpers(std::span<const CandidateRecord> candidates, std::uint32_t packet_count)
{
    if (packet_count == 0) {
        throw SelectionError("elect_helpers: packet count must be at least 1");
    }
    std::vector<CandidateRecord> elected;
    std::set<NodeId> seen;
    for (const auto& rec : candidates) {
        if (!(rec.per_packet_tx_energy > 0.0)) {
            throw SelectionError("elect_helpers: candidate " + to_string(rec.node) +
                                 " has non-positive per-packet transmit energy");
        }
        const double ratio = rec.energy / (static_cast<double>(packet_count) * rec.per_packet_tx_energy);
        if (ratio >= 1.0 && seen.insert(rec.node).second) {
            elected.push_back(rec);
        }
    }
    ElectedList out;
    out.helpers.reserve(elected.size());
    for (const auto& rec : elected) {
        out.helpers.push_back(rec.node);
    }
    if (!elected.empty()) {
        out.leader = leader_helper(elected);
    }
    return out;
}

std::vector<CandidateRecord> rank_candidates(const CtRequest& request, const EnergyRegistry& registry,
                                             const RadioEnergyParams& params, std::vector<NodeId>* unknown)
{
    const auto requester = registry.find(request.requester);
    const Joules per_packet = tx_energy(request.packet_bits(), request.next_hop_distance, params);
    std::vector<CandidateRecord> records;
    records.reserve(request.neighbor_ids.size());
    for (NodeId id : request.neighbor_ids) {
        const auto it = registry.find(id);
        if (it == registry.end()) {
            if (unknown != nullptr) {
                unknown->push_back(id);
            }
            continue;
        }
        CandidateRecord rec;
        rec.node = id;
        rec.energy = it->second.residual;
        rec.per_packet_tx_energy = per_packet;
        rec.distance_to_requester =
            requester != registry.end() ? distance(requester->second.position, it->second.position) : 0.0;
        records.push_back(rec);
    }
    std::stable_sort(records.begin(), records.end(), [](const CandidateRecord& a, const CandidateRecord& b) {
        if (a.energy != b.energy) {
            return a.energy > b.energy;
        }
        return a.node < b.node;
    });
    return records;
}

CtReply handle_ct_request(const CtRequest& request, const EnergyRegistry& registry,
                          const RadioEnergyParams& params)
{
    request.validate();
    CtReply reply;
    const auto ranked = rank_candidates(request, registry, params, &reply.unknown_neighbors);
    const auto filtered = filter_candidates(ranked, request, params);
    reply.elected = elect_helpers(filtered, request.packet_count);
    return reply;
}

} // namespace oscmac
