#include "oscmac/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace oscmac {

std::string_view to_string(Role r) noexcept
{
    switch (r) {
    case Role::trn: return "trn";
    case Role::relay: return "relay";
    case Role::helper: return "helper";
    case Role::fr: return "fr";
    case Role::wilem: return "wilem";
    }
    return "unknown";
}

std::optional<Role> role_from_string(std::string_view s) noexcept
{
    for (Role r : {Role::trn, Role::relay, Role::helper, Role::fr, Role::wilem}) {
        if (to_string(r) == s) {
            return r;
        }
    }
    return std::nullopt;
}

Topology Topology::build(std::vector<NodeSpec> nodes, double base_range)
{
    if (nodes.empty()) {
        throw TopologyError("topology has no nodes");
    }
    if (!(base_range > 0.0)) {
        throw TopologyError("base_range must be positive");
    }
    std::sort(nodes.begin(), nodes.end(), [](const NodeSpec& a, const NodeSpec& b) { return a.id < b.id; });
    const auto n = nodes.size();

    Topology t;
    t.base_range = base_range;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& spec = nodes[i];
        if (to_index(spec.id) != i) {
            throw TopologyError("node ids must be 0.." + std::to_string(n - 1) + " without gaps or repeats; found id " +
                                to_string(spec.id) + " at position " + std::to_string(i));
        }
        if (!std::isfinite(spec.position.x) || !std::isfinite(spec.position.y)) {
            throw TopologyError("node " + to_string(spec.id) + ": position is not finite");
        }
        if (!(spec.initial_energy > 0.0) || !std::isfinite(spec.initial_energy)) {
            throw TopologyError("node " + to_string(spec.id) + ": initial_energy must be positive");
        }
        if (spec.role == Role::fr) {
            if (t.final_receiver != kNoNode) {
                throw TopologyError("more than one node has role fr");
            }
            t.final_receiver = spec.id;
        }
        if (spec.role == Role::wilem) {
            if (t.station != kNoNode) {
                throw TopologyError("more than one node has role wilem");
            }
            t.station = spec.id;
        }
    }
    if (t.final_receiver == kNoNode) {
        throw TopologyError("no node has role fr");
    }
    if (t.station == kNoNode) {
        throw TopologyError("no node has role wilem");
    }
    t.nodes = std::move(nodes);

    t.neighbors.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (t.nodes[i].role == Role::wilem || t.nodes[j].role == Role::wilem) {
                continue;
            }
            if (in_reach(t.nodes[i].position, t.nodes[j].position, base_range)) {
                t.neighbors[i].push_back(t.nodes[j].id);
                t.neighbors[j].push_back(t.nodes[i].id);
            }
        }
    }

    // Hop distance to the FR over the unit-disk graph.
    std::vector<int> hops(n, -1);
    std::deque<std::uint32_t> queue{to_index(t.final_receiver)};
    hops[to_index(t.final_receiver)] = 0;
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (NodeId v : t.neighbors[u]) {
            if (hops[to_index(v)] < 0) {
                hops[to_index(v)] = hops[u] + 1;
                queue.push_back(to_index(v));
            }
        }
    }

    t.next_hop.assign(n, kNoNode);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& spec = t.nodes[i];
        if (spec.role == Role::fr || spec.role == Role::wilem) {
            if (spec.next_hop) {
                throw TopologyError("node " + to_string(spec.id) + ": role " + std::string(to_string(spec.role)) +
                                    " cannot have a next_hop");
            }
            continue;
        }
        if (spec.next_hop) {
            const NodeId nh = *spec.next_hop;
            if (to_index(nh) >= n || nh == spec.id || nh == t.station) {
                throw TopologyError("node " + to_string(spec.id) + ": invalid next_hop " + to_string(nh));
            }
            t.next_hop[i] = nh;
            continue;
        }
        if (hops[i] > 0) {
            NodeId best = kNoNode;
            for (NodeId v : t.neighbors[i]) {
                if (hops[to_index(v)] == hops[i] - 1 && (best == kNoNode || v < best)) {
                    best = v;
                }
            }
            t.next_hop[i] = best;
        }
    }

    // Follow each chain; a chain that never reaches the FR leaves the node unrouted.
    t.depth.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (t.next_hop[i] == kNoNode) {
            continue;
        }
        int steps = 0;
        NodeId cur = t.nodes[i].id;
        while (cur != t.final_receiver && cur != kNoNode) {
            cur = t.next_hop[to_index(cur)];
            if (++steps > static_cast<int>(n)) {
                throw TopologyError("routing loop through node " + to_string(t.nodes[i].id));
            }
        }
        t.depth[i] = cur == t.final_receiver ? steps : 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (t.next_hop[i] != kNoNode && t.depth[i] == 0) {
            t.next_hop[i] = kNoNode;
        }
    }
    return t;
}

SlotResolution resolve_slot(std::span<const SlotTransmission> transmissions, std::span<const SlotReceiver> receivers,
                            double base_range, const RadioEnergyParams& params)
{
    SlotResolution out;
    for (const auto& rx : receivers) {
        ReceiverOutcome o{rx.id, ReceptionOutcome::silent, std::nullopt};
        if (rx.awake) {
            std::vector<const SlotTransmission*> audible;
            for (const auto& tx : transmissions) {
                if (ct_reach(tx.senders, rx.position, base_range, params)) {
                    audible.push_back(&tx);
                }
            }
            if (audible.size() == 1) {
                const auto& tx = *audible.front();
                const bool addressed = std::find(tx.addressed.begin(), tx.addressed.end(), rx.id) != tx.addressed.end();
                o.outcome = addressed ? ReceptionOutcome::decoded : ReceptionOutcome::overheard;
                o.rendezvous = tx.rendezvous;
            } else if (audible.size() > 1) {
                o.outcome = ReceptionOutcome::collision;
                ++out.collisions;
                out.lost += audible.size();
            }
        }
        out.outcomes.push_back(o);
    }
    return out;
}

} // namespace oscmac
