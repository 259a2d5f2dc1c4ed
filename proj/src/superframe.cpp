#include "oscmac/channel.hpp"
#include "oscmac/mac_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace oscmac {

std::string_view to_string(SlotKind k) noexcept
{
    switch (k) {
    case SlotKind::free: return "free";
    case SlotKind::control: return "control";
    case SlotKind::ct_rdv: return "ct_rdv";
    case SlotKind::noct_rdv: return "noct_rdv";
    }
    return "unknown";
}

std::string_view to_string(PacketKind k) noexcept
{
    switch (k) {
    case PacketKind::data: return "data";
    case PacketKind::ct_request: return "ct_request";
    case PacketKind::candidate_reply: return "candidate_reply";
    case PacketKind::superframe: return "superframe";
    case PacketKind::ct_ack: return "ct_ack";
    case PacketKind::noct_request: return "noct_request";
    case PacketKind::noct_reply: return "noct_reply";
    case PacketKind::data_ack: return "data_ack";
    }
    return "unknown";
}

std::vector<const SuperframeSlot*> Superframe::ct_slots() const
{
    std::vector<const SuperframeSlot*> out;
    for (const auto& s : slots) {
        if (s.kind == SlotKind::ct_rdv) {
            out.push_back(&s);
        }
    }
    return out;
}

std::vector<NodeId> Superframe::participants() const
{
    std::vector<NodeId> out;
    out.reserve(helpers.size() + 2);
    out.push_back(transmitter);
    out.insert(out.end(), helpers.begin(), helpers.end());
    out.push_back(next_hop);
    return out;
}

bool Superframe::has_participant(NodeId id) const
{
    return id == transmitter || id == next_hop || std::find(helpers.begin(), helpers.end(), id) != helpers.end();
}

Superframe compose_superframe(NodeId transmitter, const ElectedList& elected, NodeId next_hop,
                              std::uint32_t packet_count, SimTime now, const SuperframeParams& params,
                              std::uint64_t id)
{
    if (params.slot_duration <= SimTime::zero() || params.frame_length <= SimTime::zero()) {
        throw std::invalid_argument("compose_superframe: slot and frame durations must be positive");
    }
    Superframe sf;
    sf.id = id;
    sf.transmitter = transmitter;
    sf.next_hop = next_hop;
    sf.helpers = elected.helpers;
    sf.leader = elected.leader;
    sf.origin = now;
    sf.frame_length = params.frame_length;

    if (packet_count == 0) {
        sf.slots.push_back({SlotKind::free, now, params.frame_length, {}});
        return sf;
    }
    if (elected.empty()) {
        throw std::invalid_argument("compose_superframe: CT superframe needs at least one helper");
    }

    const auto participants = sf.participants();
    sf.slots.push_back({SlotKind::control, now, params.slot_duration, participants});
    for (std::uint32_t i = 0; i < packet_count; ++i) {
        sf.slots.push_back({SlotKind::ct_rdv, now + params.slot_duration * (1 + i), params.slot_duration, participants});
    }
    const SimTime used = params.slot_duration * (1 + packet_count);
    if (used < params.frame_length) {
        sf.slots.push_back({SlotKind::free, now + used, params.frame_length - used, {}});
    } else if (used > params.frame_length) {
        sf.continuation = true;
    }
    return sf;
}

void validate_superframe(const Superframe& sf)
{
    std::set<NodeId> expected(sf.helpers.begin(), sf.helpers.end());
    expected.insert(sf.transmitter);
    expected.insert(sf.next_hop);
    for (std::size_t i = 0; i < sf.slots.size(); ++i) {
        const auto& s = sf.slots[i];
        if (s.duration <= SimTime::zero()) {
            throw std::logic_error("superframe slot with non-positive duration");
        }
        if (i > 0 && sf.slots[i - 1].interval().end() > s.start) {
            throw std::logic_error("superframe slots overlap or are out of order");
        }
        if (s.kind == SlotKind::ct_rdv) {
            const std::set<NodeId> got(s.participants.begin(), s.participants.end());
            if (got != expected) {
                throw std::logic_error("ct_rdv participants differ from transmitter + helpers + next hop");
            }
        }
    }
}

bool MacState::has_overlap(const Interval& interval) const noexcept
{
    return std::any_of(reservations.begin(), reservations.end(),
                       [&](const Reservation& r) { return r.interval.overlaps(interval); });
}

const Reservation* MacState::find_reservation(std::uint64_t rendezvous, std::uint32_t slot) const noexcept
{
    for (const auto& r : reservations) {
        if (r.rendezvous == rendezvous && r.slot_index == slot) {
            return &r;
        }
    }
    return nullptr;
}

SuperframeResponse on_superframe(MacState node, const Superframe& sf, std::uint64_t control_bits)
{
    SuperframeResponse out{std::move(node), false, std::nullopt};
    auto& st = out.state;
    if (!st.alive || !sf.has_participant(st.node) || st.node == sf.transmitter) {
        return out;
    }
    st.awaiting_superframe = false;
    const bool is_helper = st.node != sf.next_hop;
    const auto role = is_helper ? ReservationRole::helper : ReservationRole::receiver;
    const auto slots = sf.ct_slots();

    if (is_helper) {
        // A helper joins the whole rendezvous or none of it.
        for (const auto* slot : slots) {
            if (st.has_overlap(slot->interval())) {
                return out;
            }
        }
    }
    std::uint32_t index = 0;
    for (const auto* slot : slots) {
        if (!st.has_overlap(slot->interval())) {
            st.reservations.push_back({slot->interval(), SlotKind::ct_rdv, role, sf.transmitter, sf.id, index});
            out.stored = true;
        }
        ++index;
    }
    if (is_helper && out.stored && sf.leader == st.node) {
        Packet ack;
        ack.seq = st.next_seq++;
        ack.size_bits = control_bits;
        ack.source = st.node;
        ack.destination = sf.transmitter;
        ack.kind = PacketKind::ct_ack;
        ack.flow_seq = sf.id;
        out.ct_ack = ack;
    }
    return out;
}

bool can_reserve(const MacState& node, const Interval& interval) noexcept
{
    return node.alive && !node.has_overlap(interval);
}

ReserveOutcome reserve_noct(MacState& sender, MacState& next_hop, const Interval& interval,
                            std::uint64_t rendezvous)
{
    if (!can_reserve(next_hop, interval)) {
        return ReserveOutcome::reject;
    }
    next_hop.reservations.push_back(
        {interval, SlotKind::noct_rdv, ReservationRole::receiver, sender.node, rendezvous, 0});
    sender.reservations.push_back(
        {interval, SlotKind::noct_rdv, ReservationRole::sender, next_hop.node, rendezvous, 0});
    return ReserveOutcome::accept;
}

CtTransferOutcome ct_transfer(const CtParticipant& transmitter, std::span<const CtParticipant> helpers,
                              const CtParticipant& next_hop, std::uint64_t bits,
                              const RadioEnergyParams& params, double base_range)
{
    CtTransferOutcome out;
    if (!transmitter.alive) {
        return out;
    }
    std::vector<const CtParticipant*> survivors;
    for (const auto& h : helpers) {
        if (h.alive && in_reach(transmitter.position, h.position, base_range)) {
            survivors.push_back(&h);
        }
    }

    if (!survivors.empty()) {
        double farthest = 0.0;
        for (const auto* h : survivors) {
            farthest = std::max(farthest, distance(transmitter.position, h->position));
        }
        out.charges.push_back({transmitter.id, EnergyCategory::transmit, tx_energy(bits, farthest, params)});
        for (const auto* h : survivors) {
            out.charges.push_back({h->id, EnergyCategory::receive, rx_energy(bits, params)});
        }
    }

    std::vector<Position> senders;
    out.cooperating.push_back(transmitter.id);
    senders.push_back(transmitter.position);
    out.charges.push_back({transmitter.id, EnergyCategory::transmit,
                           tx_energy(bits, distance(transmitter.position, next_hop.position), params)});
    for (const auto* h : survivors) {
        out.cooperating.push_back(h->id);
        senders.push_back(h->position);
        out.charges.push_back(
            {h->id, EnergyCategory::transmit, tx_energy(bits, distance(h->position, next_hop.position), params)});
    }
    out.delivered = next_hop.alive && ct_reach(senders, next_hop.position, base_range, params);
    return out;
}

} // namespace oscmac
