#include "oscmac/mac_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oscmac {

std::string_view to_string(Phase p) noexcept
{
    switch (p) {
    case Phase::Sleeping: return "Sleeping";
    case Phase::IdleListening: return "IdleListening";
    case Phase::AwaitingCandidates: return "AwaitingCandidates";
    case Phase::AwaitingCtAck: return "AwaitingCtAck";
    case Phase::AwaitingNoCtReply: return "AwaitingNoCtReply";
    case Phase::CtBroadcast: return "CtBroadcast";
    case Phase::CtCooperative: return "CtCooperative";
    case Phase::Receiving: return "Receiving";
    case Phase::Transmitting: return "Transmitting";
    }
    return "unknown";
}

std::string_view to_string(CtMode m) noexcept
{
    switch (m) {
    case CtMode::ct: return "ct";
    case CtMode::noct: return "noct";
    case CtMode::automatic: return "auto";
    }
    return "unknown";
}

std::string_view event_name(const MacEventBody& body) noexcept
{
    struct Namer
    {
        std::string_view operator()(const mac_event::WindowStart&) const { return "window_start"; }
        std::string_view operator()(const mac_event::WindowEnd&) const { return "window_end"; }
        std::string_view operator()(const mac_event::PacketGenerated&) const { return "packet_generated"; }
        std::string_view operator()(const mac_event::SendOpportunity&) const { return "send_opportunity"; }
        std::string_view operator()(const mac_event::PacketReceived&) const { return "packet_received"; }
        std::string_view operator()(const mac_event::TxDone&) const { return "tx_done"; }
        std::string_view operator()(const mac_event::Timeout&) const { return "timeout"; }
        std::string_view operator()(const mac_event::SlotStart&) const { return "slot_start"; }
        std::string_view operator()(const mac_event::CoopStart&) const { return "coop_start"; }
        std::string_view operator()(const mac_event::SlotEnd&) const { return "slot_end"; }
        std::string_view operator()(const mac_event::CandidateReply&) const { return "candidate_reply"; }
        std::string_view operator()(const mac_event::StationNotify&) const { return "station_notify"; }
        std::string_view operator()(const mac_event::NotifyExpired&) const { return "notify_expired"; }
        std::string_view operator()(const mac_event::DeferredSend&) const { return "deferred_send"; }
    };
    return std::visit(Namer{}, body);
}

SimTime MacConfig::airtime(std::uint64_t bits) const noexcept
{
    return SimTime{static_cast<std::int64_t>(std::ceil(static_cast<double>(bits) * 1e6 / bitrate_bps))};
}

SimTime MacConfig::minislot() const noexcept
{
    return airtime(std::max(superframe_bits, control_bits)) + airtime(control_bits) + guard * 2;
}

void MacConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ScheduleError("mac: " + msg); };
    if (frame_length <= SimTime::zero() || active_window <= SimTime::zero() || slot_duration <= SimTime::zero()) {
        fail("frame_length, active_window and slot_duration must be positive");
    }
    if (active_window > frame_length) {
        fail("active_window exceeds frame_length");
    }
    if (active_window < slot_duration) {
        fail("active_window must hold at least the control slot");
    }
    if (guard < SimTime::zero()) {
        fail("guard must be non-negative");
    }
    if (!(bitrate_bps > 0.0)) {
        fail("bitrate_bps must be positive");
    }
    if (contention_slots == 0) {
        fail("contention_slots must be at least 1");
    }
    if (minislot() * contention_slots > slot_duration) {
        fail("contention minislots (" + std::to_string(contention_slots) + " x " +
             std::to_string(minislot().count()) + " us) do not fit in slot_duration");
    }
    const SimTime ct_exchange = airtime(data_bits()) * 2 + airtime(control_bits) + guard * 3;
    if (ct_exchange > slot_duration) {
        fail("slot_duration too short for broadcast, cooperative send and ack (" +
             std::to_string(ct_exchange.count()) + " us)");
    }
    if (max_ct_packets == 0 || max_ct_packets > 255) {
        fail("max_ct_packets must be in [1, 255]");
    }
    if (reply_timeout <= SimTime::zero() || ack_timeout <= SimTime::zero()) {
        fail("timeouts must be positive");
    }
    if (packet_size_bytes == 0) {
        fail("packet_size_bytes must be positive");
    }
    if (!(base_range > 0.0)) {
        fail("base_range must be positive");
    }
}

std::uint64_t coop_group_id(std::uint64_t superframe_id, std::uint32_t slot) noexcept
{
    return (superframe_id << 8) | (slot & 0xffU);
}

std::uint64_t noct_rendezvous_id(NodeId sender, std::uint64_t request_seq) noexcept
{
    return (std::uint64_t{1} << 62) | (std::uint64_t{to_index(sender)} << 32) | (request_seq & 0xffffffffU);
}

Phase derive_phase(const MacState& s) noexcept
{
    if (!s.alive) {
        return Phase::Sleeping;
    }
    if (s.tx_in_progress > 0) {
        switch (s.ct_subphase) {
        case CtSubphase::broadcast: return Phase::CtBroadcast;
        case CtSubphase::cooperative: return Phase::CtCooperative;
        case CtSubphase::none: return Phase::Transmitting;
        }
    }
    switch (s.exchange) {
    case Exchange::awaiting_candidates: return Phase::AwaitingCandidates;
    case Exchange::awaiting_ct_ack: return Phase::AwaitingCtAck;
    case Exchange::awaiting_noct_reply: return Phase::AwaitingNoCtReply;
    case Exchange::awaiting_data_ack: return Phase::Receiving;
    default: break;
    }
    if (s.active_slot) {
        if (s.active_slot->role == ReservationRole::receiver) {
            return Phase::Receiving;
        }
        if (s.active_slot->kind == SlotKind::ct_rdv) {
            return s.ct_subphase == CtSubphase::cooperative ? Phase::CtCooperative : Phase::CtBroadcast;
        }
        return Phase::IdleListening;
    }
    if (s.in_window || s.deferred_tx > 0 || s.awaiting_superframe) {
        return Phase::IdleListening;
    }
    return Phase::Sleeping;
}

namespace {

class Stepper
{
  public:
    Stepper(MacState& s, const MacEvent& ev, const MacEnvironment& env, std::vector<MacAction>& out)
        : s_(s), ev_(ev), env_(env), cfg_(env.config()), out_(out)
    {
    }

    void operator()(const mac_event::WindowStart&)
    {
        s_.in_window = true;
        maybe_request_opportunity();
    }

    void operator()(const mac_event::WindowEnd&) { s_.in_window = false; }

    void operator()(const mac_event::PacketGenerated& e) { enqueue(e.packet); }

    void operator()(const mac_event::SendOpportunity& e)
    {
        s_.opportunity_pending = false;
        if (s_.exchange != Exchange::idle || s_.pending_packets.empty()) {
            note("noop", "opportunity while busy or queue empty");
            return;
        }
        const NodeId nh = env_.next_hop(s_.node);
        if (nh == kNoNode) {
            note("noop", "no next hop");
            return;
        }
        s_.opportunity_window = e.window_start;
        s_.opportunity_minislot = e.minislot;
        if (s_.has_overlap(noct_data_interval())) {
            note("own_conflict", "data slot overlaps an existing reservation");
            maybe_request_opportunity();
            return;
        }

        bool use_ct = false;
        switch (cfg_.mode) {
        case CtMode::ct: use_ct = true; break;
        case CtMode::noct: use_ct = false; break;
        case CtMode::automatic:
            use_ct = env_.distance(s_.node, nh) > cfg_.base_range ||
                     env_.residual(s_.node) < cfg_.auto_residual_fraction * env_.mean_neighbor_residual(s_.node);
            break;
        }
        if (s_.force_noct_next) {
            use_ct = false;
            s_.force_noct_next = false;
        }
        if (use_ct) {
            start_ct_query(nh);
        } else {
            start_noct(nh);
        }
    }

    void operator()(const mac_event::PacketReceived& e)
    {
        const Packet& p = e.packet;
        switch (p.kind) {
        case PacketKind::noct_request: on_noct_request(p); break;
        case PacketKind::noct_reply: on_noct_reply(p); break;
        case PacketKind::data: on_data(p); break;
        case PacketKind::data_ack: on_data_ack(p); break;
        case PacketKind::superframe: on_superframe_packet(p); break;
        case PacketKind::ct_ack: on_ct_ack(p); break;
        case PacketKind::ct_request:
        case PacketKind::candidate_reply: note("noop", "station message on air"); break;
        }
    }

    void operator()(const mac_event::TxDone&)
    {
        if (s_.tx_in_progress > 0) {
            --s_.tx_in_progress;
        }
    }

    void operator()(const mac_event::Timeout& e)
    {
        if (e.token != s_.timer_token) {
            note("noop", "stale timeout");
            return;
        }
        switch (s_.exchange) {
        case Exchange::awaiting_noct_reply: attempt_failed("reply_timeout"); break;
        case Exchange::awaiting_data_ack: attempt_failed("ack_timeout"); break;
        case Exchange::awaiting_ct_ack: {
            ++s_.timer_token;
            release_own_superframe();
            s_.exchange = Exchange::idle;
            s_.force_noct_next = true;
            note("ct_ack_timeout", "falling back to no-CT reservation");
            maybe_request_opportunity();
            break;
        }
        default: note("noop", "timeout in unexpected exchange"); break;
        }
    }

    void operator()(const mac_event::SlotStart& e)
    {
        const Reservation* r = s_.find_reservation(e.rendezvous, e.slot);
        if (r == nullptr) {
            note("noop", "slot start without reservation");
            return;
        }
        s_.active_slot = ActiveSlot{r->rendezvous, r->slot_index, r->role, r->kind, std::nullopt};
        s_.ct_subphase = CtSubphase::none;
        if (r->role != ReservationRole::sender) {
            return;  // receivers and helpers just stay awake
        }
        const NodeId nh = env_.next_hop(s_.node);
        if (r->kind == SlotKind::noct_rdv) {
            if (s_.exchange != Exchange::noct_reserved || s_.pending_packets.empty()) {
                note("noop", "reserved slot with nothing to send");
                return;
            }
            Packet data = link_copy(s_.pending_packets.front(), nh);
            s_.exchange = Exchange::awaiting_data_ack;
            arm_timeout_at(r->interval.end());
            transmit(std::move(data), {nh}, env_.distance(s_.node, nh));
            return;
        }
        if (!owns_rendezvous(e.rendezvous) || e.slot >= s_.ct_batch.size()) {
            note("noop", "ct slot not scheduled");
            return;
        }
        std::vector<NodeId> survivors;
        double farthest = 0.0;
        for (NodeId h : s_.own_superframe->helpers) {
            if (env_.alive(h) && env_.in_reach(s_.node, h)) {
                survivors.push_back(h);
                farthest = std::max(farthest, env_.distance(s_.node, h));
            }
        }
        if (survivors.empty()) {
            note("ct_direct", "no surviving helper; cooperative phase only");
            return;
        }
        s_.ct_subphase = CtSubphase::broadcast;
        transmit(link_copy(s_.ct_batch[e.slot], nh), std::move(survivors), farthest);
    }

    void operator()(const mac_event::CoopStart& e)
    {
        if (!s_.active_slot || s_.active_slot->rendezvous != e.rendezvous || s_.active_slot->slot_index != e.slot) {
            note("noop", "coop start outside its slot");
            return;
        }
        const std::uint64_t group = coop_group_id(e.rendezvous, e.slot);
        if (s_.active_slot->role == ReservationRole::sender) {
            if (!owns_rendezvous(e.rendezvous) || e.slot >= s_.ct_batch.size()) {
                note("noop", "ct slot not scheduled");
                return;
            }
            const NodeId nh = env_.next_hop(s_.node);
            s_.ct_subphase = CtSubphase::cooperative;
            transmit(link_copy(s_.ct_batch[e.slot], nh), {nh}, env_.distance(s_.node, nh), group);
            return;
        }
        if (s_.active_slot->role == ReservationRole::helper) {
            if (!s_.active_slot->relay_packet) {
                note("ct_helper_idle", "broadcast copy not received");
                return;
            }
            Packet copy = *s_.active_slot->relay_packet;
            const NodeId target = copy.destination;
            s_.ct_subphase = CtSubphase::cooperative;
            transmit(std::move(copy), {target}, env_.distance(s_.node, target), group);
            return;
        }
        note("noop", "coop start for receiver");
    }

    void operator()(const mac_event::SlotEnd& e)
    {
        const auto before = s_.reservations.size();
        std::erase_if(s_.reservations, [&](const Reservation& r) {
            return r.rendezvous == e.rendezvous && r.slot_index == e.slot;
        });
        if (before == s_.reservations.size()) {
            note("noop", "slot end without reservation");
        }
        if (s_.active_slot && s_.active_slot->rendezvous == e.rendezvous && s_.active_slot->slot_index == e.slot) {
            s_.active_slot.reset();
            s_.ct_subphase = CtSubphase::none;
        }
        if (s_.exchange == Exchange::ct_scheduled && owns_rendezvous(e.rendezvous) &&
            e.slot + 1 >= s_.own_superframe->ct_slots().size()) {
            s_.exchange = Exchange::idle;
            s_.ct_batch.clear();
            s_.own_superframe.reset();
            s_.retries = 0;
            maybe_request_opportunity();
        }
    }

    void operator()(const mac_event::CandidateReply& e)
    {
        if (s_.exchange != Exchange::awaiting_candidates) {
            note("noop", "unexpected candidate reply");
            return;
        }
        s_.exchange = Exchange::idle;
        const NodeId nh = env_.next_hop(s_.node);
        ElectedList use = e.elected;
        if (cfg_.max_helpers > 0 && use.helpers.size() > cfg_.max_helpers) {
            use.helpers.resize(cfg_.max_helpers);
            if (!use.leader || std::find(use.helpers.begin(), use.helpers.end(), *use.leader) == use.helpers.end()) {
                use.leader = use.helpers.front();
            }
        }
        if (use.empty()) {
            note("no_helpers", "falling back to no-CT");
            start_noct(nh);
            return;
        }
        const auto count =
            static_cast<std::uint32_t>(std::min<std::size_t>(s_.pending_packets.size(), cfg_.max_ct_packets));
        const std::uint64_t id = (std::uint64_t{to_index(s_.node)} << 32) | ++s_.superframe_counter;
        auto sf = std::make_shared<const Superframe>(
            compose_superframe(s_.node, use, nh, count, s_.opportunity_window,
                               {cfg_.slot_duration, cfg_.frame_length}, id));
        std::uint32_t index = 0;
        for (const auto* slot : sf->ct_slots()) {
            if (s_.has_overlap(slot->interval())) {
                note("own_conflict", "ct slots overlap an existing reservation; using no-CT");
                start_noct(nh);
                return;
            }
        }
        for (const auto* slot : sf->ct_slots()) {
            s_.reservations.push_back(
                {slot->interval(), SlotKind::ct_rdv, ReservationRole::sender, nh, sf->id, index++});
        }
        if (sf->continuation) {
            note("superframe_continuation", "ct slots extend past the frame");
        }
        s_.own_superframe = sf;
        s_.exchange = Exchange::awaiting_ct_ack;
        arm_timeout_at(ev_.time + cfg_.ack_timeout);
        out_.push_back(mac_action::NotifyParticipants{sf});

        Packet p = control(PacketKind::superframe, nh, cfg_.superframe_bits);
        p.superframe = sf;
        std::vector<NodeId> recipients = sf->helpers;
        recipients.push_back(nh);
        double reach = 0.0;
        for (NodeId r : recipients) {
            if (env_.in_reach(s_.node, r)) {
                reach = std::max(reach, env_.distance(s_.node, r));
            }
        }
        transmit(std::move(p), std::move(recipients), reach);
    }

    void operator()(const mac_event::StationNotify& e)
    {
        if (!e.superframe) {
            note("noop", "empty station notify");
            return;
        }
        s_.awaiting_superframe = true;
        const auto token = ++s_.notify_token;
        out_.push_back(mac_action::SetTimer{ev_.time + cfg_.ack_timeout, mac_event::NotifyExpired{token}});
    }

    void operator()(const mac_event::NotifyExpired& e)
    {
        if (e.token == s_.notify_token) {
            s_.awaiting_superframe = false;
        }
    }

    void operator()(const mac_event::DeferredSend& e)
    {
        if (s_.deferred_tx > 0) {
            --s_.deferred_tx;
        }
        transmit(e.packet, e.recipients, e.distance);
    }

  private:
    void note(std::string tag, std::string detail)
    {
        out_.push_back(mac_action::Note{std::move(tag), std::move(detail)});
    }

    Packet control(PacketKind kind, NodeId dest, std::uint64_t bits)
    {
        Packet p;
        p.seq = s_.next_seq++;
        p.size_bits = bits;
        p.source = s_.node;
        p.destination = dest;
        p.kind = kind;
        return p;
    }

    Packet link_copy(const Packet& data, NodeId dest)
    {
        Packet p = data;
        p.seq = s_.next_seq++;
        p.source = s_.node;
        p.destination = dest;
        return p;
    }

    void transmit(Packet p, std::vector<NodeId> recipients, double dist, std::uint64_t group = 0)
    {
        ++s_.tx_in_progress;
        out_.push_back(mac_action::Transmit{std::move(p), std::move(recipients), dist, group});
    }

    void defer_send(Packet p, std::vector<NodeId> recipients, double dist)
    {
        ++s_.deferred_tx;
        out_.push_back(mac_action::SetTimer{
            ev_.time + cfg_.guard, mac_event::DeferredSend{std::move(p), std::move(recipients), dist}});
    }

    void arm_timeout_at(SimTime at)
    {
        const auto token = ++s_.timer_token;
        out_.push_back(mac_action::SetTimer{at, mac_event::Timeout{token}});
    }

    void add_slot_timers(const Reservation& r)
    {
        out_.push_back(mac_action::SetTimer{r.interval.start, mac_event::SlotStart{r.rendezvous, r.slot_index}});
        if (r.kind == SlotKind::ct_rdv && r.role != ReservationRole::receiver) {
            out_.push_back(mac_action::SetTimer{r.interval.start + cfg_.airtime(cfg_.data_bits()) + cfg_.guard,
                                                mac_event::CoopStart{r.rendezvous, r.slot_index}});
        }
        out_.push_back(mac_action::SetTimer{r.interval.end(), mac_event::SlotEnd{r.rendezvous, r.slot_index}});
    }

    bool owns_rendezvous(std::uint64_t rdv) const
    {
        return s_.own_superframe && s_.own_superframe->id == rdv;
    }

    Interval noct_data_interval() const
    {
        return {s_.opportunity_window + cfg_.slot_duration * (1 + s_.opportunity_minislot), cfg_.slot_duration};
    }

    void maybe_request_opportunity()
    {
        if (!s_.alive || s_.pending_packets.empty() || s_.exchange != Exchange::idle || s_.opportunity_pending) {
            return;
        }
        const NodeId nh = env_.next_hop(s_.node);
        if (nh == kNoNode) {
            return;
        }
        s_.opportunity_pending = true;
        out_.push_back(mac_action::RequestOpportunity{nh});
    }

    void enqueue(const Packet& p)
    {
        if (env_.is_sink(s_.node)) {
            out_.push_back(mac_action::Deliver{p});
            return;
        }
        if (env_.next_hop(s_.node) == kNoNode) {
            out_.push_back(mac_action::Drop{p, "no_route"});
            return;
        }
        auto same_flow = [&](const Packet& q) { return q.flow_source == p.flow_source && q.flow_seq == p.flow_seq; };
        if (std::any_of(s_.pending_packets.begin(), s_.pending_packets.end(), same_flow) ||
            std::any_of(s_.ct_batch.begin(), s_.ct_batch.end(), same_flow)) {
            note("duplicate", "flow packet already queued");
            return;
        }
        s_.pending_packets.push_back(p);
        maybe_request_opportunity();
    }

    void start_noct(NodeId nh)
    {
        const Interval data = noct_data_interval();
        Packet req = control(PacketKind::noct_request, nh, cfg_.control_bits);
        req.interval = data;
        s_.noct_interval = data;
        s_.exchange = Exchange::awaiting_noct_reply;
        arm_timeout_at(ev_.time + cfg_.reply_timeout);
        transmit(std::move(req), {nh}, env_.distance(s_.node, nh));
    }

    void start_ct_query(NodeId nh)
    {
        CtRequest req;
        req.requester = s_.node;
        req.packet_size_bytes = cfg_.packet_size_bytes;
        req.packet_count =
            static_cast<std::uint32_t>(std::min<std::size_t>(s_.pending_packets.size(), cfg_.max_ct_packets));
        req.next_hop_distance = env_.distance(s_.node, nh);
        for (NodeId n : env_.neighbors(s_.node)) {
            if (n != nh) {
                req.neighbor_ids.push_back(n);
            }
        }
        s_.exchange = Exchange::awaiting_candidates;
        out_.push_back(mac_action::QueryStation{std::move(req)});
    }

    void attempt_failed(const std::string& reason)
    {
        ++s_.timer_token;
        s_.exchange = Exchange::idle;
        if (s_.noct_interval) {
            const Interval iv = *s_.noct_interval;
            std::erase_if(s_.reservations, [&](const Reservation& r) {
                return r.role == ReservationRole::sender && r.kind == SlotKind::noct_rdv && r.interval == iv;
            });
            s_.noct_interval.reset();
        }
        ++s_.retries;
        note("attempt_failed", reason + " retries=" + std::to_string(s_.retries));
        if (s_.retries > cfg_.retry_cap && !s_.pending_packets.empty()) {
            out_.push_back(mac_action::Drop{s_.pending_packets.front(), reason});
            s_.pending_packets.pop_front();
            s_.retries = 0;
        }
        maybe_request_opportunity();
    }

    void release_own_superframe()
    {
        if (s_.own_superframe) {
            const auto id = s_.own_superframe->id;
            std::erase_if(s_.reservations, [&](const Reservation& r) { return r.rendezvous == id; });
            s_.own_superframe.reset();
        }
    }

    void on_noct_request(const Packet& p)
    {
        if (p.destination != s_.node) {
            note("noop", "request for another node");
            return;
        }
        const bool ok = can_reserve(s_, p.interval);
        Packet reply = control(PacketKind::noct_reply, p.source, cfg_.control_bits);
        reply.interval = p.interval;
        reply.accept = ok;
        reply.flow_seq = p.seq;
        if (ok) {
            const Reservation r{p.interval, SlotKind::noct_rdv, ReservationRole::receiver, p.source,
                                noct_rendezvous_id(p.source, p.seq), 0};
            s_.reservations.push_back(r);
            add_slot_timers(r);
        }
        note(ok ? "reserve_accept" : "reserve_reject", "peer=" + to_string(p.source));
        defer_send(std::move(reply), {p.source}, env_.distance(s_.node, p.source));
    }

    void on_noct_reply(const Packet& p)
    {
        if (s_.exchange != Exchange::awaiting_noct_reply || !s_.noct_interval || p.interval != *s_.noct_interval) {
            note("noop", "unexpected noct reply");
            return;
        }
        if (!p.accept) {
            attempt_failed("rejected");
            return;
        }
        ++s_.timer_token;
        const Reservation r{p.interval, SlotKind::noct_rdv, ReservationRole::sender, p.source,
                            noct_rendezvous_id(s_.node, p.flow_seq), 0};
        s_.reservations.push_back(r);
        add_slot_timers(r);
        s_.exchange = Exchange::noct_reserved;
    }

    void on_data(const Packet& p)
    {
        if (!s_.active_slot) {
            note("noop", "data outside a reserved slot");
            return;
        }
        auto& slot = *s_.active_slot;
        if (slot.role == ReservationRole::helper) {
            if (slot.kind == SlotKind::ct_rdv && !slot.relay_packet) {
                slot.relay_packet = p;
            } else {
                note("noop", "helper already holds the slot packet");
            }
            return;
        }
        if (slot.role != ReservationRole::receiver) {
            note("noop", "data while sending");
            return;
        }
        Packet ack = control(PacketKind::data_ack, p.source, cfg_.control_bits);
        ack.flow_source = p.flow_source;
        ack.flow_seq = p.flow_seq;
        defer_send(std::move(ack), {p.source}, env_.distance(s_.node, p.source));
        enqueue(p);
    }

    void on_data_ack(const Packet& p)
    {
        if (s_.exchange != Exchange::awaiting_data_ack || s_.pending_packets.empty() ||
            s_.pending_packets.front().flow_source != p.flow_source ||
            s_.pending_packets.front().flow_seq != p.flow_seq) {
            note("noop", "unexpected data ack");
            return;
        }
        ++s_.timer_token;
        s_.pending_packets.pop_front();
        s_.retries = 0;
        s_.exchange = Exchange::idle;
        s_.noct_interval.reset();
        maybe_request_opportunity();
    }

    void on_superframe_packet(const Packet& p)
    {
        if (!p.superframe) {
            note("noop", "superframe without body");
            return;
        }
        const Superframe& sf = *p.superframe;
        auto resp = on_superframe(std::move(s_), sf, cfg_.control_bits);
        s_ = std::move(resp.state);
        if (!resp.stored) {
            note("superframe_declined", "no ct slot could be reserved");
            return;
        }
        for (const auto& r : s_.reservations) {
            if (r.rendezvous == sf.id) {
                add_slot_timers(r);
            }
        }
        if (resp.ct_ack) {
            defer_send(std::move(*resp.ct_ack), {sf.transmitter}, env_.distance(s_.node, sf.transmitter));
        }
    }

    void on_ct_ack(const Packet& p)
    {
        if (s_.exchange != Exchange::awaiting_ct_ack || !s_.own_superframe || s_.own_superframe->leader != p.source) {
            note("noop", "unexpected ct ack");
            return;
        }
        ++s_.timer_token;
        s_.exchange = Exchange::ct_scheduled;
        const auto slots = s_.own_superframe->ct_slots();
        const std::size_t n = std::min(slots.size(), s_.pending_packets.size());
        s_.ct_batch.assign(s_.pending_packets.begin(), s_.pending_packets.begin() + static_cast<std::ptrdiff_t>(n));
        s_.pending_packets.erase(s_.pending_packets.begin(), s_.pending_packets.begin() + static_cast<std::ptrdiff_t>(n));
        for (const auto& r : s_.reservations) {
            if (r.rendezvous == s_.own_superframe->id) {
                add_slot_timers(r);
            }
        }
    }

    MacState& s_;
    const MacEvent& ev_;
    const MacEnvironment& env_;
    const MacConfig& cfg_;
    std::vector<MacAction>& out_;
};

} // namespace

StepResult step(MacState state, const MacEvent& event, const MacEnvironment& env)
{
    StepResult result{std::move(state), {}};
    auto& s = result.state;
    if (!s.alive) {
        result.actions.push_back(mac_action::Note{"noop", "node is dead"});
        return result;
    }
    if (event.time < s.last_event) {
        result.actions.push_back(mac_action::Note{"noop", "event older than last processed event"});
        return result;
    }
    std::visit(Stepper{s, event, env, result.actions}, event.body);
    s.last_event = event.time;
    s.phase = derive_phase(s);
    return result;
}

} // namespace oscmac
