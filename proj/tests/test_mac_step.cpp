#include "oscmac/mac_protocol.hpp"

#include <doctest.h>

#include <map>

using namespace oscmac;
using namespace std::chrono_literals;

namespace {

/// Line 0 -- 1 -- 2(sink), 40 m apart, plus helper 3 next to node 0.
class FakeEnv : public MacEnvironment
{
  public:
    MacConfig cfg;
    std::map<NodeId, Position> pos{{NodeId{0}, {0, 0}}, {NodeId{1}, {40, 0}}, {NodeId{2}, {80, 0}}, {NodeId{3}, {0, 10}}};
    std::map<NodeId, NodeId> hop{{NodeId{0}, NodeId{1}}, {NodeId{1}, NodeId{2}}, {NodeId{3}, NodeId{1}}};
    std::map<NodeId, Joules> energy;
    double mean = 1.0;

    const MacConfig& config() const override { return cfg; }
    NodeId next_hop(NodeId n) const override
    {
        const auto it = hop.find(n);
        return it == hop.end() ? kNoNode : it->second;
    }
    bool is_sink(NodeId n) const override { return n == NodeId{2}; }
    double distance(NodeId a, NodeId b) const override { return oscmac::distance(pos.at(a), pos.at(b)); }
    bool in_reach(NodeId a, NodeId b) const override { return distance(a, b) <= cfg.base_range; }
    std::vector<NodeId> neighbors(NodeId n) const override
    {
        std::vector<NodeId> out;
        for (const auto& [id, p] : pos) {
            if (id != n && in_reach(id, n)) {
                out.push_back(id);
            }
        }
        return out;
    }
    bool alive(NodeId) const override { return true; }
    Joules residual(NodeId n) const override
    {
        const auto it = energy.find(n);
        return it == energy.end() ? 1.0 : it->second;
    }
    Joules mean_neighbor_residual(NodeId) const override { return mean; }
};

Packet data_packet(NodeId src, std::uint64_t seq)
{
    Packet p;
    p.kind = PacketKind::data;
    p.size_bits = 800;
    p.source = src;
    p.destination = NodeId{2};
    p.flow_source = src;
    p.flow_seq = seq;
    return p;
}

template <class A>
const A* find_action(const std::vector<MacAction>& actions)
{
    for (const auto& a : actions) {
        if (const auto* x = std::get_if<A>(&a)) {
            return x;
        }
    }
    return nullptr;
}

template <class A>
std::size_t count_actions(const std::vector<MacAction>& actions)
{
    std::size_t n = 0;
    for (const auto& a : actions) {
        n += std::holds_alternative<A>(a) ? 1 : 0;
    }
    return n;
}

MacState node(std::uint32_t id)
{
    MacState s;
    s.node = NodeId{id};
    return s;
}

StepResult at(SimTime t, MacState s, MacEventBody body, const FakeEnv& env)
{
    return step(std::move(s), MacEvent{t, std::move(body)}, env);
}

std::vector<MacEventBody> all_event_kinds()
{
    auto sf = std::make_shared<const Superframe>();
    return {mac_event::WindowStart{},
            mac_event::WindowEnd{},
            mac_event::PacketGenerated{data_packet(NodeId{0}, 1)},
            mac_event::SendOpportunity{100ms, 0},
            mac_event::PacketReceived{data_packet(NodeId{1}, 1)},
            mac_event::TxDone{},
            mac_event::Timeout{42},
            mac_event::SlotStart{1, 0},
            mac_event::CoopStart{1, 0},
            mac_event::SlotEnd{1, 0},
            mac_event::CandidateReply{},
            mac_event::StationNotify{sf},
            mac_event::NotifyExpired{3},
            mac_event::DeferredSend{data_packet(NodeId{0}, 1), {NodeId{1}}, 40.0}};
}

} // namespace

TEST_CASE("step is total over phases and event kinds")
{
    FakeEnv env;
    std::vector<MacState> states;
    states.push_back(node(0));
    auto awake = node(0);
    awake.in_window = true;
    states.push_back(awake);
    auto querying = node(0);
    querying.exchange = Exchange::awaiting_candidates;
    states.push_back(querying);
    auto acking = node(0);
    acking.exchange = Exchange::awaiting_ct_ack;
    states.push_back(acking);
    auto replying = node(0);
    replying.exchange = Exchange::awaiting_noct_reply;
    states.push_back(replying);
    auto receiving = node(1);
    receiving.active_slot = ActiveSlot{1, 0, ReservationRole::receiver, SlotKind::noct_rdv, std::nullopt};
    states.push_back(receiving);
    auto sending = node(0);
    sending.tx_in_progress = 1;
    states.push_back(sending);

    for (const auto& s : states) {
        for (const auto& ev : all_event_kinds()) {
            CHECK_NOTHROW(at(200ms, s, ev, env));
            const auto r = at(200ms, s, ev, env);
            CHECK(r.state.phase == derive_phase(r.state));
        }
    }
}

TEST_CASE("unmatched pairs are recorded no-ops")
{
    FakeEnv env;
    const auto r = at(10ms, node(0), mac_event::SlotStart{99, 0}, env);
    REQUIRE(r.actions.size() == 1);
    CHECK(std::get<mac_action::Note>(r.actions[0]).tag == "noop");

    auto dead = node(0);
    dead.alive = false;
    const auto d = at(10ms, dead, mac_event::WindowStart{}, env);
    CHECK(d.state.phase == Phase::Sleeping);
    CHECK(std::get<mac_action::Note>(d.actions.at(0)).tag == "noop");

    auto later = node(0);
    later.last_event = 50ms;
    const auto old = at(10ms, later, mac_event::WindowStart{}, env);
    CHECK_FALSE(old.state.in_window);
}

TEST_CASE("window start and traffic request an opportunity")
{
    FakeEnv env;
    auto r = at(0ms, node(0), mac_event::PacketGenerated{data_packet(NodeId{0}, 1)}, env);
    CHECK(r.state.pending_packets.size() == 1);
    REQUIRE(find_action<mac_action::RequestOpportunity>(r.actions) != nullptr);
    CHECK(find_action<mac_action::RequestOpportunity>(r.actions)->next_hop == NodeId{1});
    CHECK(r.state.phase == Phase::Sleeping);

    r = at(1ms, r.state, mac_event::PacketGenerated{data_packet(NodeId{0}, 1)}, env);
    CHECK(r.state.pending_packets.size() == 1);  // same flow packet is not queued twice
    CHECK(find_action<mac_action::RequestOpportunity>(r.actions) == nullptr);

    r = at(2ms, r.state, mac_event::WindowStart{}, env);
    CHECK(r.state.phase == Phase::IdleListening);
}

TEST_CASE("the sink delivers and unrouted nodes drop")
{
    FakeEnv env;
    auto r = at(0ms, node(2), mac_event::PacketGenerated{data_packet(NodeId{2}, 1)}, env);
    CHECK(find_action<mac_action::Deliver>(r.actions) != nullptr);
    env.hop.erase(NodeId{0});
    r = at(0ms, node(0), mac_event::PacketGenerated{data_packet(NodeId{0}, 1)}, env);
    REQUIRE(find_action<mac_action::Drop>(r.actions) != nullptr);
    CHECK(find_action<mac_action::Drop>(r.actions)->reason == "no_route");
}

TEST_CASE("no-CT handshake from the sender side")
{
    FakeEnv env;
    env.cfg.mode = CtMode::noct;
    auto s = at(0ms, node(0), mac_event::PacketGenerated{data_packet(NodeId{0}, 1)}, env).state;
    auto r = at(100ms, s, mac_event::SendOpportunity{100ms, 2}, env);
    const auto* tx = find_action<mac_action::Transmit>(r.actions);
    REQUIRE(tx != nullptr);
    CHECK(tx->packet.kind == PacketKind::noct_request);
    CHECK(tx->packet.interval == Interval{100ms + 30ms, 10ms});
    CHECK(tx->recipients == std::vector<NodeId>{NodeId{1}});
    CHECK(r.state.phase == Phase::Transmitting);
    r = at(100ms + 256us, r.state, mac_event::TxDone{PacketKind::noct_request}, env);
    CHECK(r.state.phase == Phase::AwaitingNoCtReply);

    Packet reply;
    reply.kind = PacketKind::noct_reply;
    reply.source = NodeId{1};
    reply.destination = NodeId{0};
    reply.interval = {130ms, 10ms};
    reply.accept = true;
    reply.flow_seq = tx->packet.seq;
    r = at(101ms, r.state, mac_event::PacketReceived{reply}, env);
    CHECK(r.state.exchange == Exchange::noct_reserved);
    CHECK(count_actions<mac_action::SetTimer>(r.actions) == 2);
    const auto rdv = r.state.reservations.at(0).rendezvous;

    r = at(130ms, r.state, mac_event::SlotStart{rdv, 0}, env);
    const auto* data = find_action<mac_action::Transmit>(r.actions);
    REQUIRE(data != nullptr);
    CHECK(data->packet.kind == PacketKind::data);
    CHECK(r.state.exchange == Exchange::awaiting_data_ack);
    r = at(133ms, r.state, mac_event::TxDone{PacketKind::data}, env);

    Packet ack;
    ack.kind = PacketKind::data_ack;
    ack.source = NodeId{1};
    ack.flow_source = NodeId{0};
    ack.flow_seq = 1;
    r = at(134ms, r.state, mac_event::PacketReceived{ack}, env);
    CHECK(r.state.pending_packets.empty());
    CHECK(r.state.exchange == Exchange::idle);
    r = at(140ms, r.state, mac_event::SlotEnd{rdv, 0}, env);
    CHECK(r.state.reservations.empty());
    CHECK(r.state.phase == Phase::Sleeping);
}

TEST_CASE("no-CT receiver accepts free intervals and rejects overlaps")
{
    FakeEnv env;
    Packet req;
    req.kind = PacketKind::noct_request;
    req.source = NodeId{0};
    req.destination = NodeId{1};
    req.seq = 4;
    req.interval = {130ms, 10ms};
    auto r = at(100ms, node(1), mac_event::PacketReceived{req}, env);
    CHECK(r.state.reservations.size() == 1);
    const auto* deferred = find_action<mac_action::SetTimer>(r.actions);
    REQUIRE(deferred != nullptr);

    bool accepted = false;
    for (const auto& a : r.actions) {
        if (const auto* t = std::get_if<mac_action::SetTimer>(&a)) {
            if (const auto* d = std::get_if<mac_event::DeferredSend>(&t->event)) {
                accepted = d->packet.accept;
                CHECK(t->at == 100ms + env.cfg.guard);
            }
        }
    }
    CHECK(accepted);

    req.source = NodeId{3};
    req.interval = {135ms, 10ms};
    r = at(101ms, r.state, mac_event::PacketReceived{req}, env);
    CHECK(r.state.reservations.size() == 1);
    for (const auto& a : r.actions) {
        if (const auto* t = std::get_if<mac_action::SetTimer>(&a)) {
            if (const auto* d = std::get_if<mac_event::DeferredSend>(&t->event)) {
                CHECK_FALSE(d->packet.accept);
            }
        }
    }
}

TEST_CASE("timeouts retry up to the cap then drop")
{
    FakeEnv env;
    env.cfg.mode = CtMode::noct;
    env.cfg.retry_cap = 2;
    auto s = at(0ms, node(0), mac_event::PacketGenerated{data_packet(NodeId{0}, 1)}, env).state;
    std::size_t drops = 0;
    for (int attempt = 0; attempt < 3; ++attempt) {
        const SimTime t = 100ms + 1000ms * attempt;
        auto r = at(t, s, mac_event::SendOpportunity{t, 0}, env);
        r = at(t + 1ms, r.state, mac_event::TxDone{}, env);
        r = at(t + 20ms, r.state, mac_event::Timeout{r.state.timer_token}, env);
        drops += count_actions<mac_action::Drop>(r.actions);
        s = r.state;
    }
    CHECK(drops == 1);
    CHECK(s.pending_packets.empty());
    CHECK(s.retries == 0);
}

TEST_CASE("CT path: query, superframe, acknowledgement, slots")
{
    FakeEnv env;
    env.cfg.mode = CtMode::ct;
    auto s = at(0ms, node(0), mac_event::PacketGenerated{data_packet(NodeId{0}, 1)}, env).state;
    auto r = at(100ms, s, mac_event::SendOpportunity{100ms, 0}, env);
    const auto* q = find_action<mac_action::QueryStation>(r.actions);
    REQUIRE(q != nullptr);
    CHECK(q->request.packet_count == 1);
    CHECK(q->request.packet_size_bytes == 100);
    CHECK(q->request.next_hop_distance == doctest::Approx(40.0));
    CHECK(q->request.neighbor_ids == std::vector<NodeId>{NodeId{2}, NodeId{3}});
    CHECK(r.state.phase == Phase::AwaitingCandidates);

    r = at(100ms, r.state, mac_event::CandidateReply{{{NodeId{3}}, NodeId{3}}}, env);
    CHECK(find_action<mac_action::NotifyParticipants>(r.actions) != nullptr);
    const auto* sf_tx = find_action<mac_action::Transmit>(r.actions);
    REQUIRE(sf_tx != nullptr);
    CHECK(sf_tx->packet.kind == PacketKind::superframe);
    REQUIRE(sf_tx->packet.superframe);
    const auto sf = sf_tx->packet.superframe;
    CHECK(sf->ct_slots().size() == 1);
    CHECK(r.state.exchange == Exchange::awaiting_ct_ack);
    r = at(101ms, r.state, mac_event::TxDone{PacketKind::superframe}, env);
    CHECK(r.state.phase == Phase::AwaitingCtAck);

    Packet ack;
    ack.kind = PacketKind::ct_ack;
    ack.source = NodeId{3};
    ack.flow_seq = sf->id;
    r = at(102ms, r.state, mac_event::PacketReceived{ack}, env);
    CHECK(r.state.exchange == Exchange::ct_scheduled);
    CHECK(r.state.ct_batch.size() == 1);
    CHECK(r.state.pending_packets.empty());
    CHECK(count_actions<mac_action::SetTimer>(r.actions) == 3);

    r = at(110ms, r.state, mac_event::SlotStart{sf->id, 0}, env);
    const auto* bcast = find_action<mac_action::Transmit>(r.actions);
    REQUIRE(bcast != nullptr);
    CHECK(bcast->recipients == std::vector<NodeId>{NodeId{3}});
    CHECK(bcast->distance == doctest::Approx(10.0));
    CHECK(r.state.phase == Phase::CtBroadcast);
    r = at(113200us, r.state, mac_event::TxDone{}, env);

    r = at(113300us, r.state, mac_event::CoopStart{sf->id, 0}, env);
    const auto* coop = find_action<mac_action::Transmit>(r.actions);
    REQUIRE(coop != nullptr);
    CHECK(coop->group == coop_group_id(sf->id, 0));
    CHECK(coop->recipients == std::vector<NodeId>{NodeId{1}});
    CHECK(r.state.phase == Phase::CtCooperative);
    r = at(116500us, r.state, mac_event::TxDone{}, env);
    r = at(120ms, r.state, mac_event::SlotEnd{sf->id, 0}, env);
    CHECK(r.state.exchange == Exchange::idle);
    CHECK(r.state.ct_batch.empty());
    CHECK(r.state.phase == Phase::Sleeping);
}

TEST_CASE("CT without helpers falls back; a missing ack forces no-CT next time")
{
    FakeEnv env;
    env.cfg.mode = CtMode::ct;
    auto s = at(0ms, node(0), mac_event::PacketGenerated{data_packet(NodeId{0}, 1)}, env).state;
    auto r = at(100ms, s, mac_event::SendOpportunity{100ms, 0}, env);
    r = at(100ms, r.state, mac_event::CandidateReply{}, env);
    const auto* tx = find_action<mac_action::Transmit>(r.actions);
    REQUIRE(tx != nullptr);
    CHECK(tx->packet.kind == PacketKind::noct_request);

    r = at(100ms, s, mac_event::SendOpportunity{100ms, 0}, env);
    r = at(100ms, r.state, mac_event::CandidateReply{{{NodeId{3}}, NodeId{3}}}, env);
    r = at(101ms, r.state, mac_event::TxDone{}, env);
    CHECK(r.state.reservations.size() == 1);
    r = at(120ms, r.state, mac_event::Timeout{r.state.timer_token}, env);
    CHECK(r.state.force_noct_next);
    CHECK(r.state.reservations.empty());
    CHECK(find_action<mac_action::RequestOpportunity>(r.actions) != nullptr);
    r = at(1100ms, r.state, mac_event::SendOpportunity{1100ms, 0}, env);
    CHECK(find_action<mac_action::QueryStation>(r.actions) == nullptr);
    CHECK(find_action<mac_action::Transmit>(r.actions)->packet.kind == PacketKind::noct_request);
}

TEST_CASE("auto mode queries only for long hops or drained senders")
{
    FakeEnv env;
    env.cfg.mode = CtMode::automatic;
    auto s = at(0ms, node(0), mac_event::PacketGenerated{data_packet(NodeId{0}, 1)}, env).state;
    auto r = at(100ms, s, mac_event::SendOpportunity{100ms, 0}, env);
    CHECK(find_action<mac_action::QueryStation>(r.actions) == nullptr);

    env.energy[NodeId{0}] = 0.4;
    r = at(100ms, s, mac_event::SendOpportunity{100ms, 0}, env);
    CHECK(find_action<mac_action::QueryStation>(r.actions) != nullptr);

    env.energy.clear();
    env.pos[NodeId{1}] = {95, 0};
    r = at(100ms, s, mac_event::SendOpportunity{100ms, 0}, env);
    CHECK(find_action<mac_action::QueryStation>(r.actions) != nullptr);
}

TEST_CASE("station notify keeps a participant awake until it expires")
{
    FakeEnv env;
    auto sf = std::make_shared<const Superframe>();
    auto r = at(10ms, node(3), mac_event::StationNotify{sf}, env);
    CHECK(r.state.phase == Phase::IdleListening);
    const auto* t = find_action<mac_action::SetTimer>(r.actions);
    REQUIRE(t != nullptr);
    CHECK(t->at == 10ms + env.cfg.ack_timeout);
    r = at(t->at, r.state, t->event, env);
    CHECK(r.state.phase == Phase::Sleeping);
}

TEST_CASE("configuration checks")
{
    MacConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.airtime(800) == 3200us);
    CHECK(c.minislot() == 512us + 256us + 200us);
    c.contention_slots = 11;
    CHECK_THROWS_AS(c.validate(), ScheduleError);
    c = MacConfig{};
    c.slot_duration = 5ms;
    CHECK_THROWS_AS(c.validate(), ScheduleError);
    c = MacConfig{};
    c.max_ct_packets = 0;
    CHECK_THROWS_AS(c.validate(), ScheduleError);
}
