#include "oscmac/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace oscmac {
namespace {

template <class... Ts>
struct overloaded : Ts...
{
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

enum class EvKind : std::uint8_t { window_start, window_end, mac, tx_commit, tx_end, depletion, sample, traffic };

// Same-time ordering: transmissions end before anything else happens, and new signals go on air
// only after every node has reacted to the current instant.
constexpr std::uint8_t kClassTxEnd = 0;
constexpr std::uint8_t kClassNormal = 1;
constexpr std::uint8_t kClassTxCommit = 2;

struct QueuedEvent
{
    SimTime time{0};
    std::uint8_t cls{kClassNormal};
    std::uint64_t seq{0};
    EvKind kind{EvKind::mac};
    NodeId node{};
    std::uint64_t ref{0};
};

struct Later
{
    bool operator()(const QueuedEvent& a, const QueuedEvent& b) const noexcept
    {
        return std::tie(a.time, a.cls, a.seq) > std::tie(b.time, b.cls, b.seq);
    }
};

struct Transmission
{
    std::uint64_t id{0};
    std::uint64_t group{0};
    std::vector<NodeId> senders;
    Packet packet;
    std::vector<NodeId> recipients;
    SimTime start{0};
    SimTime end{0};
    std::vector<NodeId> listeners;
};

struct Reception
{
    std::uint64_t tx{0};
    SimTime start{0};
    bool corrupted{false};
};

struct NodeRuntime
{
    Battery battery;
    bool radio_on{false};
    SimTime last_settle{0};
    bool tx_busy{false};
    std::uint64_t depletion_version{0};
    std::optional<SimTime> death;
    std::vector<Reception> receptions;
    bool period_collided{false};
};

bool contains(const std::vector<NodeId>& v, NodeId id)
{
    return std::find(v.begin(), v.end(), id) != v.end();
}

std::string join_ids(const std::vector<NodeId>& ids)
{
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) {
            out += '|';
        }
        out += to_string(ids[i]);
    }
    return out;
}

class Simulator final : public MacEnvironment
{
  public:
    Simulator(const SimulationConfig& cfg, std::uint64_t seed, TraceSink* sink)
        : cfg_(cfg), topo_(Topology::build(cfg.nodes, cfg.mac.base_range)), rng_(seed), sink_(sink)
    {
        cfg_.radio.validate();
        cfg_.mac.validate();
        if (cfg_.horizon <= SimTime::zero()) {
            throw std::invalid_argument("horizon must be positive");
        }
        if (cfg_.timeline_stride_frames == 0) {
            throw std::invalid_argument("timeline_stride_frames must be at least 1");
        }
        if (cfg_.traffic.interval <= SimTime::zero() || cfg_.traffic.jitter < SimTime::zero() ||
            cfg_.traffic.start < SimTime::zero()) {
            throw std::invalid_argument("traffic: interval must be positive, start and jitter non-negative");
        }

        std::vector<ScheduleNode> sched_nodes;
        for (const auto& spec : topo_.nodes) {
            if (spec.role != Role::wilem) {
                sched_nodes.push_back({spec.id, topo_.depth[to_index(spec.id)], topo_.neighbors[to_index(spec.id)]});
            }
        }
        const auto schedules = build_schedules(sched_nodes, cfg_.mac.frame_length, cfg_.mac.active_window);

        const auto n = topo_.size();
        schedules_.resize(n);
        mac_.resize(n);
        rt_.resize(n);
        for (const auto& spec : topo_.nodes) {
            const auto i = to_index(spec.id);
            mac_[i].node = spec.id;
            rt_[i].battery = Battery::full(spec.initial_energy);
            if (spec.role == Role::wilem) {
                mac_[i].alive = false;
                continue;
            }
            schedules_[i] = schedules.at(spec.id);
        }

        sources_ = cfg_.traffic.sources;
        if (sources_.empty()) {
            for (const auto& spec : topo_.nodes) {
                if (spec.role == Role::trn) {
                    sources_.push_back(spec.id);
                }
            }
        }
        for (NodeId s : sources_) {
            if (to_index(s) >= n || s == topo_.station) {
                throw std::invalid_argument("traffic source " + to_string(s) + " is not a network node");
            }
        }
        generated_.assign(sources_.size(), 0);
    }

    Metrics run()
    {
        for (const auto& spec : topo_.nodes) {
            if (spec.role != Role::wilem) {
                push(schedules_[to_index(spec.id)].wake_offset, EvKind::window_start, spec.id);
            }
        }
        for (std::size_t k = 0; k < sources_.size(); ++k) {
            if (cfg_.traffic.packets_per_source > 0) {
                push(traffic_time(0), EvKind::traffic, sources_[k], k);
            }
        }
        push(SimTime::zero(), EvKind::sample, kNoNode);

        bool stopped = false;
        while (!queue_.empty()) {
            const QueuedEvent ev = queue_.top();
            if (ev.time > cfg_.horizon) {
                break;
            }
            queue_.pop();
            now_ = ev.time;
            seq_ = ev.seq;
            dispatch(ev);
            if (cfg_.stop_when_traffic_done && traffic_settled()) {
                stopped = true;
                break;
            }
        }

        const SimTime end = stopped ? now_ : cfg_.horizon;
        now_ = end;
        seq_ = next_seq_;
        for (const auto& spec : topo_.nodes) {
            if (spec.role != Role::wilem) {
                settle(spec.id);
            }
        }
        if (last_sample_ != end) {
            sample();
        }

        metrics_.end_time_s = to_seconds(end);
        metrics_.trace_charged_total = charged_.value();
        // a flow dropped on one path may still have arrived over another copy
        metrics_.packets_failed = static_cast<std::uint64_t>(
            std::count_if(failed_.begin(), failed_.end(), [&](const auto& f) { return delivered_.count(f) == 0; }));
        for (const auto& spec : topo_.nodes) {
            if (spec.role == Role::wilem) {
                continue;
            }
            const auto& rt = rt_[to_index(spec.id)];
            NodeEnergy e;
            e.node = spec.id;
            e.role = spec.role;
            e.initial = rt.battery.initial;
            e.residual = rt.battery.residual;
            e.consumed = rt.battery.consumed;
            if (rt.death) {
                e.death_time_s = to_seconds(*rt.death);
            }
            metrics_.nodes.push_back(e);
        }
        return std::move(metrics_);
    }

    // MacEnvironment
    const MacConfig& config() const override { return cfg_.mac; }
    NodeId next_hop(NodeId node) const override { return topo_.next_hop.at(to_index(node)); }
    bool is_sink(NodeId node) const override { return node == topo_.final_receiver; }
    double distance(NodeId a, NodeId b) const override
    {
        return oscmac::distance(topo_.node(a).position, topo_.node(b).position);
    }
    bool in_reach(NodeId a, NodeId b) const override
    {
        return oscmac::in_reach(topo_.node(a).position, topo_.node(b).position, topo_.base_range);
    }
    std::vector<NodeId> neighbors(NodeId node) const override { return topo_.neighbors.at(to_index(node)); }
    bool alive(NodeId node) const override { return rt_.at(to_index(node)).battery.alive && node != topo_.station; }
    Joules residual(NodeId node) const override
    {
        const auto& rt = rt_.at(to_index(node));
        if (!rt.battery.alive) {
            return 0.0;
        }
        const double p = rt.radio_on ? cfg_.radio.p_rx : cfg_.radio.p_sleep;
        return std::max(0.0, rt.battery.residual - p * to_seconds(now_ - rt.last_settle));
    }
    Joules mean_neighbor_residual(NodeId node) const override
    {
        double sum = 0.0;
        std::size_t count = 0;
        for (NodeId v : topo_.neighbors.at(to_index(node))) {
            if (alive(v)) {
                sum += residual(v);
                ++count;
            }
        }
        return count == 0 ? 0.0 : sum / static_cast<double>(count);
    }

  private:
    NodeRuntime& rt(NodeId n) { return rt_[to_index(n)]; }
    MacState& mac(NodeId n) { return mac_[to_index(n)]; }

    void push(SimTime at, EvKind kind, NodeId node, std::uint64_t ref = 0, std::uint8_t cls = kClassNormal)
    {
        queue_.push(QueuedEvent{std::max(at, now_), cls, next_seq_++, kind, node, ref});
    }

    void push_mac(SimTime at, NodeId node, MacEventBody body)
    {
        const auto key = next_seq_;
        payloads_.emplace(key, std::move(body));
        push(at, EvKind::mac, node, key);
    }

    SimTime traffic_time(std::uint32_t index)
    {
        SimTime t = cfg_.traffic.start + cfg_.traffic.interval * index;
        if (cfg_.traffic.jitter > SimTime::zero()) {
            const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
            t += SimTime{static_cast<std::int64_t>(u * static_cast<double>(cfg_.traffic.jitter.count()))};
        }
        return t;
    }

    void record(NodeId n, std::string_view event, std::string detail = {}, std::string_view category = {},
                double charge = 0.0)
    {
        ++metrics_.events_processed;
        if (sink_ == nullptr) {
            return;
        }
        TraceRecord r;
        r.time_us = now_.count();
        r.sequence = seq_;
        r.node = n;
        r.phase = std::string(to_string(mac(n).phase));
        r.event = std::string(event);
        r.category = std::string(category);
        r.charge_j = charge;
        r.residual_j = rt(n).battery.residual;
        r.detail = std::move(detail);
        sink_->record(r);
    }

    bool tracing() const noexcept { return sink_ != nullptr; }

    void dispatch(const QueuedEvent& ev)
    {
        switch (ev.kind) {
        case EvKind::window_start: on_window_start(ev.node); break;
        case EvKind::window_end: deliver(ev.node, mac_event::WindowEnd{}); break;
        case EvKind::mac: {
            auto it = payloads_.find(ev.ref);
            MacEventBody body = std::move(it->second);
            payloads_.erase(it);
            deliver(ev.node, std::move(body));
            break;
        }
        case EvKind::tx_commit: commit(ev.ref); break;
        case EvKind::tx_end: finish(ev.ref); break;
        case EvKind::depletion:
            if (alive(ev.node) && rt(ev.node).depletion_version == ev.ref) {
                settle(ev.node);
            }
            break;
        case EvKind::sample:
            sample();
            push(now_ + cfg_.mac.frame_length * cfg_.timeline_stride_frames, EvKind::sample, kNoNode);
            break;
        case EvKind::traffic: on_traffic(ev.node, ev.ref); break;
        }
    }

    void on_window_start(NodeId n)
    {
        if (!alive(n)) {
            return;
        }
        push(now_ + cfg_.mac.frame_length, EvKind::window_start, n);
        push(now_ + cfg_.mac.active_window, EvKind::window_end, n);
        deliver(n, mac_event::WindowStart{});
        project_depletion(n);
    }

    void on_traffic(NodeId n, std::uint64_t k)
    {
        const auto index = generated_[k]++;
        if (generated_[k] < cfg_.traffic.packets_per_source) {
            push(traffic_time(generated_[k]), EvKind::traffic, n, k);
        }
        ++metrics_.packets_offered;
        Packet p;
        p.seq = index + 1;
        p.size_bits = cfg_.mac.data_bits();
        p.source = n;
        p.destination = topo_.final_receiver;
        p.kind = PacketKind::data;
        p.flow_source = n;
        p.flow_seq = index + 1;
        p.created = now_;
        if (!alive(n)) {
            failed_.insert({to_index(n), p.flow_seq});
            return;
        }
        record(n, "packet_generated", "flow=" + to_string(n) + ":" + std::to_string(p.flow_seq));
        deliver(n, mac_event::PacketGenerated{std::move(p)});
    }

    bool traffic_settled() const
    {
        for (std::size_t k = 0; k < sources_.size(); ++k) {
            if (generated_[k] < cfg_.traffic.packets_per_source) {
                return false;
            }
        }
        for (const auto& m : mac_) {
            if (m.alive && (!m.pending_packets.empty() || !m.ct_batch.empty() || m.exchange != Exchange::idle)) {
                return false;
            }
        }
        return true;
    }

    void sample()
    {
        last_sample_ = now_;
        for (const auto& spec : topo_.nodes) {
            if (spec.role != Role::wilem) {
                metrics_.energy_timeline.push_back({to_seconds(now_), spec.id, residual(spec.id)});
            }
        }
    }

    // --- energy -----------------------------------------------------------

    void charge(NodeId n, Joules amount, EnergyCategory cat, std::string_view event, std::string detail = {})
    {
        auto& r = rt(n);
        const auto res = drain(r.battery, amount, cat);
        if (res.was_dead) {
            return;
        }
        r.battery = res.battery;
        charged_.add(res.drawn);
        record(n, event, std::move(detail), to_string(cat), res.drawn);
        if (res.died) {
            on_death(n);
        } else {
            project_depletion(n);
        }
    }

    void settle(NodeId n)
    {
        auto& r = rt(n);
        if (!r.battery.alive) {
            return;
        }
        const SimTime dt = now_ - r.last_settle;
        if (dt <= SimTime::zero()) {
            return;
        }
        r.last_settle = now_;
        const std::string detail = tracing() ? "dt_us=" + std::to_string(dt.count()) : std::string{};
        if (r.radio_on) {
            charge(n, idle_energy(dt, cfg_.radio), EnergyCategory::idle_listen, "idle", detail);
        } else {
            charge(n, sleep_energy(dt, cfg_.radio), EnergyCategory::sleep, "sleep", detail);
        }
    }

    void project_depletion(NodeId n)
    {
        auto& r = rt(n);
        if (!r.battery.alive) {
            return;
        }
        ++r.depletion_version;
        const double p = r.radio_on ? cfg_.radio.p_rx : cfg_.radio.p_sleep;
        const double secs = r.battery.residual / p;
        if (secs > 2.0 * to_seconds(cfg_.mac.frame_length)) {
            return;  // re-projected at the next window start
        }
        const SimTime at = r.last_settle + SimTime{std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(secs * 1e6)))};
        push(at, EvKind::depletion, n, r.depletion_version);
    }

    void on_death(NodeId n)
    {
        auto& r = rt(n);
        r.death = now_;
        abort_receptions(n, "dead");
        r.radio_on = false;
        auto& m = mac(n);
        auto lost = [&](const Packet& p) {
            failed_.insert({to_index(p.flow_source), p.flow_seq});
            record(n, "drop", "reason=node_dead;flow=" + to_string(p.flow_source) + ":" + std::to_string(p.flow_seq));
        };
        std::for_each(m.ct_batch.begin(), m.ct_batch.end(), lost);
        std::for_each(m.pending_packets.begin(), m.pending_packets.end(), lost);
        m.pending_packets.clear();
        m.ct_batch.clear();
        m.alive = false;
        m.phase = Phase::Sleeping;
        record(n, "death");
        const double t = to_seconds(now_);
        if (!metrics_.network_lifetime_first_death_s) {
            metrics_.network_lifetime_first_death_s = t;
        }
        if (topo_.node(n).role == Role::trn && !metrics_.trn_death_time_s) {
            metrics_.trn_death_time_s = t;
        }
    }

    void sync_radio(NodeId n)
    {
        auto& r = rt(n);
        const bool want = r.battery.alive && mac(n).phase != Phase::Sleeping;
        if (want == r.radio_on) {
            return;
        }
        settle(n);
        if (!r.battery.alive) {
            return;
        }
        if (!want) {
            abort_receptions(n, "radio_off");
        }
        r.radio_on = want;
        project_depletion(n);
    }

    // --- MAC glue ---------------------------------------------------------

    void deliver(NodeId n, MacEventBody body)
    {
        if (!alive(n)) {
            return;
        }
        const MacEvent ev{now_, std::move(body)};
        auto result = step(std::move(mac(n)), ev, *this);
        mac(n) = std::move(result.state);
        sync_radio(n);
        for (auto& action : result.actions) {
            apply(n, action);
        }
        sync_radio(n);
    }

    void apply(NodeId n, MacAction& action)
    {
        std::visit(overloaded{
                       [&](mac_action::Transmit& a) { start_tx(n, a); },
                       [&](mac_action::SetTimer& a) {
                           if (alive(n)) {
                               push_mac(a.at, n, std::move(a.event));
                           }
                       },
                       [&](mac_action::RequestOpportunity& a) { request_opportunity(n, a.next_hop); },
                       [&](mac_action::QueryStation& a) { query_station(n, a.request); },
                       [&](mac_action::NotifyParticipants& a) { notify_participants(n, a.superframe); },
                       [&](mac_action::Deliver& a) { on_deliver(n, a.packet); },
                       [&](mac_action::Drop& a) {
                           failed_.insert({to_index(a.packet.flow_source), a.packet.flow_seq});
                           if (alive(n)) {
                               record(n, "drop",
                                      "reason=" + a.reason + ";flow=" + to_string(a.packet.flow_source) + ":" +
                                          std::to_string(a.packet.flow_seq));
                           }
                       },
                       [&](mac_action::Note& a) {
                           if (alive(n)) {
                               record(n, "note:" + a.tag, tracing() ? a.detail : std::string{});
                           }
                       },
                   },
                   action);
    }

    void on_deliver(NodeId n, const Packet& p)
    {
        const bool fresh = delivered_.insert({to_index(p.flow_source), p.flow_seq}).second;
        if (fresh) {
            ++metrics_.packets_delivered;
        }
        if (alive(n)) {
            record(n, fresh ? "deliver" : "deliver_duplicate",
                   "flow=" + to_string(p.flow_source) + ":" + std::to_string(p.flow_seq) +
                       ";latency_us=" + std::to_string((now_ - p.created).count()));
        }
    }

    void request_opportunity(NodeId n, NodeId nh)
    {
        if (!alive(n)) {
            return;
        }
        const SimTime w = schedules_[to_index(nh)].next_window_start(now_);
        const auto k = static_cast<std::uint32_t>(rng_() % cfg_.mac.contention_slots);
        push_mac(w + cfg_.mac.minislot() * k, n, mac_event::SendOpportunity{w, k});
    }

    void query_station(NodeId n, const CtRequest& req)
    {
        if (!alive(n)) {
            return;
        }
        const auto& cfg = cfg_.mac;
        const double d = oscmac::distance(topo_.node(n).position, topo_.node(topo_.station).position);
        charge(n, tx_energy(cfg.control_bits, d, cfg_.radio), EnergyCategory::transmit, "tx:ct_request",
               tracing() ? "N=" + std::to_string(req.packet_count) + ";S=" + std::to_string(req.packet_size_bytes) +
                               ";neighbors=" + join_ids(req.neighbor_ids)
                         : std::string{});
        if (!alive(n)) {
            return;
        }
        EnergyRegistry registry;
        registry[n] = {residual(n), topo_.node(n).position};
        for (NodeId v : topo_.neighbors[to_index(n)]) {
            registry[v] = {residual(v), topo_.node(v).position};
        }
        const CtReply reply = handle_ct_request(req, registry, cfg_.radio);
        std::string detail;
        if (tracing()) {
            detail = "helpers=" + join_ids(reply.elected.helpers) +
                     ";leader=" + (reply.elected.leader ? to_string(*reply.elected.leader) : std::string("none"));
            if (!reply.unknown_neighbors.empty()) {
                detail += ";unknown=" + join_ids(reply.unknown_neighbors);
            }
        }
        charge(n, rx_energy(cfg.control_bits, cfg_.radio), EnergyCategory::receive, "rx:candidate_reply",
               std::move(detail));
        deliver(n, mac_event::CandidateReply{reply.elected});
    }

    void notify_participants(NodeId n, const std::shared_ptr<const Superframe>& sf)
    {
        if (!sf) {
            return;
        }
        for (NodeId p : sf->participants()) {
            if (p == n || !alive(p)) {
                continue;
            }
            deliver(p, mac_event::StationNotify{sf});
            if (alive(p)) {
                charge(p, rx_energy(cfg_.mac.control_bits, cfg_.radio), EnergyCategory::receive, "rx:station_notify",
                       tracing() ? "superframe=" + std::to_string(sf->id) : std::string{});
            }
        }
    }

    // --- channel ----------------------------------------------------------

    void start_tx(NodeId n, const mac_action::Transmit& a)
    {
        if (!alive(n)) {
            return;
        }
        auto& r = rt(n);
        if (r.tx_busy) {
            record(n, "tx_busy", tracing() ? "kind=" + std::string(to_string(a.packet.kind)) : std::string{});
            push_mac(now_, n, mac_event::TxDone{a.packet.kind});
            return;
        }
        settle(n);
        if (!alive(n)) {
            return;
        }
        std::string detail;
        if (tracing()) {
            std::ostringstream os;
            os << "dst=" << join_ids(a.recipients) << ";seq=" << a.packet.seq << ";bits=" << a.packet.size_bits
               << ";d=" << a.distance;
            if (a.group != 0) {
                os << ";group=" << a.group;
            }
            if (a.packet.kind == PacketKind::data) {
                os << ";flow=" << to_string(a.packet.flow_source) << ':' << a.packet.flow_seq;
            }
            detail = os.str();
        }
        charge(n, tx_energy(a.packet.size_bits, a.distance, cfg_.radio), EnergyCategory::transmit,
               "tx:" + std::string(to_string(a.packet.kind)), std::move(detail));
        if (!alive(n)) {
            return;
        }
        abort_receptions(n, "half_duplex");

        Transmission* tx = nullptr;
        if (a.group != 0) {
            for (auto& [id, t] : air_) {
                if (t.group == a.group && t.start == now_) {
                    tx = &t;
                    break;
                }
            }
        }
        if (tx != nullptr) {
            tx->senders.push_back(n);
        } else {
            const auto id = next_tx_id_++;
            Transmission t;
            t.id = id;
            t.group = a.group != 0 ? a.group : (std::uint64_t{1} << 63) | id;
            t.senders = {n};
            t.packet = a.packet;
            t.recipients = a.recipients;
            t.start = now_;
            t.end = now_ + cfg_.mac.airtime(a.packet.size_bits);
            tx = &air_.emplace(id, std::move(t)).first->second;
            push(now_, EvKind::tx_commit, n, id, kClassTxCommit);
            push(tx->end, EvKind::tx_end, n, id, kClassTxEnd);
        }
        r.tx_busy = true;
    }

    void commit(std::uint64_t id)
    {
        auto& tx = air_.at(id);
        std::vector<Position> senders;
        for (NodeId s : tx.senders) {
            senders.push_back(topo_.node(s).position);
        }
        for (const auto& spec : topo_.nodes) {
            const NodeId v = spec.id;
            if (spec.role == Role::wilem || contains(tx.senders, v)) {
                continue;
            }
            auto& r = rt(v);
            if (!r.battery.alive || !r.radio_on || r.tx_busy) {
                continue;
            }
            if (!ct_reach(senders, spec.position, topo_.base_range, cfg_.radio)) {
                continue;
            }
            Reception rec{id, now_, false};
            if (!r.receptions.empty()) {
                rec.corrupted = true;
                r.period_collided = true;
                for (auto& other : r.receptions) {
                    other.corrupted = true;
                }
            }
            r.receptions.push_back(rec);
            tx.listeners.push_back(v);
        }
    }

    void close_period(NodeId v)
    {
        auto& r = rt(v);
        if (r.receptions.empty() && r.period_collided) {
            r.period_collided = false;
            ++metrics_.collisions;
            record(v, "collision");
        }
    }

    std::string reception_detail(const Transmission& tx, SimTime start) const
    {
        if (sink_ == nullptr) {
            return {};
        }
        return "tx=" + std::to_string(tx.id) + ";start=" + std::to_string(start.count()) +
               ";src=" + join_ids(tx.senders);
    }

    void abort_receptions(NodeId v, std::string_view reason)
    {
        auto& r = rt(v);
        if (r.receptions.empty()) {
            return;
        }
        const auto aborted = std::move(r.receptions);
        r.receptions.clear();
        for (const auto& rec : aborted) {
            const auto it = air_.find(rec.tx);
            std::string detail;
            if (tracing() && it != air_.end()) {
                detail = reception_detail(it->second, rec.start) + ";reason=" + std::string(reason);
            }
            record(v, "rx_lost", std::move(detail));
        }
        close_period(v);
    }

    void finish(std::uint64_t id)
    {
        Transmission tx = std::move(air_.at(id));
        air_.erase(id);
        const auto bits = tx.packet.size_bits;
        const std::string kind(to_string(tx.packet.kind));

        for (NodeId v : tx.listeners) {
            auto& r = rt(v);
            if (!r.battery.alive) {
                continue;
            }
            const auto it = std::find_if(r.receptions.begin(), r.receptions.end(),
                                         [&](const Reception& rec) { return rec.tx == id; });
            if (it == r.receptions.end()) {
                continue;  // aborted earlier
            }
            const Reception rec = *it;
            r.receptions.erase(it);
            if (rec.corrupted) {
                record(v, "rx_lost", tracing() ? reception_detail(tx, rec.start) + ";reason=collision" : std::string{});
                close_period(v);
                continue;
            }
            const bool addressed = contains(tx.recipients, v);
            if (addressed) {
                charge(v, rx_energy(bits, cfg_.radio), EnergyCategory::receive, "rx:" + kind,
                       reception_detail(tx, rec.start));
            } else {
                charge(v, rx_energy(bits, cfg_.radio), EnergyCategory::overhear, "overhear:" + kind,
                       reception_detail(tx, rec.start));
            }
            close_period(v);
            if (addressed && tx.packet.kind == PacketKind::ct_ack) {
                ++metrics_.ct_rendezvous;
            }
            if (addressed) {
                deliver(v, mac_event::PacketReceived{tx.packet});
            }
        }

        if (tx.packet.kind == PacketKind::superframe && !tx.senders.empty()) {
            // The station forwards the announcement to participants the transmitter cannot reach.
            const Position origin = topo_.node(tx.senders.front()).position;
            for (NodeId v : tx.recipients) {
                if (!alive(v) || !rt(v).radio_on || oscmac::in_reach(origin, topo_.node(v).position, topo_.base_range)) {
                    continue;
                }
                charge(v, rx_energy(bits, cfg_.radio), EnergyCategory::receive, "rx_relay:superframe",
                       tracing() ? "superframe=" + std::to_string(tx.packet.superframe ? tx.packet.superframe->id : 0)
                                 : std::string{});
                deliver(v, mac_event::PacketReceived{tx.packet});
            }
        }

        for (NodeId s : tx.senders) {
            rt(s).tx_busy = false;
            deliver(s, mac_event::TxDone{tx.packet.kind});
        }
    }

    SimulationConfig cfg_;
    Topology topo_;
    std::mt19937_64 rng_;
    TraceSink* sink_;

    std::vector<DutySchedule> schedules_;
    std::vector<MacState> mac_;
    std::vector<NodeRuntime> rt_;
    std::vector<NodeId> sources_;
    std::vector<std::uint32_t> generated_;

    std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, Later> queue_;
    std::unordered_map<std::uint64_t, MacEventBody> payloads_;
    std::map<std::uint64_t, Transmission> air_;
    std::set<std::pair<std::uint32_t, std::uint64_t>> delivered_;
    std::set<std::pair<std::uint32_t, std::uint64_t>> failed_;
    CompensatedSum charged_;

    SimTime now_{0};
    std::uint64_t seq_{0};
    std::uint64_t next_seq_{0};
    std::uint64_t next_tx_id_{1};
    SimTime last_sample_{-1};
    Metrics metrics_;
};

} // namespace

Metrics run(const SimulationConfig& config, std::uint64_t seed, TraceSink* trace)
{
    Simulator sim(config, seed, trace);
    return sim.run();
}

} // namespace oscmac
