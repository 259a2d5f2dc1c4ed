#pragma once

#include "oscmac/energy_model.hpp"
#include "oscmac/helper_selection.hpp"
#include "oscmac/types.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace oscmac {

class ScheduleError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Half-open time interval [start, start + duration).
struct Interval
{
    SimTime start{0};
    SimTime duration{0};

    SimTime end() const noexcept { return start + duration; }
    bool overlaps(const Interval& other) const noexcept
    {
        return start < other.end() && other.start < end();
    }
    friend bool operator==(const Interval&, const Interval&) = default;
};

// ---------------------------------------------------------------------------
// Duty cycling

struct DutySchedule
{
    SimTime frame_length{0};
    SimTime active_window{0};
    SimTime wake_offset{0};

    void validate() const;
    /// First window start at or after `t`.
    SimTime next_window_start(SimTime t) const noexcept;
    bool in_window(SimTime t) const noexcept;
};

struct ScheduleNode
{
    NodeId id{};
    int depth{0};                   ///< hops to the final receiver
    std::vector<NodeId> neighbors;  ///< one-hop neighbours (symmetric)
};

/// Pipelined offsets (deeper nodes wake one window earlier than their parents) made orthogonal
/// inside every 2-hop neighbourhood by giving each same-depth rank its own pipeline copy.
/// Throws ScheduleError naming the neighbourhood when the frame is too short.
std::map<NodeId, DutySchedule> build_schedules(std::span<const ScheduleNode> nodes, SimTime frame_length,
                                               SimTime active_window);

// ---------------------------------------------------------------------------
// Superframe

enum class SlotKind : std::uint8_t { free, control, ct_rdv, noct_rdv };

std::string_view to_string(SlotKind k) noexcept;

struct SuperframeSlot
{
    SlotKind kind{SlotKind::free};
    SimTime start{0};
    SimTime duration{0};
    std::vector<NodeId> participants;

    Interval interval() const noexcept { return {start, duration}; }
};

struct Superframe
{
    std::uint64_t id{0};
    NodeId transmitter{};
    NodeId next_hop{};
    std::vector<NodeId> helpers;
    std::optional<NodeId> leader;
    SimTime origin{0};
    SimTime frame_length{0};
    std::vector<SuperframeSlot> slots;
    bool continuation{false};  ///< CT slots run past the end of the frame

    std::vector<const SuperframeSlot*> ct_slots() const;
    std::vector<NodeId> participants() const;  ///< transmitter, helpers, next hop
    bool has_participant(NodeId id) const;
};

struct SuperframeParams
{
    SimTime slot_duration{0};
    SimTime frame_length{0};
};

/// One control slot then one ct_rdv slot per packet, the rest of the frame free.
/// Throws std::invalid_argument when packets are requested without helpers.
Superframe compose_superframe(NodeId transmitter, const ElectedList& elected, NodeId next_hop,
                              std::uint32_t packet_count, SimTime now, const SuperframeParams& params,
                              std::uint64_t id = 0);

/// Throws std::logic_error if slots overlap or a ct_rdv slot has the wrong participants.
void validate_superframe(const Superframe& sf);

// ---------------------------------------------------------------------------
// Packets, reservations, node state

enum class PacketKind : std::uint8_t {
    data,
    ct_request,
    candidate_reply,
    superframe,
    ct_ack,
    noct_request,
    noct_reply,
    data_ack,
};

std::string_view to_string(PacketKind k) noexcept;

struct Packet
{
    std::uint64_t seq{0};
    std::uint64_t size_bits{0};
    NodeId source{};       ///< link-level sender
    NodeId destination{};  ///< link-level receiver (next hop for CT data)
    PacketKind kind{PacketKind::data};

    // data
    NodeId flow_source{};
    std::uint64_t flow_seq{0};
    SimTime created{0};

    // control payload
    Interval interval{};
    bool accept{false};
    std::shared_ptr<const Superframe> superframe;
};

enum class ReservationRole : std::uint8_t { sender, receiver, helper };

struct Reservation
{
    Interval interval{};
    SlotKind kind{SlotKind::noct_rdv};
    ReservationRole role{ReservationRole::sender};
    NodeId peer{};
    std::uint64_t rendezvous{0};
    std::uint32_t slot_index{0};
};

/// Rendezvous id of a no-CT reservation: requesting node and request sequence number.
std::uint64_t noct_rendezvous_id(NodeId sender, std::uint64_t request_seq) noexcept;

enum class Phase : std::uint8_t {
    Sleeping,
    IdleListening,
    AwaitingCandidates,
    AwaitingCtAck,
    AwaitingNoCtReply,
    CtBroadcast,
    CtCooperative,
    Receiving,
    Transmitting,
};

std::string_view to_string(Phase p) noexcept;

/// Sender-side progress of the head-of-queue transfer.
enum class Exchange : std::uint8_t {
    idle,
    awaiting_candidates,
    awaiting_ct_ack,
    ct_scheduled,
    awaiting_noct_reply,
    noct_reserved,
    awaiting_data_ack,
};

enum class CtSubphase : std::uint8_t { none, broadcast, cooperative };

struct ActiveSlot
{
    std::uint64_t rendezvous{0};
    std::uint32_t slot_index{0};
    ReservationRole role{ReservationRole::sender};
    SlotKind kind{SlotKind::noct_rdv};
    std::optional<Packet> relay_packet;  ///< helper copy taken in the broadcast sub-phase
};

struct MacState
{
    NodeId node{};
    Phase phase{Phase::Sleeping};
    bool alive{true};
    SimTime last_event{0};

    std::deque<Packet> pending_packets;
    std::vector<Reservation> reservations;

    bool in_window{false};
    bool opportunity_pending{false};
    bool awaiting_superframe{false};
    bool force_noct_next{false};
    int tx_in_progress{0};
    int deferred_tx{0};

    Exchange exchange{Exchange::idle};
    std::uint64_t timer_token{0};
    std::uint64_t notify_token{0};
    std::uint32_t retries{0};

    // opportunity being worked on
    SimTime opportunity_window{0};
    std::uint32_t opportunity_minislot{0};
    std::optional<Interval> noct_interval;

    std::shared_ptr<const Superframe> own_superframe;  ///< as transmitter
    std::vector<Packet> ct_batch;
    std::optional<ActiveSlot> active_slot;
    CtSubphase ct_subphase{CtSubphase::none};

    std::uint64_t next_seq{1};
    std::uint64_t superframe_counter{0};

    bool has_overlap(const Interval& interval) const noexcept;
    const Reservation* find_reservation(std::uint64_t rendezvous, std::uint32_t slot) const noexcept;
};

// ---------------------------------------------------------------------------
// Configuration and environment seen by a node

enum class CtMode : std::uint8_t { ct, noct, automatic };

std::string_view to_string(CtMode m) noexcept;

struct MacConfig
{
    SimTime frame_length{std::chrono::milliseconds(1000)};
    SimTime active_window{std::chrono::milliseconds(30)};
    SimTime slot_duration{std::chrono::milliseconds(10)};
    SimTime guard{100};
    SimTime reply_timeout{std::chrono::milliseconds(20)};
    SimTime ack_timeout{std::chrono::milliseconds(20)};
    std::uint32_t contention_slots{4};
    std::uint32_t retry_cap{3};
    std::uint32_t max_helpers{2};  ///< 0 keeps every elected helper
    std::uint32_t max_ct_packets{8};
    CtMode mode{CtMode::automatic};
    double auto_residual_fraction{0.5};
    std::uint64_t control_bits{64};
    std::uint64_t superframe_bits{128};
    std::uint32_t packet_size_bytes{100};
    double bitrate_bps{250000.0};
    double base_range{90.0};

    SimTime airtime(std::uint64_t bits) const noexcept;
    /// Contention minislot: a superframe or request, a reply, and two guards.
    SimTime minislot() const noexcept;
    std::uint64_t data_bits() const noexcept { return std::uint64_t{8} * packet_size_bytes; }
    /// Throws ScheduleError if a slot cannot hold its exchange.
    void validate() const;

    friend bool operator==(const MacConfig&, const MacConfig&) = default;
};

/// Read-only view of the world a node consults while stepping.
class MacEnvironment
{
  public:
    virtual ~MacEnvironment() = default;
    virtual const MacConfig& config() const = 0;
    virtual NodeId next_hop(NodeId node) const = 0;
    virtual bool is_sink(NodeId node) const = 0;
    virtual double distance(NodeId a, NodeId b) const = 0;
    virtual bool in_reach(NodeId a, NodeId b) const = 0;
    virtual std::vector<NodeId> neighbors(NodeId node) const = 0;
    virtual bool alive(NodeId node) const = 0;
    virtual Joules residual(NodeId node) const = 0;
    virtual Joules mean_neighbor_residual(NodeId node) const = 0;
};

// ---------------------------------------------------------------------------
// Events and actions

namespace mac_event {
struct WindowStart {};
struct WindowEnd {};
struct PacketGenerated { Packet packet; };
struct SendOpportunity { SimTime window_start{0}; std::uint32_t minislot{0}; };
struct PacketReceived { Packet packet; };
struct TxDone { PacketKind kind{PacketKind::data}; };
struct Timeout { std::uint64_t token{0}; };
struct SlotStart { std::uint64_t rendezvous{0}; std::uint32_t slot{0}; };
struct CoopStart { std::uint64_t rendezvous{0}; std::uint32_t slot{0}; };
struct SlotEnd { std::uint64_t rendezvous{0}; std::uint32_t slot{0}; };
struct CandidateReply { ElectedList elected; };
struct StationNotify { std::shared_ptr<const Superframe> superframe; };
struct NotifyExpired { std::uint64_t token{0}; };
struct DeferredSend { Packet packet; std::vector<NodeId> recipients; double distance{0.0}; };
} // namespace mac_event

using MacEventBody =
    std::variant<mac_event::WindowStart, mac_event::WindowEnd, mac_event::PacketGenerated,
                 mac_event::SendOpportunity, mac_event::PacketReceived, mac_event::TxDone, mac_event::Timeout,
                 mac_event::SlotStart, mac_event::CoopStart, mac_event::SlotEnd, mac_event::CandidateReply,
                 mac_event::StationNotify, mac_event::NotifyExpired, mac_event::DeferredSend>;

std::string_view event_name(const MacEventBody& body) noexcept;

struct MacEvent
{
    SimTime time{0};
    MacEventBody body;
};

namespace mac_action {
/// Put a packet on air now. Non-zero `group` merges simultaneous senders into one signal.
struct Transmit { Packet packet; std::vector<NodeId> recipients; double distance{0.0}; std::uint64_t group{0}; };
struct SetTimer { SimTime at{0}; MacEventBody event; };
/// Ask the engine for the next contention opportunity in the next hop's window.
struct RequestOpportunity { NodeId next_hop{}; };
struct QueryStation { CtRequest request; };
struct NotifyParticipants { std::shared_ptr<const Superframe> superframe; };
struct Deliver { Packet packet; };
struct Drop { Packet packet; std::string reason; };
struct Note { std::string tag; std::string detail; };
} // namespace mac_action

using MacAction = std::variant<mac_action::Transmit, mac_action::SetTimer, mac_action::RequestOpportunity,
                               mac_action::QueryStation, mac_action::NotifyParticipants, mac_action::Deliver,
                               mac_action::Drop, mac_action::Note>;

struct StepResult
{
    MacState state;
    std::vector<MacAction> actions;
};

/// Node transition function. Total over (phase, event): unmatched pairs yield a Note and no change.
StepResult step(MacState state, const MacEvent& event, const MacEnvironment& env);

/// Phase implied by the state's flags.
Phase derive_phase(const MacState& state) noexcept;

/// Rendezvous id for CT group transmissions inside one superframe slot.
std::uint64_t coop_group_id(std::uint64_t superframe_id, std::uint32_t slot) noexcept;

// ---------------------------------------------------------------------------
// Reservation and cooperative transfer, standalone forms

struct SuperframeResponse
{
    MacState state;
    bool stored{false};
    std::optional<Packet> ct_ack;
};

/// Helper/next-hop reaction to a superframe. Non-participants are left untouched.
SuperframeResponse on_superframe(MacState helper, const Superframe& sf, std::uint64_t control_bits);

enum class ReserveOutcome : std::uint8_t { accept, reject };

/// True when the node is alive and holds no reservation overlapping `interval`.
bool can_reserve(const MacState& node, const Interval& interval) noexcept;

/// On accept both sides store the reservation.
ReserveOutcome reserve_noct(MacState& sender, MacState& next_hop, const Interval& interval,
                            std::uint64_t rendezvous = 0);

struct CtParticipant
{
    NodeId id{};
    Position position{};
    bool alive{true};
};

struct ChargeEntry
{
    NodeId node{};
    EnergyCategory category{EnergyCategory::transmit};
    Joules amount{0.0};
};

struct CtTransferOutcome
{
    bool delivered{false};
    std::vector<NodeId> cooperating;  ///< transmitter plus surviving helpers that received the packet
    std::vector<ChargeEntry> charges;
};

/// Two-phase cooperative transfer of one packet: broadcast to helpers, then all send together.
CtTransferOutcome ct_transfer(const CtParticipant& transmitter, std::span<const CtParticipant> helpers,
                              const CtParticipant& next_hop, std::uint64_t bits,
                              const RadioEnergyParams& params, double base_range);

} // namespace oscmac
