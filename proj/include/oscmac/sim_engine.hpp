#pragma once

#include "oscmac/channel.hpp"
#include "oscmac/energy_model.hpp"
#include "oscmac/mac_protocol.hpp"
#include "oscmac/trace.hpp"
#include "oscmac/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace oscmac {

enum class Role : std::uint8_t { trn, relay, helper, fr, wilem };

std::string_view to_string(Role r) noexcept;
std::optional<Role> role_from_string(std::string_view s) noexcept;

struct NodeSpec
{
    NodeId id{};
    Position position{};
    Role role{Role::relay};
    Joules initial_energy{1.0};
    std::optional<NodeId> next_hop;  ///< explicit route; otherwise shortest hop path to the FR

    friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

class TopologyError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct Topology
{
    std::vector<NodeSpec> nodes;  ///< index == id
    double base_range{90.0};
    std::vector<NodeId> next_hop;  ///< kNoNode for the FR, the station and unrouted nodes
    std::vector<int> depth;        ///< hops to the FR; 0 for unrouted nodes and the station
    std::vector<std::vector<NodeId>> neighbors;  ///< unit-disk neighbours, station excluded
    NodeId final_receiver{kNoNode};
    NodeId station{kNoNode};

    /// Validates ids (dense 0..n-1), roles (one FR, one station) and routes (acyclic, ending at the FR).
    static Topology build(std::vector<NodeSpec> nodes, double base_range);

    const NodeSpec& node(NodeId id) const { return nodes.at(to_index(id)); }
    std::size_t size() const noexcept { return nodes.size(); }
    bool routed(NodeId id) const { return id == final_receiver || next_hop.at(to_index(id)) != kNoNode; }
};

struct TrafficConfig
{
    std::uint32_t packets_per_source{10};
    std::vector<NodeId> sources;  ///< empty: every node with role trn
    SimTime start{0};
    SimTime interval{std::chrono::seconds(1)};
    SimTime jitter{0};

    friend bool operator==(const TrafficConfig&, const TrafficConfig&) = default;
};

struct SimulationConfig
{
    RadioEnergyParams radio;
    MacConfig mac;
    std::vector<NodeSpec> nodes;
    TrafficConfig traffic;
    SimTime horizon{std::chrono::seconds(100)};
    bool stop_when_traffic_done{false};
    std::uint32_t timeline_stride_frames{10};

    friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

struct TimelineSample
{
    double time_s{0.0};
    NodeId node{};
    Joules residual{0.0};
};

struct NodeEnergy
{
    NodeId node{};
    Role role{Role::relay};
    Joules initial{0.0};
    Joules residual{0.0};
    std::array<Joules, kEnergyCategoryCount> consumed{};
    std::optional<double> death_time_s;
};

struct Metrics
{
    std::optional<double> network_lifetime_first_death_s;
    std::optional<double> trn_death_time_s;
    std::uint64_t packets_offered{0};
    std::uint64_t packets_delivered{0};
    std::uint64_t packets_failed{0};    ///< flows dropped somewhere and never delivered
    std::uint64_t collisions{0};
    std::uint64_t events_processed{0};  ///< equals the number of trace records
    std::uint64_t ct_rendezvous{0};     ///< superframes acknowledged by a leader
    Joules trace_charged_total{0.0};    ///< sum of every charge written to the trace
    double end_time_s{0.0};
    std::vector<TimelineSample> energy_timeline;
    std::vector<NodeEnergy> nodes;

    double delivery_ratio() const noexcept
    {
        return packets_offered == 0 ? 0.0 : static_cast<double>(packets_delivered) / static_cast<double>(packets_offered);
    }
};

/// Runs one simulation. Identical (config, seed) produce identical traces and metrics.
/// Throws TopologyError / ScheduleError / std::invalid_argument on an invalid configuration.
Metrics run(const SimulationConfig& config, std::uint64_t seed, TraceSink* trace = nullptr);

// ---------------------------------------------------------------------------
// Slot-level collision resolution

struct SlotTransmission
{
    std::uint64_t rendezvous{0};     ///< all senders of one CT group share an id
    std::vector<Position> senders;
    std::vector<NodeId> addressed;
};

struct SlotReceiver
{
    NodeId id{};
    Position position{};
    bool awake{true};
};

enum class ReceptionOutcome : std::uint8_t { decoded, overheard, collision, silent };

struct ReceiverOutcome
{
    NodeId receiver{};
    ReceptionOutcome outcome{ReceptionOutcome::silent};
    std::optional<std::uint64_t> rendezvous;  ///< decoded or overheard group
};

struct SlotResolution
{
    std::vector<ReceiverOutcome> outcomes;
    std::uint64_t collisions{0};  ///< receivers that heard two or more distinct rendezvous
    std::uint64_t lost{0};        ///< transmissions audible at a colliding receiver
};

/// All transmissions are taken as overlapping in time.
SlotResolution resolve_slot(std::span<const SlotTransmission> transmissions, std::span<const SlotReceiver> receivers,
                            double base_range, const RadioEnergyParams& params);

} // namespace oscmac
