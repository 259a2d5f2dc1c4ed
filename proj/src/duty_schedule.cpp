#include "oscmac/mac_protocol.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

namespace oscmac {

void DutySchedule::validate() const
{
    if (!(active_window > SimTime::zero() && active_window <= frame_length)) {
        throw ScheduleError("duty schedule: need 0 < active_window <= frame_length");
    }
    if (wake_offset < SimTime::zero() || wake_offset >= frame_length) {
        throw ScheduleError("duty schedule: need 0 <= wake_offset < frame_length");
    }
}

SimTime DutySchedule::next_window_start(SimTime t) const noexcept
{
    if (t <= wake_offset) {
        return wake_offset;
    }
    const auto since = (t - wake_offset).count();
    const auto f = frame_length.count();
    const auto frames = (since + f - 1) / f;
    return wake_offset + SimTime{frames * f};
}

bool DutySchedule::in_window(SimTime t) const noexcept
{
    if (t < wake_offset) {
        return false;
    }
    return (t - wake_offset).count() % frame_length.count() < active_window.count();
}

namespace {

std::string describe(NodeId center, const std::set<NodeId>& hood)
{
    std::ostringstream os;
    os << "2-hop neighbourhood of node " << to_index(center) << " {";
    bool first = true;
    for (NodeId id : hood) {
        os << (first ? "" : ",") << to_index(id);
        first = false;
    }
    os << "}";
    return os.str();
}

bool windows_overlap(SimTime a, SimTime b, SimTime active, SimTime frame) noexcept
{
    const auto f = frame.count();
    const auto diff = (((b - a).count() % f) + f) % f;
    return diff < active.count() || f - diff < active.count();
}

} // namespace

std::map<NodeId, DutySchedule> build_schedules(std::span<const ScheduleNode> nodes, SimTime frame_length,
                                               SimTime active_window)
{
    if (!(active_window > SimTime::zero() && active_window <= frame_length)) {
        throw ScheduleError("build_schedules: need 0 < active_window <= frame_length");
    }
    std::unordered_map<std::uint32_t, const ScheduleNode*> by_id;
    int max_depth = 0;
    for (const auto& n : nodes) {
        if (n.depth < 0) {
            throw ScheduleError("build_schedules: node " + to_string(n.id) + " has negative depth");
        }
        by_id.emplace(to_index(n.id), &n);
        max_depth = std::max(max_depth, n.depth);
    }

    std::map<NodeId, std::set<NodeId>> two_hop;
    for (const auto& n : nodes) {
        auto& hood = two_hop[n.id];
        for (NodeId nb : n.neighbors) {
            hood.insert(nb);
            if (auto it = by_id.find(to_index(nb)); it != by_id.end()) {
                hood.insert(it->second->neighbors.begin(), it->second->neighbors.end());
            }
        }
        hood.erase(n.id);
        // ignore ids that are not scheduled (e.g. the station)
        std::erase_if(hood, [&](NodeId id) { return !by_id.contains(to_index(id)); });
    }

    for (const auto& [id, hood] : two_hop) {
        const auto needed = static_cast<std::int64_t>(hood.size() + 1) * active_window.count();
        if (needed > frame_length.count()) {
            throw ScheduleError("frame too short to orthogonalize " + describe(id, hood) + ": needs " +
                                std::to_string(needed) + " us, frame is " +
                                std::to_string(frame_length.count()) + " us");
        }
    }

    // Greedy colouring in id order among same-depth 2-hop neighbours.
    std::map<NodeId, int> rank;
    for (const auto& [id, hood] : two_hop) {
        const int depth = by_id.at(to_index(id))->depth;
        std::set<int> taken;
        for (NodeId other : hood) {
            if (auto r = rank.find(other); r != rank.end() && by_id.at(to_index(other))->depth == depth) {
                taken.insert(r->second);
            }
        }
        int r = 0;
        while (taken.contains(r)) {
            ++r;
        }
        rank[id] = r;
    }

    std::map<NodeId, DutySchedule> out;
    for (const auto& n : nodes) {
        const std::int64_t stage =
            static_cast<std::int64_t>(max_depth - n.depth) + static_cast<std::int64_t>(rank[n.id]) * (max_depth + 1);
        DutySchedule s;
        s.frame_length = frame_length;
        s.active_window = active_window;
        s.wake_offset = SimTime{(stage * active_window.count()) % frame_length.count()};
        out.emplace(n.id, s);
    }

    for (const auto& [id, hood] : two_hop) {
        for (NodeId other : hood) {
            if (windows_overlap(out.at(id).wake_offset, out.at(other).wake_offset, active_window, frame_length)) {
                throw ScheduleError("frame too short to orthogonalize " + describe(id, hood) + ": nodes " +
                                    to_string(id) + " and " + to_string(other) + " share a wake window");
            }
        }
    }
    return out;
}

} // namespace oscmac
