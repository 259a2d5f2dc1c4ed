#include "oscmac/scenario.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace oscmac {
namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg)
{
    throw ConfigError((path.empty() ? std::string("(root)") : path) + ": " + msg);
}

/// Reads one JSON object, remembering which keys were consumed so leftovers can be reported.
class Fields
{
  public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            fail(path_, "must be an object");
        }
    }

    std::string at(std::string_view key) const
    {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    const json* get(const char* key)
    {
        used_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    double number(const char* key, double def, bool allow_zero = false)
    {
        const json* v = get(key);
        if (v == nullptr) {
            return def;
        }
        if (!v->is_number()) {
            fail(at(key), "must be a number");
        }
        const double x = v->get<double>();
        if (!std::isfinite(x) || x < 0.0 || (!allow_zero && x == 0.0)) {
            fail(at(key), allow_zero ? "must be non-negative" : "must be positive");
        }
        return x;
    }

    double required_coordinate(const char* key)
    {
        const json* v = get(key);
        if (v == nullptr) {
            fail(at(key), "required field missing");
        }
        if (!v->is_number() || !std::isfinite(v->get<double>())) {
            fail(at(key), "must be a finite number");
        }
        return v->get<double>();
    }

    std::uint64_t integer(const char* key, std::uint64_t def, std::uint64_t min,
                          std::uint64_t max = std::numeric_limits<std::uint64_t>::max())
    {
        const json* v = get(key);
        return v == nullptr ? def : as_integer(*v, at(key), min, max);
    }

    static std::uint64_t as_integer(const json& v, const std::string& path, std::uint64_t min, std::uint64_t max)
    {
        if (!v.is_number_integer()) {
            fail(path, "must be an integer");
        }
        if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) {
            const auto x = v.get<std::uint64_t>();
            if (x >= min && x <= max) {
                return x;
            }
        }
        fail(path, "must be in [" + std::to_string(min) + ", " + std::to_string(max) + "]");
    }

    SimTime duration(const char* key, SimTime def, bool allow_zero = false)
    {
        const json* v = get(key);
        if (v == nullptr) {
            return def;
        }
        const double s = number(key, 0.0, allow_zero);
        const SimTime t = from_seconds(s);
        if (!allow_zero && t <= SimTime::zero()) {
            fail(at(key), "must be at least one microsecond");
        }
        return t;
    }

    bool boolean(const char* key, bool def)
    {
        const json* v = get(key);
        if (v == nullptr) {
            return def;
        }
        if (!v->is_boolean()) {
            fail(at(key), "must be true or false");
        }
        return v->get<bool>();
    }

    std::optional<std::string> string(const char* key)
    {
        const json* v = get(key);
        if (v == nullptr) {
            return std::nullopt;
        }
        if (!v->is_string()) {
            fail(at(key), "must be a string");
        }
        return v->get<std::string>();
    }

    void finish() const
    {
        for (const auto& item : j_.items()) {
            if (used_.count(item.key()) == 0) {
                fail(at(item.key()), "unknown key");
            }
        }
    }

  private:
    const json& j_;
    std::string path_;
    std::set<std::string, std::less<>> used_;
};

double seconds(SimTime t)
{
    return static_cast<double>(t.count()) * 1e-6;
}

void parse_radio(const json& j, RadioEnergyParams& r)
{
    Fields f(j, "radio");
    r.e_elec = f.number("e_elec", r.e_elec);
    r.e_fs = f.number("e_fs", r.e_fs);
    r.e_mp = f.number("e_mp", r.e_mp);
    r.e_rx = f.number("e_rx", r.e_rx);
    r.p_rx = f.number("p_rx", r.p_rx);
    r.p_sleep = f.number("p_sleep", r.p_sleep);
    f.finish();
}

std::vector<NodeSpec> parse_nodes(const json& j)
{
    if (!j.is_array() || j.empty()) {
        fail("topology.nodes", "must be a non-empty array");
    }
    std::vector<NodeSpec> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string path = "topology.nodes[" + std::to_string(i) + "]";
        Fields f(j[i], path);
        NodeSpec n;
        const json* id = f.get("id");
        if (id == nullptr) {
            fail(f.at("id"), "required field missing");
        }
        n.id = NodeId{static_cast<std::uint32_t>(Fields::as_integer(*id, f.at("id"), 0, 1u << 20))};
        n.position = {f.required_coordinate("x"), f.required_coordinate("y")};
        const auto role = f.string("role");
        if (!role) {
            fail(f.at("role"), "required field missing");
        }
        const auto r = role_from_string(*role);
        if (!r) {
            fail(f.at("role"), "must be one of trn, relay, helper, fr, wilem");
        }
        n.role = *r;
        n.initial_energy = f.number("initial_energy_j", 1.0);
        if (const json* nh = f.get("next_hop")) {
            n.next_hop = NodeId{static_cast<std::uint32_t>(Fields::as_integer(*nh, f.at("next_hop"), 0, 1u << 20))};
        }
        f.finish();
        out.push_back(n);
    }
    return out;
}

GeneratorSpec parse_generator(const json& j)
{
    Fields f(j, "topology.generator");
    GeneratorSpec g;
    g.count = static_cast<std::uint32_t>(f.integer("count", g.count, 2, 100000));
    g.width = f.number("width", g.width);
    g.height = f.number("height", g.height);
    if (const json* s = f.get("seed")) {
        g.seed = Fields::as_integer(*s, f.at("seed"), 0, std::numeric_limits<std::uint64_t>::max());
    }
    g.initial_energy = f.number("initial_energy_j", g.initial_energy);
    g.trn_count = static_cast<std::uint32_t>(f.integer("trn_count", g.trn_count, 0, g.count - 1));
    f.finish();
    return g;
}

CtMode parse_mode(const std::string& s, const std::string& path)
{
    if (s == "ct") {
        return CtMode::ct;
    }
    if (s == "noct") {
        return CtMode::noct;
    }
    if (s == "auto") {
        return CtMode::automatic;
    }
    fail(path, "must be one of ct, noct, auto");
}

void parse_mac(const json& j, MacConfig& m)
{
    Fields f(j, "mac");
    m.frame_length = f.duration("frame_length_s", m.frame_length);
    m.active_window = f.duration("active_window_s", m.active_window);
    m.slot_duration = f.duration("slot_duration_s", m.slot_duration);
    m.guard = f.duration("guard_s", m.guard, true);
    m.reply_timeout = f.duration("reply_timeout_s", m.reply_timeout);
    m.ack_timeout = f.duration("ack_timeout_s", m.ack_timeout);
    m.contention_slots = static_cast<std::uint32_t>(f.integer("contention_slots", m.contention_slots, 1, 1024));
    m.retry_cap = static_cast<std::uint32_t>(f.integer("retry_cap", m.retry_cap, 0, 1000));
    m.max_helpers = static_cast<std::uint32_t>(f.integer("max_helpers", m.max_helpers, 0, 1000));
    m.max_ct_packets = static_cast<std::uint32_t>(f.integer("max_ct_packets", m.max_ct_packets, 1, 255));
    if (const auto mode = f.string("mode")) {
        m.mode = parse_mode(*mode, f.at("mode"));
    }
    m.auto_residual_fraction = f.number("auto_residual_fraction", m.auto_residual_fraction, true);
    m.control_bits = f.integer("control_bits", m.control_bits, 1);
    m.superframe_bits = f.integer("superframe_bits", m.superframe_bits, 1);
    m.bitrate_bps = f.number("bitrate_bps", m.bitrate_bps);
    f.finish();
}

void parse_traffic(const json& j, ScenarioConfig& c)
{
    Fields f(j, "traffic");
    auto& t = c.sim.traffic;
    c.sim.mac.packet_size_bytes =
        static_cast<std::uint32_t>(f.integer("packet_size_bytes", c.sim.mac.packet_size_bytes, 1, 1u << 24));
    t.packets_per_source = static_cast<std::uint32_t>(f.integer("packets_per_source", t.packets_per_source, 0, 1u << 30));
    if (const json* s = f.get("sources")) {
        if (!s->is_array()) {
            fail(f.at("sources"), "must be an array of node ids");
        }
        for (std::size_t i = 0; i < s->size(); ++i) {
            const auto id = Fields::as_integer((*s)[i], f.at("sources") + "[" + std::to_string(i) + "]", 0, 1u << 20);
            t.sources.push_back(NodeId{static_cast<std::uint32_t>(id)});
        }
    }
    t.start = f.duration("start_s", t.start, true);
    t.interval = f.duration("interval_s", t.interval);
    t.jitter = f.duration("jitter_s", t.jitter, true);
    f.finish();
}

json to_json(const ScenarioConfig& c, bool with_output, bool with_mode)
{
    const auto& s = c.sim;
    json doc = json::object();
    doc["radio"] = {{"e_elec", s.radio.e_elec}, {"e_fs", s.radio.e_fs},  {"e_mp", s.radio.e_mp},
                    {"e_rx", s.radio.e_rx},     {"p_rx", s.radio.p_rx}, {"p_sleep", s.radio.p_sleep}};

    json topo = json::object();
    topo["base_range"] = s.mac.base_range;
    if (c.generator) {
        const auto& g = *c.generator;
        json gen = {{"count", g.count},
                    {"width", g.width},
                    {"height", g.height},
                    {"initial_energy_j", g.initial_energy},
                    {"trn_count", g.trn_count}};
        if (g.seed) {
            gen["seed"] = *g.seed;
        }
        topo["generator"] = gen;
    } else {
        json nodes = json::array();
        for (const auto& n : s.nodes) {
            json node = {{"id", to_index(n.id)},
                         {"x", n.position.x},
                         {"y", n.position.y},
                         {"role", std::string(to_string(n.role))},
                         {"initial_energy_j", n.initial_energy}};
            if (n.next_hop) {
                node["next_hop"] = to_index(*n.next_hop);
            }
            nodes.push_back(node);
        }
        topo["nodes"] = nodes;
    }
    doc["topology"] = topo;

    json sources = json::array();
    for (NodeId id : s.traffic.sources) {
        sources.push_back(to_index(id));
    }
    doc["traffic"] = {{"packet_size_bytes", s.mac.packet_size_bytes},
                      {"packets_per_source", s.traffic.packets_per_source},
                      {"sources", sources},
                      {"start_s", seconds(s.traffic.start)},
                      {"interval_s", seconds(s.traffic.interval)},
                      {"jitter_s", seconds(s.traffic.jitter)}};

    const auto& m = s.mac;
    json mac = {{"frame_length_s", seconds(m.frame_length)},
                {"active_window_s", seconds(m.active_window)},
                {"slot_duration_s", seconds(m.slot_duration)},
                {"guard_s", seconds(m.guard)},
                {"reply_timeout_s", seconds(m.reply_timeout)},
                {"ack_timeout_s", seconds(m.ack_timeout)},
                {"contention_slots", m.contention_slots},
                {"retry_cap", m.retry_cap},
                {"max_helpers", m.max_helpers},
                {"max_ct_packets", m.max_ct_packets},
                {"auto_residual_fraction", m.auto_residual_fraction},
                {"control_bits", m.control_bits},
                {"superframe_bits", m.superframe_bits},
                {"bitrate_bps", m.bitrate_bps}};
    if (with_mode) {
        mac["mode"] = std::string(to_string(m.mode));
    }
    doc["mac"] = mac;

    doc["horizon_s"] = seconds(s.horizon);
    doc["stop_when_traffic_done"] = s.stop_when_traffic_done;
    doc["timeline_stride_frames"] = s.timeline_stride_frames;

    if (with_output && (c.trace_path || c.metrics_path)) {
        json out = json::object();
        if (c.trace_path) {
            out["trace"] = *c.trace_path;
        }
        if (c.metrics_path) {
            out["metrics"] = *c.metrics_path;
        }
        doc["output"] = out;
    }
    return doc;
}

std::string sha256_hex(std::string_view text)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

} // namespace

ScenarioConfig parse_config(std::string_view document)
{
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("(document): invalid JSON: ") + e.what());
    }

    ScenarioConfig c;
    auto& sim = c.sim;
    Fields root(doc, "");
    if (const json* r = root.get("radio")) {
        parse_radio(*r, sim.radio);
    }

    const json* topo = root.get("topology");
    if (topo == nullptr) {
        fail("topology", "required field missing");
    }
    Fields t(*topo, "topology");
    const double base_range = t.number("base_range", 90.0);
    const json* nodes = t.get("nodes");
    const json* gen = t.get("generator");
    if (nodes != nullptr && gen != nullptr) {
        fail("topology", "nodes and generator are mutually exclusive");
    }
    if (nodes == nullptr && gen == nullptr) {
        fail("topology", "one of nodes or generator is required");
    }
    if (nodes != nullptr) {
        sim.nodes = parse_nodes(*nodes);
    } else {
        c.generator = parse_generator(*gen);
    }
    t.finish();

    if (const json* tr = root.get("traffic")) {
        parse_traffic(*tr, c);
    }
    if (const json* m = root.get("mac")) {
        parse_mac(*m, sim.mac);
    }
    sim.mac.base_range = base_range;
    sim.horizon = root.duration("horizon_s", sim.horizon);
    sim.stop_when_traffic_done = root.boolean("stop_when_traffic_done", sim.stop_when_traffic_done);
    sim.timeline_stride_frames =
        static_cast<std::uint32_t>(root.integer("timeline_stride_frames", sim.timeline_stride_frames, 1, 1u << 30));
    if (const json* o = root.get("output")) {
        Fields f(*o, "output");
        c.trace_path = f.string("trace");
        c.metrics_path = f.string("metrics");
        f.finish();
    }
    root.finish();

    try {
        sim.mac.validate();
    } catch (const ScheduleError& e) {
        throw ConfigError(e.what());
    }

    // Cross-field checks against the node set.
    std::uint32_t node_count = 0;
    NodeId station = kNoNode;
    if (!sim.nodes.empty()) {
        try {
            const auto topo_checked = Topology::build(sim.nodes, base_range);
            node_count = static_cast<std::uint32_t>(topo_checked.size());
            station = topo_checked.station;
        } catch (const TopologyError& e) {
            throw ConfigError(std::string("topology.nodes: ") + e.what());
        }
    } else {
        node_count = c.generator->count + 1;
        station = NodeId{c.generator->count};
    }
    for (std::size_t i = 0; i < sim.traffic.sources.size(); ++i) {
        const NodeId s = sim.traffic.sources[i];
        if (to_index(s) >= node_count || s == station) {
            fail("traffic.sources[" + std::to_string(i) + "]", "node " + to_string(s) + " is not a network node");
        }
    }
    return c;
}

std::string to_json_text(const ScenarioConfig& config, bool pretty)
{
    return to_json(config, true, true).dump(pretty ? 2 : -1);
}

std::string canonical_text(const ScenarioConfig& config, bool strip_mode)
{
    return to_json(config, false, !strip_mode).dump();
}

std::string config_hash(const ScenarioConfig& config, bool strip_mode)
{
    return sha256_hex(canonical_text(config, strip_mode));
}

std::vector<NodeSpec> generate_nodes(const GeneratorSpec& g, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    const Position centre{g.width / 2.0, g.height / 2.0};

    std::vector<NodeSpec> nodes;
    nodes.push_back({NodeId{0}, centre, Role::fr, g.initial_energy, std::nullopt});
    for (std::uint32_t i = 1; i < g.count; ++i) {
        const double x = uniform() * g.width;
        const double y = uniform() * g.height;
        nodes.push_back({NodeId{i}, {x, y}, Role::relay, g.initial_energy, std::nullopt});
    }

    std::vector<std::uint32_t> order;
    for (std::uint32_t i = 1; i < g.count; ++i) {
        order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return distance(nodes[a].position, centre) > distance(nodes[b].position, centre);
    });
    for (std::uint32_t k = 0; k < g.trn_count && k < order.size(); ++k) {
        nodes[order[k]].role = Role::trn;
    }
    nodes.push_back({NodeId{g.count}, centre, Role::wilem, g.initial_energy, std::nullopt});
    return nodes;
}

SimulationConfig resolve(const ScenarioConfig& config, std::uint64_t seed)
{
    SimulationConfig sim = config.sim;
    if (config.generator) {
        sim.nodes = generate_nodes(*config.generator, config.generator->seed.value_or(seed));
    }
    return sim;
}

} // namespace oscmac
