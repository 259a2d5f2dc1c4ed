#include "oscmac/output.hpp"

#include <json.hpp>

#include <cstdio>
#include <stdexcept>

namespace oscmac {
namespace {

std::string g17(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

bool needs_quotes(std::string_view s)
{
    return s.find_first_of(",\"\n\r") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view s)
{
    if (!needs_quotes(s)) {
        out += s;
        return;
    }
    out += '"';
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
}

nlohmann::json optional_number(const std::optional<double>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json categories(const std::array<Joules, kEnergyCategoryCount>& c)
{
    nlohmann::json out = nlohmann::json::object();
    for (std::size_t i = 0; i < kEnergyCategoryCount; ++i) {
        out[std::string(to_string(static_cast<EnergyCategory>(i)))] = c[i];
    }
    return out;
}

} // namespace

std::string trace_header(std::string_view config_sha256, std::uint64_t seed)
{
    return "# oscmac-trace version=" + std::string(kToolVersion) + " config_sha256=" + std::string(config_sha256) +
           " seed=" + std::to_string(seed);
}

CsvTraceWriter::CsvTraceWriter(std::ostream& out, std::string_view config_sha256, std::uint64_t seed) : out_(out)
{
    out_ << trace_header(config_sha256, seed) << '\n' << kTraceColumns << '\n';
}

void CsvTraceWriter::record(const TraceRecord& rec)
{
    out_ << format_record(rec) << '\n';
    ++count_;
}

std::string format_record(const TraceRecord& rec)
{
    std::string line;
    line.reserve(96 + rec.detail.size());
    line += std::to_string(rec.time_us);
    line += ',';
    line += std::to_string(rec.sequence);
    line += ',';
    line += to_string(rec.node);
    line += ',';
    line += rec.phase;
    line += ',';
    append_field(line, rec.event);
    line += ',';
    line += rec.category;
    line += ',';
    line += g17(rec.charge_j);
    line += ',';
    line += g17(rec.residual_j);
    line += ',';
    append_field(line, rec.detail);
    return line;
}

TraceRecord parse_record(std::string_view line)
{
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (fields.size() != 9) {
        throw std::invalid_argument("trace row has " + std::to_string(fields.size()) + " fields, expected 9");
    }
    TraceRecord r;
    r.time_us = std::stoll(fields[0]);
    r.sequence = std::stoull(fields[1]);
    r.node = NodeId{static_cast<std::uint32_t>(std::stoul(fields[2]))};
    r.phase = fields[3];
    r.event = fields[4];
    r.category = fields[5];
    r.charge_j = std::stod(fields[6]);
    r.residual_j = std::stod(fields[7]);
    r.detail = fields[8];
    return r;
}

std::string metrics_to_json(const Metrics& m, const RunInfo& info)
{
    using nlohmann::json;
    json doc = json::object();
    doc["version"] = std::string(kToolVersion);
    doc["config_sha256"] = info.config_sha256;
    doc["config_sha256_mode_stripped"] = info.config_sha256_mode_stripped;
    doc["seed"] = info.seed;
    doc["mode"] = std::string(to_string(info.mode));
    doc["network_lifetime_first_death_s"] = optional_number(m.network_lifetime_first_death_s);
    doc["trn_death_time_s"] = optional_number(m.trn_death_time_s);
    doc["packets_offered"] = m.packets_offered;
    doc["packets_delivered"] = m.packets_delivered;
    doc["packets_failed"] = m.packets_failed;
    doc["delivery_ratio"] = m.delivery_ratio();
    doc["collisions"] = m.collisions;
    doc["events_processed"] = m.events_processed;
    doc["ct_rendezvous"] = m.ct_rendezvous;
    doc["end_time_s"] = m.end_time_s;
    doc["trace_charged_total_j"] = m.trace_charged_total;

    std::array<Joules, kEnergyCategoryCount> totals{};
    json nodes = json::array();
    for (const auto& n : m.nodes) {
        for (std::size_t i = 0; i < kEnergyCategoryCount; ++i) {
            totals[i] += n.consumed[i];
        }
        nodes.push_back({{"id", to_index(n.node)},
                         {"role", std::string(to_string(n.role))},
                         {"initial_j", n.initial},
                         {"residual_j", n.residual},
                         {"death_time_s", optional_number(n.death_time_s)},
                         {"energy_by_category_j", categories(n.consumed)}});
    }
    doc["energy_by_category_j"] = categories(totals);
    doc["nodes"] = nodes;

    json timeline = json::array();
    for (const auto& s : m.energy_timeline) {
        timeline.push_back({{"t_s", s.time_s}, {"node", to_index(s.node)}, {"residual_j", s.residual}});
    }
    doc["energy_timeline"] = timeline;
    return doc.dump(2) + "\n";
}

} // namespace oscmac
