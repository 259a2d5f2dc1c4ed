#pragma once

#include "oscmac/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace oscmac {

/// One processed node-level event. Charges carry the drawn amount; other records have charge 0.
struct TraceRecord
{
    std::int64_t time_us{0};
    std::uint64_t sequence{0};  ///< queue sequence of the event that produced the record
    NodeId node{};
    std::string phase;
    std::string event;
    std::string category;  ///< energy category, empty for non-charge records
    double charge_j{0.0};
    double residual_j{0.0};
    std::string detail;  ///< key=value pairs separated by ';'
};

class TraceSink
{
  public:
    virtual ~TraceSink() = default;
    virtual void record(const TraceRecord& rec) = 0;
};

/// Keeps every record in memory. Meant for tests and small runs.
class MemoryTrace : public TraceSink
{
  public:
    void record(const TraceRecord& rec) override { records.push_back(rec); }
    std::vector<TraceRecord> records;
};

} // namespace oscmac
