#pragma once

#include "oscmac/scenario.hpp"
#include "oscmac/sim_engine.hpp"
#include "oscmac/trace.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace oscmac {

inline constexpr std::string_view kTraceColumns =
    "time_us,seq,node,phase,event,category,charge_j,residual_j,detail";

/// "# oscmac-trace version=V config_sha256=H seed=S"
std::string trace_header(std::string_view config_sha256, std::uint64_t seed);

/// Streams records as CSV. Doubles use 17 significant digits so sums can be replayed exactly.
class CsvTraceWriter : public TraceSink
{
  public:
    CsvTraceWriter(std::ostream& out, std::string_view config_sha256, std::uint64_t seed);
    void record(const TraceRecord& rec) override;
    std::uint64_t count() const noexcept { return count_; }

  private:
    std::ostream& out_;
    std::uint64_t count_{0};
};

std::string format_record(const TraceRecord& rec);

/// Splits one CSV data row back into a record. Throws std::invalid_argument on malformed input.
TraceRecord parse_record(std::string_view line);

struct RunInfo
{
    std::string config_sha256;
    std::string config_sha256_mode_stripped;
    std::uint64_t seed{0};
    CtMode mode{CtMode::automatic};
};

std::string metrics_to_json(const Metrics& m, const RunInfo& info);

} // namespace oscmac
