#pragma once

#include "oscmac/mac_protocol.hpp"
#include "oscmac/output.hpp"
#include "oscmac/scenario.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace oscmac {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

struct RunOptions
{
    std::string config_path;
    std::uint64_t seed{0};
    std::optional<CtMode> mode;
    std::optional<std::string> trace_path;
    std::optional<std::string> metrics_path;
    std::optional<std::uint32_t> sweep;  ///< seeds 0..K-1
};

struct CompareOptions
{
    std::string config_path;
    std::uint32_t seeds{1};
    std::optional<std::string> out_path;   ///< JSON summary
    std::optional<std::string> trace_dir;  ///< per-run traces, seed<k>.<mode>.trace.csv
};

struct RunOutput
{
    Metrics metrics;
    RunInfo info;
};

ScenarioConfig load_config(const std::string& path);

/// One simulation; writes the trace when a path is given.
RunOutput execute(const ScenarioConfig& config, std::uint64_t seed, const std::optional<std::string>& trace_path);

int run_command(const RunOptions& opts, std::ostream& out, std::ostream& err);
int compare_command(const CompareOptions& opts, std::ostream& out, std::ostream& err);

/// Full command line: `oscmac run ...` or `oscmac compare ...`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace oscmac
