#include "oscmac/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace oscmac {
namespace {

namespace fs = std::filesystem;

/// Failure that is not the user's configuration: I/O and the like.
class RuntimeFailure : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

std::string stem_of(const std::string& config_path)
{
    fs::path p(config_path);
    return (p.parent_path() / p.stem()).string();
}

/// "out/a.trace.csv" + 3 -> "out/a.trace.seed3.csv"
std::string with_seed(const std::string& path, std::uint64_t seed)
{
    fs::path p(path);
    return (p.parent_path() / (p.stem().string() + ".seed" + std::to_string(seed) + p.extension().string())).string();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) {
        throw RuntimeFailure("cannot write " + path);
    }
}

double lifetime_of(const Metrics& m)
{
    return m.network_lifetime_first_death_s.value_or(m.end_time_s);
}

std::string fmt(const char* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string opt_fmt(const std::optional<double>& v)
{
    return v ? fmt("%.6f", *v) : std::string("-");
}

nlohmann::json stats(const std::vector<double>& xs)
{
    if (xs.empty()) {
        return nullptr;
    }
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
    }
    return {{"mean", sum / static_cast<double>(xs.size())},
            {"min", *std::min_element(xs.begin(), xs.end())},
            {"max", *std::max_element(xs.begin(), xs.end())}};
}

nlohmann::json summary(const Metrics& m)
{
    nlohmann::json categories = nlohmann::json::object();
    std::array<Joules, kEnergyCategoryCount> totals{};
    for (const auto& n : m.nodes) {
        for (std::size_t i = 0; i < kEnergyCategoryCount; ++i) {
            totals[i] += n.consumed[i];
        }
    }
    for (std::size_t i = 0; i < kEnergyCategoryCount; ++i) {
        categories[std::string(to_string(static_cast<EnergyCategory>(i)))] = totals[i];
    }
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"network_lifetime_first_death_s", opt(m.network_lifetime_first_death_s)},
            {"trn_death_time_s", opt(m.trn_death_time_s)},
            {"lifetime_s", lifetime_of(m)},
            {"lifetime_censored", !m.network_lifetime_first_death_s.has_value()},
            {"delivery_ratio", m.delivery_ratio()},
            {"packets_offered", m.packets_offered},
            {"packets_delivered", m.packets_delivered},
            {"collisions", m.collisions},
            {"energy_by_category_j", categories}};
}

template <class F>
int guarded(std::ostream& err, F&& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const TopologyError& e) {
        err << "config error: topology: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ScheduleError& e) {
        err << "config error: schedule: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

} // namespace

ScenarioConfig load_config(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError(path + ": cannot open config file");
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

RunOutput execute(const ScenarioConfig& config, std::uint64_t seed, const std::optional<std::string>& trace_path)
{
    RunOutput out;
    out.info.config_sha256 = config_hash(config);
    out.info.config_sha256_mode_stripped = config_hash(config, true);
    out.info.seed = seed;
    out.info.mode = config.sim.mac.mode;
    const SimulationConfig sim = resolve(config, seed);
    if (!trace_path) {
        out.metrics = run(sim, seed, nullptr);
        return out;
    }
    std::ofstream f(*trace_path, std::ios::binary);
    if (!f) {
        throw RuntimeFailure("cannot open trace file " + *trace_path);
    }
    CsvTraceWriter writer(f, out.info.config_sha256, seed);
    out.metrics = run(sim, seed, &writer);
    f.flush();
    if (!f) {
        throw RuntimeFailure("error writing trace file " + *trace_path);
    }
    return out;
}

int run_command(const RunOptions& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        ScenarioConfig cfg = load_config(opts.config_path);
        if (opts.mode) {
            cfg.sim.mac.mode = *opts.mode;
        }
        const std::string stem = stem_of(opts.config_path);
        const std::string trace = opts.trace_path.value_or(cfg.trace_path.value_or(stem + ".trace.csv"));
        const std::string metrics = opts.metrics_path.value_or(cfg.metrics_path.value_or(stem + ".metrics.json"));

        if (!opts.sweep) {
            const auto r = execute(cfg, opts.seed, trace);
            write_file(metrics, metrics_to_json(r.metrics, r.info));
            out << "seed " << opts.seed << ": delivered " << r.metrics.packets_delivered << "/"
                << r.metrics.packets_offered << ", first death " << opt_fmt(r.metrics.network_lifetime_first_death_s)
                << " s, events " << r.metrics.events_processed << "\n"
                << "wrote " << trace << " and " << metrics << "\n";
            return kExitOk;
        }

        const std::uint32_t k = *opts.sweep;
        if (k == 0) {
            throw ConfigError("--sweep: must be at least 1");
        }
        nlohmann::json runs = nlohmann::json::array();
        std::vector<double> lifetimes, trn_deaths, ratios;
        for (std::uint32_t seed = 0; seed < k; ++seed) {
            const auto r = execute(cfg, seed, with_seed(trace, seed));
            write_file(with_seed(metrics, seed), metrics_to_json(r.metrics, r.info));
            auto row = summary(r.metrics);
            row["seed"] = seed;
            runs.push_back(row);
            lifetimes.push_back(lifetime_of(r.metrics));
            if (r.metrics.trn_death_time_s) {
                trn_deaths.push_back(*r.metrics.trn_death_time_s);
            }
            ratios.push_back(r.metrics.delivery_ratio());
            out << "seed " << seed << ": lifetime " << fmt("%.6f", lifetimes.back()) << " s, delivery "
                << fmt("%.4f", ratios.back()) << "\n";
        }
        nlohmann::json agg = {{"version", std::string(kToolVersion)},
                              {"config_sha256", config_hash(cfg)},
                              {"seeds", k},
                              {"runs", runs},
                              {"lifetime_s", stats(lifetimes)},
                              {"trn_death_time_s", stats(trn_deaths)},
                              {"delivery_ratio", stats(ratios)}};
        const std::string agg_path = stem + ".sweep.json";
        write_file(agg_path, agg.dump(2) + "\n");
        out << "wrote " << k << " runs and " << agg_path << "\n";
        return kExitOk;
    });
}

int compare_command(const CompareOptions& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        if (opts.seeds == 0) {
            throw ConfigError("--seeds: must be at least 1");
        }
        const ScenarioConfig base = load_config(opts.config_path);
        ScenarioConfig ct = base;
        ct.sim.mac.mode = CtMode::ct;
        ScenarioConfig noct = base;
        noct.sim.mac.mode = CtMode::noct;
        if (config_hash(ct, true) != config_hash(noct, true)) {
            throw RuntimeFailure("compared configurations differ outside mac.mode");
        }
        if (opts.trace_dir) {
            fs::create_directories(*opts.trace_dir);
        }
        auto trace_for = [&](std::uint32_t seed, std::string_view mode) -> std::optional<std::string> {
            if (!opts.trace_dir) {
                return std::nullopt;
            }
            return (fs::path(*opts.trace_dir) / ("seed" + std::to_string(seed) + "." + std::string(mode) + ".trace.csv"))
                .string();
        };

        out << "config " << config_hash(ct, true) << " (mode-stripped)\n";
        out << "seed  mode  first_death_s  trn_death_s  delivery  transmit_J    receive_J     idle_listen_J "
               "sleep_J       overhear_J\n";
        nlohmann::json rows = nlohmann::json::array();
        double ct_life = 0.0;
        double noct_life = 0.0;
        for (std::uint32_t seed = 0; seed < opts.seeds; ++seed) {
            for (const auto* cfg : {&ct, &noct}) {
                const auto mode = to_string(cfg->sim.mac.mode);
                const auto r = execute(*cfg, seed, trace_for(seed, mode));
                std::array<Joules, kEnergyCategoryCount> totals{};
                for (const auto& n : r.metrics.nodes) {
                    for (std::size_t i = 0; i < kEnergyCategoryCount; ++i) {
                        totals[i] += n.consumed[i];
                    }
                }
                char line[256];
                std::snprintf(line, sizeof line, "%-5u %-5s %-14s %-12s %-9.4f", seed, std::string(mode).c_str(),
                              opt_fmt(r.metrics.network_lifetime_first_death_s).c_str(),
                              opt_fmt(r.metrics.trn_death_time_s).c_str(), r.metrics.delivery_ratio());
                out << line;
                for (double t : totals) {
                    out << fmt(" %-13.6e", t);
                }
                out << "\n";
                (cfg == &ct ? ct_life : noct_life) += lifetime_of(r.metrics);
                auto row = summary(r.metrics);
                row["seed"] = seed;
                row["mode"] = std::string(mode);
                rows.push_back(row);
            }
        }
        const double ratio = noct_life > 0.0 ? ct_life / noct_life : 0.0;
        out << "lifetime ratio ct/noct: " << (noct_life > 0.0 ? fmt("%.6f", ratio) : std::string("n/a")) << "\n";
        if (opts.out_path) {
            nlohmann::json doc = {{"version", std::string(kToolVersion)},
                                  {"config_sha256_mode_stripped", config_hash(ct, true)},
                                  {"seeds", opts.seeds},
                                  {"runs", rows},
                                  {"lifetime_ratio_ct_noct", noct_life > 0.0 ? nlohmann::json(ratio) : nlohmann::json(nullptr)}};
            write_file(*opts.out_path, doc.dump(2) + "\n");
        }
        return kExitOk;
    });
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Duty-cycled cooperative-transmission MAC simulator", "oscmac"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    RunOptions ropts;
    std::string rmode;
    std::uint32_t sweep = 0;
    auto* run_cmd = app.add_subcommand("run", "Run one scenario (or a seed sweep)");
    run_cmd->add_option("--config", ropts.config_path, "Scenario JSON")->required();
    run_cmd->add_option("--seed", ropts.seed, "Run seed (default 0)");
    run_cmd->add_option("--mode", rmode, "Override mac.mode")->check(CLI::IsMember({"ct", "noct", "auto"}));
    run_cmd->add_option("--trace", ropts.trace_path, "Trace CSV path");
    run_cmd->add_option("--metrics", ropts.metrics_path, "Metrics JSON path");
    auto* sweep_opt = run_cmd->add_option("--sweep", sweep, "Run seeds 0..K-1 and aggregate");

    CompareOptions copts;
    auto* cmp_cmd = app.add_subcommand("compare", "Run a scenario under ct and noct for several seeds");
    cmp_cmd->add_option("--config", copts.config_path, "Scenario JSON")->required();
    cmp_cmd->add_option("--seeds", copts.seeds, "Number of seeds (0..K-1)")->required();
    cmp_cmd->add_option("--out", copts.out_path, "Write the comparison as JSON");
    cmp_cmd->add_option("--trace-dir", copts.trace_dir, "Write per-run traces into this directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const CLI::App* sub = nullptr;
        for (const auto* s : app.get_subcommands()) {
            sub = s;
        }
        err << (sub != nullptr ? sub->help() : app.help());
        return kExitConfig;
    }

    if (*run_cmd) {
        if (!rmode.empty()) {
            ropts.mode = rmode == "ct" ? CtMode::ct : rmode == "noct" ? CtMode::noct : CtMode::automatic;
        }
        if (sweep_opt->count() > 0) {
            ropts.sweep = sweep;
        }
        return run_command(ropts, out, err);
    }
    return compare_command(copts, out, err);
}

} // namespace oscmac
