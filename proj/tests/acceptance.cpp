// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "scenarios.hpp"

#include "oscmac/channel.hpp"
#include "oscmac/commands.hpp"
#include "oscmac/helper_selection.hpp"

#include <openssl/evp.h>
#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

using namespace oscmac;
using namespace oscmac::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict
{
    bool pass{true};
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string num(const char* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

double elapsed_s(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string file_sha256(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    const std::string data = s.str();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        char b[3];
        std::snprintf(b, sizeof b, "%02x", digest[i]);
        hex += b;
    }
    return hex;
}

fs::path scenario_file(const char* name)
{
    return fs::path(OSCMAC_SCENARIO_DIR) / name;
}

/// Independent long-double evaluation of the two-regime transmit cost.
long double reference_tx(long double bits, long double d, const RadioEnergyParams& p)
{
    const long double d0 = std::sqrt(static_cast<long double>(p.e_fs) / static_cast<long double>(p.e_mp));
    const long double elec = bits * static_cast<long double>(p.e_elec);
    if (d >= d0) {
        return elec + bits * static_cast<long double>(p.e_mp) * d * d * d * d;
    }
    return elec + bits * static_cast<long double>(p.e_fs) * d * d;
}

Verdict energy_oracle()
{
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    const RadioEnergyParams p;
    std::mt19937_64 rng(20261016);
    std::uniform_int_distribution<std::uint64_t> bits(1, 10000);
    std::uniform_real_distribution<double> dist(0.0, 300.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto b = bits(rng);
        const double d = dist(rng);
        const long double ref = reference_tx(static_cast<long double>(b), d, p);
        const double err = static_cast<double>(std::fabs((tx_energy(b, d, p) - ref) / ref));
        worst = std::max(worst, err);
    }
    v.require(worst <= 1e-12, "max relative error " + num("%.3g", worst));

    const double d0 = crossover_distance(p);
    double worst_gap = 0.0;
    for (std::uint64_t b : {1ULL, 800ULL, 10000ULL}) {
        const double bd = static_cast<double>(b);
        const double lo = bd * p.e_elec + bd * p.e_fs * d0 * d0;
        const double hi = bd * p.e_elec + bd * p.e_mp * d0 * d0 * d0 * d0;
        worst_gap = std::max(worst_gap, std::fabs(lo - hi) / hi);
        const double below = tx_energy(b, std::nextafter(d0, 0.0), p);
        const double at = tx_energy(b, d0, p);
        worst_gap = std::max(worst_gap, std::fabs(below - at) / at);
    }
    v.require(worst_gap <= 1e-15, "continuity gap " + num("%.3g", worst_gap));
    const double t = elapsed_s(t0);
    v.require(t < 1.0, "runtime " + num("%.3f", t) + " s");
    v.note("max rel err " + num("%.2g", worst) + ", gap at d0 " + num("%.2g", worst_gap) + ", " + num("%.3f", t) +
           " s");
    return v;
}

Verdict worked_numbers()
{
    Verdict v;
    const RadioEnergyParams p;
    const double a = tx_energy(800, 50.0, p);
    const double b = tx_energy(800, 100.0, p);
    v.require(std::fabs(a - 6.0e-5) / 6.0e-5 <= 1e-12, "tx(800,50) = " + num("%.17g", a));
    v.require(std::fabs(b - 1.44e-4) / 1.44e-4 <= 1e-12, "tx(800,100) = " + num("%.17g", b));
    v.note("tx(800,50) = " + num("%.6g", a) + " J, tx(800,100) = " + num("%.6g", b) + " J");
    return v;
}

std::vector<CandidateRecord> random_records(std::mt19937_64& rng, std::size_t n, double scale)
{
    std::uniform_real_distribution<double> e(0.0, scale);
    std::uniform_real_distribution<double> cost(1e-5, 1e-3);
    std::vector<CandidateRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({NodeId{static_cast<std::uint32_t>(i)}, e(rng), cost(rng), 10.0});
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.energy > y.energy; });
    return out;
}

Verdict selection_oracle()
{
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    const RadioEnergyParams p;
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> size(0, 20);
    std::uniform_int_distribution<std::uint32_t> packets(1, 20);
    std::uniform_real_distribution<double> dist(1.0, 200.0);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto recs = random_records(rng, size(rng), 5e-3);
        CtRequest req;
        req.requester = NodeId{1000};
        req.packet_size_bytes = 100;
        req.packet_count = packets(rng);
        req.next_hop_distance = dist(rng);

        const double s = 800.0;
        const double d = req.next_hop_distance;
        std::vector<NodeId> expect_filter;
        std::vector<NodeId> expect_elect;
        for (const auto& r : recs) {
            if (r.energy >= p.e_elec * s + p.e_fs * s * d * d) {
                expect_filter.push_back(r.node);
            }
            if (r.energy / (req.packet_count * r.per_packet_tx_energy) >= 1.0) {
                expect_elect.push_back(r.node);
            }
        }
        std::vector<NodeId> got_filter;
        for (const auto& r : filter_candidates(recs, req, p)) {
            got_filter.push_back(r.node);
        }
        mismatches += got_filter != expect_filter ? 1 : 0;
        mismatches += elect_helpers(recs, req.packet_count).helpers != expect_elect ? 1 : 0;
    }
    v.require(mismatches == 0, std::to_string(mismatches) + " mismatching lists");

    const std::vector<CandidateRecord> edge{{NodeId{1}, 1.0, 0.25, 5.0}};
    v.require(elect_helpers(edge, 4).helpers == std::vector<NodeId>{NodeId{1}}, "energy == N*E_T not elected");
    const double t = elapsed_s(t0);
    v.require(t < 1.0, "runtime " + num("%.3f", t) + " s");
    v.note("500 lists, boundary elected, " + num("%.3f", t) + " s");
    return v;
}

Verdict scale_invariance()
{
    Verdict v;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> factor(1e-3, 1e3);
    std::uniform_int_distribution<std::uint32_t> packets(1, 10);
    std::size_t changed = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto recs = random_records(rng, 15, 5e-3);
        const auto n = packets(rng);
        const auto before = elect_helpers(recs, n);
        const double c = factor(rng);
        for (auto& r : recs) {
            r.energy *= c;
            r.per_packet_tx_energy *= c;
        }
        const auto after = elect_helpers(recs, n);
        auto x = before.helpers;
        auto y = after.helpers;
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        changed += (x != y || before.leader != after.leader) ? 1 : 0;
    }
    v.require(changed == 0, std::to_string(changed) + " trials changed");
    v.note("100 trials");
    return v;
}

Verdict range_extension()
{
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    const RadioEnergyParams p;
    const std::vector<Position> group{{0, 0}, {10, 0}, {6, 8}};
    v.require(path_loss_exponent(group, {120, 0}, p) == 4.0, "not in the d^4 regime");
    const auto noct = run(range_scenario(CtMode::noct), 0);
    const auto ct = run(range_scenario(CtMode::ct), 0);
    v.require(noct.packets_delivered == 0, "noct delivered " + std::to_string(noct.packets_delivered));
    v.require(ct.packets_offered > 0 && ct.packets_delivered == ct.packets_offered,
              "ct delivered " + std::to_string(ct.packets_delivered) + "/" + std::to_string(ct.packets_offered));
    const double t = elapsed_s(t0);
    v.require(t < 1.0, "runtime " + num("%.3f", t) + " s");
    v.note("noct " + std::to_string(noct.packets_delivered) + "/" + std::to_string(noct.packets_offered) + ", ct " +
           std::to_string(ct.packets_delivered) + "/" + std::to_string(ct.packets_offered) + ", " + num("%.3f", t) +
           " s");
    return v;
}

Verdict trn_relief()
{
    Verdict v;
    const RadioEnergyParams p;
    const std::uint64_t bits = MacConfig{}.data_bits();
    const double broadcast = tx_energy(bits, 10.0, p);
    const double direct = tx_energy(bits, 120.0, p);

    const auto m = run(range_scenario(CtMode::ct), 0);
    const double trn_total = m.nodes.at(0).consumed[static_cast<std::size_t>(EnergyCategory::transmit)];
    const double per_packet = m.packets_delivered > 0 ? trn_total / static_cast<double>(m.packets_delivered) : 0.0;

    v.require(broadcast < 0.01 * direct, "tx(L,10)/tx(L,120) = " + num("%.4f", broadcast / direct) + " is not < 0.01");
    const double amp_ratio = (p.e_fs * 100.0) / (p.e_mp * std::pow(120.0, 4));
    v.note("L=" + std::to_string(bits) + " bits, broadcast " + num("%.4g", broadcast) + " J, direct " +
           num("%.4g", direct) + " J, amplifier-only ratio " + num("%.4f", amp_ratio) + ", TRN per packet under CT " +
           num("%.4g", per_packet) + " J (broadcast + cooperative share " + num("%.4g", broadcast + direct) + " + control)");
    return v;
}

Verdict determinism()
{
    Verdict v;
    const auto dir = fs::temp_directory_path() / "oscmac_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::size_t compared = 0;
    for (const char* name : {"range.json", "collision.json", "pair.json"}) {
        const auto cfg = load_config(scenario_file(name).string());
        const auto a = dir / (std::string(name) + ".a.csv");
        const auto b = dir / (std::string(name) + ".b.csv");
        execute(cfg, 7, a.string());
        execute(cfg, 7, b.string());
        v.require(file_sha256(a) == file_sha256(b), std::string(name) + " traces differ");
        ++compared;
    }

    std::ostringstream sink;
    for (const char* sub : {"x", "y"}) {
        CompareOptions opts;
        opts.config_path = scenario_file("range.json").string();
        opts.seeds = 2;
        opts.trace_dir = (dir / sub).string();
        v.require(compare_command(opts, sink, sink) == kExitOk, "compare failed");
    }
    for (const auto& entry : fs::directory_iterator(dir / "x")) {
        const auto other = dir / "y" / entry.path().filename();
        v.require(fs::exists(other) && file_sha256(entry.path()) == file_sha256(other),
                  entry.path().filename().string() + " differs under compare");
        ++compared;
    }
    v.note(std::to_string(compared) + " trace pairs byte-identical");
    return v;
}

Verdict conservation()
{
    Verdict v;
    std::vector<std::pair<std::string, SimulationConfig>> cases{
        {"range/ct", range_scenario(CtMode::ct)},
        {"range/noct", range_scenario(CtMode::noct)},
        {"range/auto", range_scenario(CtMode::automatic)},
        {"collision", collision_scenario()},
        {"pair", pair_scenario()},
        {"scale", resolve(scale_scenario(), 0)},
    };
    auto starved = resolve(scale_scenario(), 0);
    for (auto& n : starved.nodes) {
        n.initial_energy = 0.05;
    }
    starved.horizon = starved.mac.frame_length * 2000;
    cases.emplace_back("scale/low-energy", starved);

    double worst = 0.0;
    std::size_t deaths = 0;
    for (const auto& [name, cfg] : cases) {
        TraceAuditor auditor;
        const auto m = run(cfg, 0, &auditor);
        const auto a = auditor.finish(m);
        worst = std::max(worst, a.conservation_error);
        v.require(a.conservation_error <= 1e-9, name + " conservation error " + num("%.3g", a.conservation_error));
        v.require(a.violations.empty(), name + ": " + (a.violations.empty() ? "" : a.violations.front()));
        for (const auto& n : m.nodes) {
            deaths += n.death_time_s ? 1 : 0;
        }
    }
    v.note(std::to_string(cases.size()) + " scenarios, worst error " + num("%.2g", worst) + " J, " +
           std::to_string(deaths) + " deaths audited");
    return v;
}

Verdict collisions()
{
    Verdict v;
    TraceAuditor two;
    const auto m = run(collision_scenario(), 0, &two);
    const auto a = two.finish(m);
    v.require(a.lost_receptions == 2, "losses " + std::to_string(a.lost_receptions));
    v.require(m.collisions == 1, "collision counter " + std::to_string(m.collisions));

    TraceAuditor group;
    const auto c = run(range_scenario(CtMode::ct), 0, &group);
    const auto g = group.finish(c);
    v.require(c.collisions == 0 && g.replay_collisions == 0, "CT group collided");
    v.require(c.ct_rendezvous > 0 && c.packets_delivered == c.packets_offered, "CT group not decoded");
    v.note("independent: " + std::to_string(a.lost_receptions) + " losses, " + std::to_string(m.collisions) +
           " collision; CT group: " + std::to_string(c.collisions) + " collisions");
    return v;
}

Verdict scale_runtime()
{
    Verdict v;
    const auto dir = fs::temp_directory_path() / "oscmac_acceptance_scale";
    fs::create_directories(dir);
    const auto cfg = load_config(scenario_file("scale.json").string());
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = execute(cfg, 0, (dir / "scale.trace.csv").string());
    const double t = elapsed_s(t0);
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    const double peak_mb = static_cast<double>(usage.ru_maxrss) / 1024.0;
    const auto frames = static_cast<double>(cfg.sim.horizon.count()) / static_cast<double>(cfg.sim.mac.frame_length.count());
    v.require(cfg.generator && cfg.generator->count == 50, "not a 50-node generated topology");
    v.require(frames >= 10000.0, "only " + num("%.0f", frames) + " frames");
    v.require(cfg.sim.mac.mode == CtMode::automatic, "not auto mode");
    v.require(t < 5.0, "runtime " + num("%.2f", t) + " s");
    v.require(peak_mb < 200.0, "peak memory " + num("%.1f", peak_mb) + " MB");
    v.note(num("%.0f", frames) + " frames, " + std::to_string(r.metrics.events_processed) + " events, " +
           num("%.2f", t) + " s, peak " + num("%.1f", peak_mb) + " MB");
    fs::remove_all(dir);
    return v;
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"energy model oracle", energy_oracle},
        {"worked transmit numbers", worked_numbers},
        {"selection oracle", selection_oracle},
        {"election scale invariance", scale_invariance},
        {"range extension", range_extension},
        {"TRN relief inequality", trn_relief},
        {"determinism", determinism},
        {"energy conservation and trace audit", conservation},
        {"collision semantics", collisions},
        {"scale and runtime", scale_runtime},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        failed += v.pass ? 0 : 1;
        std::printf("criterion %2zu %s  %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("acceptance: %zu/%zu passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
