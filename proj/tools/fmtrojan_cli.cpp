// fmtrojan: build, simulate and analyze FM-logic Trojan scenarios.
//
// Exit codes: 0 success, 1 an analysis detected a violation, 2 config error.

#include "fmtrojan/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace fmtrojan;
using namespace fmtrojan::scenario;

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kConfigError = 2;

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> cycles;
};

void add_common(CLI::App *cmd, Common &c, bool needs_config) {
    auto *opt = cmd->add_option("--config", c.config, "scenario config file (key = value)");
    if (needs_config)
        opt->required();
    cmd->add_option("--out", c.out, "output directory, relative to the workspace");
    cmd->add_option("--seed", c.seed, "override the config's master seed");
    cmd->add_option("--cycles", c.cycles, "override the number of simulated cycles");
}

fs::path resolve(const fs::path &workspace, const std::string &p) {
    const fs::path path(p);
    return path.is_absolute() ? path : workspace / path;
}

ScenarioConfig load(const Common &c) {
    ScenarioConfig cfg = load_config(c.config);
    if (c.seed)
        cfg.seed = *c.seed;
    if (c.cycles)
        cfg.cycles = *c.cycles;
    validate(cfg);
    return cfg;
}

fs::path out_dir(const fs::path &workspace, const Common &c, const ScenarioConfig &cfg) {
    return resolve(workspace, c.out.empty() ? cfg.out : c.out);
}

void print_checks(const std::vector<CheckResult> &checks) {
    for (const auto &c : checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"FM-logic hardware Trojan simulator and analysis lab"};
    app.require_subcommand(1);
    std::string workspace = ".";
    app.add_option("--workspace", workspace, "directory that relative paths resolve against");

    Common sim_opts, ana_opts, scn_opts;
    auto *sim = app.add_subcommand("simulate", "build the design and export netlist.txt and trace.csv");
    add_common(sim, sim_opts, true);
    auto *ana = app.add_subcommand("analyze", "scan an exported netlist/trace pair (config keys netlist, trace)");
    add_common(ana, ana_opts, true);
    auto *scn = app.add_subcommand("scenario", "run a full scenario and write report.json plus exports");
    add_common(scn, scn_opts, true);
    auto *ver = app.add_subcommand("verify", "run every invariant check");
    std::string mutate;
    ver->add_option("--mutate", mutate, "inject a known fault to show the checks catch it")
        ->check(CLI::IsMember({"ff-priority"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    const fs::path ws(workspace);
    try {
        if (*sim) {
            const ScenarioConfig cfg = load(sim_opts);
            const fs::path dir = out_dir(ws, sim_opts, cfg);
            simulate_scenario(cfg, dir);
            std::cout << "wrote " << (dir / "netlist.txt").string() << " and "
                      << (dir / "trace.csv").string() << '\n';
            return kOk;
        }
        if (*ana) {
            const ScenarioConfig cfg = load(ana_opts);
            if (cfg.netlist_in.empty() || cfg.trace_in.empty())
                throw ConfigError("netlist/trace", "analyze needs both input paths in the config");
            std::ifstream nin(resolve(ws, cfg.netlist_in));
            if (!nin)
                throw ConfigError("netlist", "cannot open " + resolve(ws, cfg.netlist_in).string());
            const Netlist nl = Netlist::read(nin);
            std::ifstream tin(resolve(ws, cfg.trace_in));
            if (!tin)
                throw ConfigError("trace", "cannot open " + resolve(ws, cfg.trace_in).string());
            const Trace tr = Trace::read_csv(tin, nl);
            const AnalysisReport rep = analyze(nl, tr, cfg);
            const fs::path dir = out_dir(ws, ana_opts, cfg);
            fs::create_directories(dir);
            std::ofstream(dir / "analysis.json") << rep.to_json();
            print_checks(rep.checks);
            return rep.passed() ? kOk : kViolation;
        }
        if (*scn) {
            const ScenarioConfig cfg = load(scn_opts);
            const fs::path dir = out_dir(ws, scn_opts, cfg);
            const RunReport rep = run_scenario(cfg, dir);
            print_checks(rep.checks);
            std::cout << "report: " << (dir / "report.json").string() << '\n';
            return rep.passed() ? kOk : kViolation;
        }
        if (*ver) {
            VerifyOptions opts;
            if (mutate == "ff-priority")
                opts.sim.priority = FfPriority::CeOverSr;
            const auto results = verify_suite(opts);
            print_checks(results);
            const bool ok = std::all_of(results.begin(), results.end(),
                                        [](const CheckResult &r) { return r.pass; });
            std::cout << (ok ? "all checks passed" : "some checks failed") << '\n';
            return ok ? kOk : kViolation;
        }
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NetlistError &e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kViolation;
    }
    return kOk;
}
