// Reproducible experiments: config file -> design -> simulation -> analyses
// -> report and exports.
#pragma once

#include "fmtrojan/sidechannel.hpp"
#include "fmtrojan/trojankit.hpp"

#include <filesystem>

namespace fmtrojan::scenario {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string &message)
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}
    const std::string &field() const { return field_; }

private:
    std::string field_;
};

enum class Alignment { None, Aligned, Random };
enum class Expectation { Auto, Yes, No };

/// Flat key = value config; '#' starts a comment. Unknown keys are errors.
/// Seeds left unset are derived from `seed`.
struct ScenarioConfig {
    std::string name = "scenario";
    unsigned length = fm::kDefaultLength;
    trojan::TriggerSpec trigger;
    unsigned alphabet = 16;
    std::size_t cycles = 2048;
    std::uint64_t seed = 1;

    Alignment alignment = Alignment::Aligned;
    unsigned attempts = 1;
    std::optional<std::uint64_t> alignment_seed;
    std::size_t trigger_at = 4; // aligned: earliest conjunction cycle
    Expectation expect_activation = Expectation::Auto;

    bool conceal_trigger = true;
    std::optional<trojan::PayloadMode> payload; // none when unset
    std::string secret; // bit string, or "random:<n>"

    unsigned jammer_pairs = 0;
    std::optional<std::uint64_t> jammer_seed;
    unsigned jammer_trials = 8;

    std::optional<double> threshold; // midpoint default when unset
    std::optional<Window> uci_window; // pre-activation span when unset
    std::size_t spectrum_window = 0; // 0: largest power of two that fits
    double peak_ratio = 0.5;
    double max_accuracy = 0.65;
    sca::PowerWeights weights;

    // Output and input paths, relative to the workspace directory.
    std::string out = "out";
    bool export_trace = true;
    bool export_netlist = true;
    std::string netlist_in; // analyze only
    std::string trace_in; // analyze only

    bool operator==(const ScenarioConfig &) const;
};

ScenarioConfig parse_config(std::string_view text);
std::string serialize_config(const ScenarioConfig &config);
ScenarioConfig load_config(const std::filesystem::path &path);
void validate(const ScenarioConfig &config);
std::vector<std::uint8_t> resolve_secret(const ScenarioConfig &config);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunReport {
    std::string name;
    std::string config; // serialized form of the config that produced it
    std::optional<std::size_t> gate_cycle; // first SYNC at which the trigger gate decodes 1
    std::optional<std::size_t> activation_cycle; // same for the trigger output (lock)
    Window analysis_window;
    sca::UciReport uci;
    std::vector<std::string> payload_idle_nets;
    sca::PairReport pairs;
    std::vector<std::array<std::string, 2>> equal_examples;
    std::vector<std::array<std::string, 2>> complement_examples;
    std::optional<sca::PowerStats> concealed_power;
    std::vector<double> design_peaks;
    std::vector<double> concealed_peaks;
    std::vector<std::uint8_t> secret;
    std::vector<std::uint8_t> demodulated;
    std::optional<double> threshold;
    std::optional<double> accuracy;
    std::optional<double> unjammed_accuracy;
    std::optional<double> expected_accuracy; // Monte Carlo mean over jammer seeds
    std::optional<double> model_accuracy;
    std::vector<double> trial_accuracies;
    std::vector<std::uint16_t> jammer_lfsr_seeds;
    std::vector<CheckResult> checks;

    bool passed() const;
    /// Canonical JSON document; byte-identical for identical configs.
    std::string to_json() const;
};

struct Design {
    Netlist netlist;
    fm::FmSync sync;
    trojan::Trigger trigger;
    std::vector<trojan::ConcealedQuad> trigger_quads;
    std::optional<trojan::ConcealedQuad> carrier;
    std::optional<trojan::Transmitter> transmitter;
    std::optional<sca::Jammer> jammer;
    std::vector<NetId> payload_nets; // transmitter plumbing, idle before activation
    std::vector<NetId> fm_scope; // nets covered by the UCI claim
    std::vector<NetId> concealed_scope; // sync CSR plus every quad's stage nets
    std::vector<NetId> attacker_scope; // carrier quad plus jammer stage nets
};

Design build_design(const ScenarioConfig &config);
Design build_design(const ScenarioConfig &config, std::uint64_t jammer_seed);
Stimulus build_stimulus(const ScenarioConfig &config);

/// Runs the scenario; when `out_dir` is non-empty writes report.json,
/// netlist.txt, trace.csv, power.csv and spectrum.csv there.
RunReport run_scenario(const ScenarioConfig &config, const std::filesystem::path &out_dir = {});

/// Builds and simulates only, writing netlist.txt and trace.csv.
void simulate_scenario(const ScenarioConfig &config, const std::filesystem::path &out_dir);

struct AnalysisReport {
    sca::UciReport uci;
    sca::PairReport pairs;
    sca::PowerStats power;
    std::vector<double> peaks;
    std::vector<std::string> net_names;
    std::vector<CheckResult> checks;
    bool passed() const;
    std::string to_json() const;
};

/// Scans a previously exported netlist and trace.
AnalysisReport analyze(const Netlist &netlist, const Trace &trace, const ScenarioConfig &config);

struct VerifyOptions {
    SimOptions sim; // mutation hook
    std::vector<unsigned> lengths{4, 8, 16};
};

std::vector<CheckResult> verify_suite(const VerifyOptions &options = {});

void write_csv_series(std::ostream &os, std::string_view x_name, std::string_view y_name,
                      std::span<const double> xs, std::span<const double> ys);

} // namespace fmtrojan::scenario
