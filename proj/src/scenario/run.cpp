#include "fmtrojan/scenario.hpp"

#include "../common/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <fstream>
#include <set>
#include <sstream>

namespace fmtrojan::scenario {

using nlohmann::json;

namespace {

std::uint64_t jammer_seed_of(const ScenarioConfig &c) {
    return c.jammer_seed.value_or(detail::derive_seed(c.seed, 3));
}

std::size_t pow2_floor(std::size_t n) { return n < 2 ? 0 : std::bit_floor(n); }

std::string bit_string(std::span<const std::uint8_t> bits) {
    std::string s;
    for (auto b : bits)
        s.push_back(b ? '1' : '0');
    return s;
}

void append(std::vector<NetId> &dst, std::span<const NetId> src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

std::vector<NetId> sorted_unique(std::vector<NetId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

json stats_json(const sca::SeriesStats &s) {
    return {{"mean", s.mean}, {"variance", s.variance}, {"min", s.min}, {"max", s.max}};
}

json opt_json(const std::optional<std::size_t> &v) { return v ? json(*v) : json(nullptr); }
json opt_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

json checks_json(const std::vector<CheckResult> &checks) {
    json arr = json::array();
    for (const auto &c : checks)
        arr.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return arr;
}

json config_json(const std::string &text) {
    json obj = json::object();
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find(" = ");
        obj[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return obj;
}

// Cycle range before the trigger gate's CSR can change: the conjunction
// loads the gate at SYNC c = gate_cycle - L, visible from c + 1.
Window pre_activation_window(const ScenarioConfig &c, const std::optional<std::size_t> &gate_cycle,
                             std::size_t cycles) {
    const std::size_t begin = c.length + 1;
    std::size_t end = gate_cycle ? *gate_cycle - c.length + 1 : cycles;
    end = std::min(end, cycles);
    return {begin, std::max(begin, end)};
}

// Largest multiple of `period` that fits the window, keeping its start.
Window trim_to_period(Window w, unsigned period) {
    w.end = w.begin + (w.size() / period) * period;
    return w;
}

double accuracy_run(const ScenarioConfig &c, const Stimulus &stim, std::uint64_t jseed,
                    std::vector<std::uint8_t> *demod_out, std::vector<std::uint16_t> *lfsr_out) {
    Design d = build_design(c, jseed);
    const Trace tr = simulate(d.netlist, stim, c.cycles);
    const auto act = trojan::activation_cycle(tr, d.trigger.output());
    if (!act)
        return 0.0;
    const auto secret = resolve_secret(c);
    const std::size_t start = d.transmitter->first_bit_cycle(*act);
    const bool mode2 = *c.payload == trojan::PayloadMode::Mode2;
    const double thr = c.threshold.value_or(sca::jammed_threshold(c.length, c.jammer_pairs, mode2));
    const auto pt = sca::power_trace(tr, d.attacker_scope, c.weights);
    const auto bits = sca::attacker_demodulate(pt, c.length, start, secret.size(), thr);
    if (demod_out)
        *demod_out = bits;
    if (lfsr_out && d.jammer)
        *lfsr_out = d.jammer->lfsr_seeds;
    return sca::bit_accuracy(bits, secret);
}

} // namespace

bool RunReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult &c) { return c.pass; });
}

Design build_design(const ScenarioConfig &c) { return build_design(c, jammer_seed_of(c)); }

Design build_design(const ScenarioConfig &c, std::uint64_t jammer_seed) {
    validate(c);
    Design d;
    Netlist &nl = d.netlist;
    d.sync = fm::build_sync(nl, c.length);
    const auto bus = trojan::build_opcode_bus(nl, c.trigger.opcode_width);
    const auto ev = trojan::build_event_sync(nl, bus, c.trigger);
    d.trigger = trojan::build_trigger(nl, ev.a, ev.b, ev.c, ev.d, d.sync);
    if (c.conceal_trigger) {
        d.trigger_quads.push_back(trojan::build_concealed(nl, d.trigger.gate, d.sync));
        d.trigger_quads.push_back(trojan::build_concealed(nl, *d.trigger.lock, d.sync));
    }
    if (c.payload) {
        const auto src = fm::build_std_to_fm(nl, nl.constant(false), d.sync);
        d.carrier = trojan::build_concealed(nl, src, d.sync);
        d.carrier->mode = *c.payload;
    }
    if (c.jammer_pairs > 0)
        d.jammer = sca::build_jammer(nl, d.sync, c.jammer_pairs, jammer_seed);
    if (c.payload) {
        const std::size_t first = nl.net_count();
        const auto secret = resolve_secret(c);
        d.transmitter = trojan::build_payload_transmitter(nl, secret, d.trigger.output(), *d.carrier, d.sync);
        d.payload_nets = fm::nets_since(nl, first);
    }
    nl.validate();

    const std::set<NetId> payload(d.payload_nets.begin(), d.payload_nets.end());
    for (std::size_t i = 0; i < nl.net_count(); ++i) {
        const NetId id{static_cast<std::uint32_t>(i)};
        const DriverKind k = nl.net(id).driver;
        if ((k == DriverKind::Lut || k == DriverKind::FlipFlop) && !payload.contains(id))
            d.fm_scope.push_back(id);
    }
    append(d.concealed_scope, d.sync.csr.stages);
    for (const auto &q : d.trigger_quads)
        append(d.concealed_scope, q.stage_nets());
    if (d.carrier) {
        append(d.concealed_scope, d.carrier->stage_nets());
        append(d.attacker_scope, d.carrier->stage_nets());
    }
    if (d.jammer)
        append(d.attacker_scope, d.jammer->stage_nets());
    d.concealed_scope = sorted_unique(std::move(d.concealed_scope));
    d.attacker_scope = sorted_unique(std::move(d.attacker_scope));
    return d;
}

Stimulus build_stimulus(const ScenarioConfig &c) {
    validate(c);
    auto program = trojan::random_program(c.cycles - 1, c.alphabet, detail::derive_seed(c.seed, 1));
    switch (c.alignment) {
    case Alignment::None:
        return trojan::program_stimulus(program, c.trigger.opcode_width);
    case Alignment::Aligned:
        return trojan::opcode_stimulus(std::move(program), c.trigger,
                                       trojan::AlignmentPolicy::aligned(c.trigger_at), c.length)
            .stimulus;
    case Alignment::Random:
        return trojan::opcode_stimulus(
                   std::move(program), c.trigger,
                   trojan::AlignmentPolicy::random_retry(
                       c.attempts, c.alignment_seed.value_or(detail::derive_seed(c.seed, 2))),
                   c.length)
            .stimulus;
    }
    throw ConfigError("alignment", "unsupported");
}

RunReport run_scenario(const ScenarioConfig &c, const std::filesystem::path &out_dir) {
    validate(c);
    const unsigned L = c.length;
    const Design d = build_design(c);
    const Stimulus stim = build_stimulus(c);
    const Trace tr = simulate(d.netlist, stim, c.cycles);

    RunReport r;
    r.name = c.name;
    r.config = serialize_config(c);
    r.gate_cycle = trojan::activation_cycle(tr, d.trigger.gate);
    r.activation_cycle = trojan::activation_cycle(tr, d.trigger.output());

    const Expectation expect =
        c.expect_activation != Expectation::Auto ? c.expect_activation
        : c.alignment == Alignment::Aligned     ? Expectation::Yes
        : c.alignment == Alignment::None        ? Expectation::No
                                                : Expectation::Auto;
    if (expect != Expectation::Auto) {
        const bool want = expect == Expectation::Yes;
        r.checks.push_back({"activation", r.activation_cycle.has_value() == want,
                            r.activation_cycle ? "activated at cycle " + std::to_string(*r.activation_cycle)
                                               : std::string("no activation")});
    }

    // Defender view: circuitry before the trigger fires.
    const Window pre = pre_activation_window(c, r.gate_cycle, c.cycles);
    r.analysis_window = c.uci_window.value_or(pre);
    if (r.analysis_window.size() >= L) {
        r.uci = sca::uci_scan(tr, r.analysis_window, d.fm_scope);
        r.pairs = sca::pair_scan(tr, r.analysis_window, d.fm_scope);
        r.checks.push_back({"uci_clean", r.uci.constant_nets.empty(),
                            std::to_string(r.uci.constant_nets.size()) + " constant nets among " +
                                std::to_string(d.fm_scope.size())});
        if (!d.payload_nets.empty()) {
            const auto idle = sca::uci_scan(tr, r.analysis_window, d.payload_nets);
            r.payload_idle_nets = idle.suspicious;
        }
        auto name_of = [&](NetId n) { return tr.net(n).name; };
        for (std::size_t i = 0; i < std::min<std::size_t>(r.pairs.equal_pairs.size(), 16); ++i)
            r.equal_examples.push_back({name_of(r.pairs.equal_pairs[i].first),
                                        name_of(r.pairs.equal_pairs[i].second)});
        for (std::size_t i = 0; i < std::min<std::size_t>(r.pairs.complement_pairs.size(), 16); ++i)
            r.complement_examples.push_back({name_of(r.pairs.complement_pairs[i].first),
                                             name_of(r.pairs.complement_pairs[i].second)});
    } else {
        r.uci.window = r.analysis_window;
        r.pairs.window = r.analysis_window;
    }

    const Window flat = trim_to_period(pre, L);
    if (!d.trigger_quads.empty() || d.carrier) {
        if (flat.size() >= L) {
            const auto pt = sca::power_trace(tr, d.concealed_scope, c.weights, flat);
            r.concealed_power = sca::power_stats(pt, L);
            const bool ok = r.concealed_power->dynamic.variance == 0.0 &&
                            r.concealed_power->leakage.variance == 0.0;
            std::ostringstream detail;
            detail << "dynamic " << r.concealed_power->dynamic.mean << "/cycle, static "
                   << r.concealed_power->leakage.mean << "/cycle over " << flat.size() << " cycles";
            r.checks.push_back({"concealed_power_flat", ok, detail.str()});
            const std::size_t win = c.spectrum_window ? c.spectrum_window : pow2_floor(pt.size());
            if (win >= 2 && win <= pt.size()) {
                r.concealed_peaks =
                    sca::detect_fm_peaks(sca::spectrum(pt.dynamic, win), c.peak_ratio);
                r.checks.push_back({"concealed_no_fm_peaks", r.concealed_peaks.empty(),
                                    std::to_string(r.concealed_peaks.size()) + " peaks"});
            }
        }
    }

    // Whole-design spectrum from the first SYNC period on.
    const auto design_scope = sca::default_scope(tr);
    const auto design_pt =
        sca::power_trace(tr, design_scope, c.weights, Window{L + 1, c.cycles});
    const std::size_t dwin = c.spectrum_window && c.spectrum_window <= design_pt.size()
                                 ? c.spectrum_window
                                 : pow2_floor(design_pt.size());
    sca::Spectrum design_sp;
    if (dwin >= 2) {
        design_sp = sca::spectrum(design_pt.dynamic, dwin);
        r.design_peaks = sca::detect_fm_peaks(design_sp, c.peak_ratio);
    }

    // Attacker view: demodulate the carrier after activation.
    if (c.payload) {
        r.secret = resolve_secret(c);
        const bool mode2 = *c.payload == trojan::PayloadMode::Mode2;
        if (!r.activation_cycle) {
            r.checks.push_back({"payload_channel", false, "trigger never activated"});
        } else {
            const std::size_t start = d.transmitter->first_bit_cycle(*r.activation_cycle);
            if (start + r.secret.size() * L > c.cycles)
                throw ConfigError("cycles", "too short to carry " + std::to_string(r.secret.size()) +
                                                " bits after activation at cycle " +
                                                std::to_string(*r.activation_cycle) + " (need " +
                                                std::to_string(start + r.secret.size() * L) + ")");
            const auto pt = sca::power_trace(tr, d.attacker_scope, c.weights);
            if (*c.payload == trojan::PayloadMode::Concealed) {
                const auto sums = sca::period_sums(pt, L, start, r.secret.size());
                const bool flat_sums = std::adjacent_find(sums.begin(), sums.end(),
                                                          std::not_equal_to<>()) == sums.end();
                r.checks.push_back({"payload_concealed", flat_sums,
                                    flat_sums ? "all periods identical" : "per-period sums differ"});
            } else {
                r.threshold =
                    c.threshold.value_or(sca::jammed_threshold(L, c.jammer_pairs, mode2));
                r.demodulated = sca::attacker_demodulate(pt, L, start, r.secret.size(), *r.threshold);
                r.accuracy = sca::bit_accuracy(r.demodulated, r.secret);
                if (d.jammer)
                    r.jammer_lfsr_seeds = d.jammer->lfsr_seeds;
                if (c.jammer_pairs == 0) {
                    r.checks.push_back({"secret_recovered", *r.accuracy == 1.0,
                                        "accuracy " + std::to_string(*r.accuracy)});
                } else {
                    ScenarioConfig clean = c;
                    clean.jammer_pairs = 0;
                    clean.threshold.reset();
                    r.unjammed_accuracy = accuracy_run(clean, stim, 0, nullptr, nullptr);
                    r.trial_accuracies.assign(c.jammer_trials, 0.0);
                    r.trial_accuracies[0] = *r.accuracy;
                    const std::uint64_t base = jammer_seed_of(c);
                    const auto trials = static_cast<std::ptrdiff_t>(c.jammer_trials);
#pragma omp parallel for schedule(dynamic)
                    for (std::ptrdiff_t t = 1; t < trials; ++t)
                        r.trial_accuracies[t] = accuracy_run(
                            c, stim, detail::derive_seed(base, 100 + static_cast<std::uint64_t>(t)),
                            nullptr, nullptr);
                    double sum = 0.0;
                    for (double a : r.trial_accuracies)
                        sum += a;
                    r.expected_accuracy = sum / static_cast<double>(r.trial_accuracies.size());
                    if (!mode2)
                        r.model_accuracy = sca::jammed_accuracy_model(c.jammer_pairs);
                    r.checks.push_back({"unjammed_recovery", *r.unjammed_accuracy == 1.0,
                                        "accuracy " + std::to_string(*r.unjammed_accuracy)});
                    r.checks.push_back({"jamming_bound", *r.expected_accuracy <= c.max_accuracy,
                                        "expected accuracy " + std::to_string(*r.expected_accuracy) +
                                            " over " + std::to_string(c.jammer_trials) +
                                            " jammer seeds, bound " + std::to_string(c.max_accuracy)});
                }
            }
        }
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(out_dir / "report.json") << r.to_json();
        if (c.export_netlist) {
            std::ofstream os(out_dir / "netlist.txt");
            d.netlist.write(os);
        }
        if (c.export_trace) {
            std::ofstream os(out_dir / "trace.csv");
            tr.write_csv(os);
        }
        std::vector<double> cycles(design_pt.size());
        for (std::size_t i = 0; i < cycles.size(); ++i)
            cycles[i] = static_cast<double>(design_pt.first_cycle + i);
        std::ofstream pos(out_dir / "power.csv");
        write_csv_series(pos, "cycle", "value", cycles, design_pt.dynamic);
        std::ofstream sos(out_dir / "spectrum.csv");
        write_csv_series(sos, "fraction", "magnitude", design_sp.bin_freqs, design_sp.magnitudes);
    }
    return r;
}

std::string RunReport::to_json() const {
    json j;
    j["name"] = name;
    j["config"] = config_json(config);
    j["activation"] = {{"gate_cycle", opt_json(gate_cycle)},
                       {"activation_cycle", opt_json(activation_cycle)}};
    j["analysis_window"] = {analysis_window.begin, analysis_window.end};
    double min_duty = 1.0, max_duty = 0.0;
    for (double x : uci.duty_cycles) {
        min_duty = std::min(min_duty, x);
        max_duty = std::max(max_duty, x);
    }
    j["uci"] = {{"scope_size", uci.scope.size()},
                {"constant_nets", uci.suspicious},
                {"min_duty", uci.scope.empty() ? json(nullptr) : json(min_duty)},
                {"max_duty", uci.scope.empty() ? json(nullptr) : json(max_duty)},
                {"payload_idle_nets", payload_idle_nets}};
    j["pairs"] = {{"equal", pairs.equal_pairs.size()},
                  {"complement", pairs.complement_pairs.size()},
                  {"equal_examples", equal_examples},
                  {"complement_examples", complement_examples}};
    if (concealed_power)
        j["concealed_power"] = {{"period", concealed_power->period},
                                {"dynamic", stats_json(concealed_power->dynamic)},
                                {"static", stats_json(concealed_power->leakage)}};
    else
        j["concealed_power"] = nullptr;
    j["spectral_peaks"] = {{"design", design_peaks}, {"concealed", concealed_peaks}};
    if (!secret.empty())
        j["payload"] = {{"secret", bit_string(secret)},
                        {"demodulated", bit_string(demodulated)},
                        {"threshold", opt_json(threshold)},
                        {"accuracy", opt_json(accuracy)}};
    else
        j["payload"] = nullptr;
    if (!jammer_lfsr_seeds.empty())
        j["jammer"] = {{"lfsr_seeds", jammer_lfsr_seeds},
                       {"trial_accuracies", trial_accuracies},
                       {"expected_accuracy", opt_json(expected_accuracy)},
                       {"model_accuracy", opt_json(model_accuracy)},
                       {"unjammed_accuracy", opt_json(unjammed_accuracy)}};
    else
        j["jammer"] = nullptr;
    j["checks"] = checks_json(checks);
    j["pass"] = passed();
    return j.dump(2) + "\n";
}

void simulate_scenario(const ScenarioConfig &c, const std::filesystem::path &out_dir) {
    const Design d = build_design(c);
    const Trace tr = simulate(d.netlist, build_stimulus(c), c.cycles);
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream os(out_dir / "netlist.txt");
        d.netlist.write(os);
    }
    std::ofstream os(out_dir / "trace.csv");
    tr.write_csv(os);
}

bool AnalysisReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult &c) { return c.pass; });
}

AnalysisReport analyze(const Netlist &netlist, const Trace &trace, const ScenarioConfig &c) {
    (void)netlist;
    const unsigned L = c.length;
    AnalysisReport a;
    const Window window = c.uci_window.value_or(Window{std::size_t{L} + 1, trace.cycles()});
    if (window.end > trace.cycles() || window.size() < L)
        throw ConfigError("uci_window", "must cover at least " + std::to_string(L) +
                                            " cycles inside the trace");
    const auto scope = sca::default_scope(trace);
    a.uci = sca::uci_scan(trace, window, scope);
    a.pairs = sca::pair_scan(trace, window, scope);
    for (const auto &n : trace.nets())
        a.net_names.push_back(n.name);
    const Window flat = trim_to_period(window, L);
    const auto pt = sca::power_trace(trace, scope, c.weights, flat);
    a.power = sca::power_stats(pt, L);
    const std::size_t win = c.spectrum_window && c.spectrum_window <= pt.size() ? c.spectrum_window
                                                                                : pow2_floor(pt.size());
    if (win >= 2)
        a.peaks = sca::detect_fm_peaks(sca::spectrum(pt.dynamic, win), c.peak_ratio);
    a.checks.push_back({"uci_clean", a.uci.constant_nets.empty(),
                        std::to_string(a.uci.constant_nets.size()) + " constant nets"});
    a.checks.push_back({"no_equal_pairs", a.pairs.equal_pairs.empty(),
                        std::to_string(a.pairs.equal_pairs.size()) + " always-equal pairs"});
    return a;
}

std::string AnalysisReport::to_json() const {
    json j;
    auto pair_names = [this](const std::vector<std::pair<NetId, NetId>> &pairs) {
        json arr = json::array();
        for (const auto &[x, y] : pairs)
            arr.push_back({net_names.at(x.index), net_names.at(y.index)});
        return arr;
    };
    j["window"] = {uci.window.begin, uci.window.end};
    j["uci"] = {{"scope_size", uci.scope.size()}, {"constant_nets", uci.suspicious}};
    j["pairs"] = {{"equal", pair_names(pairs.equal_pairs)},
                  {"complement", pair_names(pairs.complement_pairs)}};
    j["power"] = {{"period", power.period},
                  {"dynamic", stats_json(power.dynamic)},
                  {"static", stats_json(power.leakage)}};
    j["spectral_peaks"] = peaks;
    j["checks"] = checks_json(checks);
    j["pass"] = passed();
    return j.dump(2) + "\n";
}

void write_csv_series(std::ostream &os, std::string_view x_name, std::string_view y_name,
                      std::span<const double> xs, std::span<const double> ys) {
    os << x_name << ',' << y_name << '\n';
    const std::size_t n = std::min(xs.size(), ys.size());
    for (std::size_t i = 0; i < n; ++i)
        os << json(xs[i]).dump() << ',' << json(ys[i]).dump() << '\n';
}

} // namespace fmtrojan::scenario
