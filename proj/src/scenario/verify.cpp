#include "fmtrojan/scenario.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace fmtrojan::scenario {

namespace {

using fm::FmSignal;
using fm::FmSync;

struct Suite {
    std::vector<CheckResult> results;

    template <class Fn>
    void run(std::string name, Fn &&fn) {
        try {
            std::string detail;
            const bool ok = fn(detail);
            results.push_back({std::move(name), ok, std::move(detail)});
        } catch (const std::exception &e) {
            results.push_back({std::move(name), false, std::string("exception: ") + e.what()});
        }
    }
};

Stimulus held(std::size_t horizon, std::initializer_list<std::pair<const char *, bool>> ports) {
    Stimulus s(horizon);
    s.standard_reset();
    for (auto [name, v] : ports)
        s.hold(name, v);
    return s;
}

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> bits(n);
    for (auto &b : bits)
        b = rng() & 1u;
    return bits;
}

bool check_ff_semantics(const SimOptions &opts, std::string &detail) {
    Netlist nl;
    const NetId d = nl.add_input("D"), ce = nl.add_input("CE"), sr = nl.add_input("SR");
    const NetId qs = nl.add_ff(FfKind::SetType, d, ce, sr, "fdse");
    const NetId qr = nl.add_ff(FfKind::ResetType, d, ce, sr, "fdre");
    int failures = 0;
    for (unsigned init = 0; init < 2; ++init) {
        for (unsigned idx = 0; idx < 8; ++idx) {
            const bool dv = idx & 1u, cev = idx & 2u, srv = idx & 4u;
            Simulator sim(nl, opts);
            const std::uint8_t st[] = {static_cast<std::uint8_t>(init), static_cast<std::uint8_t>(init)};
            sim.load_state(st);
            sim.set_input(d, dv);
            sim.set_input(ce, cev);
            sim.set_input(sr, srv);
            sim.evaluate();
            sim.clock();
            for (auto [q, set] : {std::pair{qs, true}, std::pair{qr, false}}) {
                const bool want = srv ? set : cev ? dv : init != 0;
                if (sim.value(q) != want)
                    ++failures;
            }
        }
    }
    detail = std::to_string(32 - failures) + "/32 transitions match sr > ce > hold";
    return failures == 0;
}

bool check_csr_periodic(unsigned L, const SimOptions &opts, std::string &detail) {
    Netlist nl;
    nl.reset();
    const FmSync sync = fm::build_sync(nl, L);
    const Trace tr = simulate(nl, held(6 * L, {}), 6 * L, opts);
    for (NetId s : sync.csr.stages)
        for (std::size_t t = 1; t + L < tr.cycles(); ++t)
            if (tr.at(s, t) != tr.at(s, t + L)) {
                detail = "stage " + tr.net(s).name + " breaks period at cycle " + std::to_string(t);
                return false;
            }
    detail = "period " + std::to_string(L) + " on all stages";
    return true;
}

struct GateRig {
    Netlist nl;
    FmSync sync;
    FmSignal gate;
};

GateRig gate_rig(unsigned L, const TruthTable &fn) {
    GateRig r;
    r.sync = fm::build_sync(r.nl, L);
    const FmSignal ins[] = {fm::build_std_to_fm(r.nl, r.nl.add_input("X"), r.sync),
                            fm::build_std_to_fm(r.nl, r.nl.add_input("Y"), r.sync)};
    r.gate = fm::build_fm_gate(r.nl, fn, ins, r.sync);
    return r;
}

bool check_gates(unsigned L, const SimOptions &opts, std::string &detail) {
    int cases = 0;
    const std::size_t switch_at = 4 * std::size_t{L} + 1; // a SYNC instant
    const std::size_t horizon = switch_at + 3 * L;
    for (std::uint64_t bits = 1; bits < 15; ++bits) {
        const TruthTable fn = TruthTable::from_bits(2, bits);
        const GateRig rig = gate_rig(L, fn);
        for (unsigned pair = 0; pair < 4; ++pair) {
            const bool x = pair & 1u, y = pair & 2u;
            Stimulus stim(horizon);
            stim.standard_reset();
            std::vector<std::uint8_t> xs(horizon, !x), ys(horizon, !y);
            for (std::size_t t = switch_at; t < horizon; ++t) {
                xs[t] = x;
                ys[t] = y;
            }
            stim.set("X", xs);
            stim.set("Y", ys);
            const Trace tr = simulate(rig.nl, stim, horizon, opts);
            const bool before = fn.eval((!x) | ((!y) << 1)), after = fn.eval(x | (y << 1));
            for (std::size_t s = 2 * L + 1; s < horizon; s += L) {
                const bool want = s < switch_at + 2 * L ? before : after;
                if (fm::fm_decode(tr, rig.gate, s).value != want) {
                    detail = "function " + std::to_string(bits) + " inputs " + std::to_string(pair) +
                             " wrong at SYNC " + std::to_string(s);
                    return false;
                }
            }
            ++cases;
        }
    }
    detail = std::to_string(cases) + " function/input cases, latency 2L";
    return cases == 56;
}

bool check_duty(unsigned L, const SimOptions &opts, std::string &detail) {
    Netlist nl;
    const FmSync sync = fm::build_sync(nl, L);
    const FmSignal f0 = fm::build_std_to_fm(nl, nl.add_input("Z"), sync);
    const FmSignal f1 = fm::build_std_to_fm(nl, nl.add_input("O"), sync);
    const std::size_t n = 12 * std::size_t{L};
    const Trace tr = simulate(nl, held(n, {{"Z", false}, {"O", true}}), n, opts);
    const Window w{2 * std::size_t{L} + 1, 2 * std::size_t{L} + 1 + 8 * L};
    const double d0 = fm::duty_cycle(tr, f0.data_tap, w, L), d1 = fm::duty_cycle(tr, f1.data_tap, w, L);
    std::ostringstream os;
    os << "FM0 " << d0 << ", FM1 " << d1;
    detail = os.str();
    return d0 == 1.0 / L && d1 == 2.0 / L;
}

bool check_locking(const SimOptions &opts, std::string &detail) {
    const unsigned L = 8;
    Netlist nl;
    const FmSync sync = fm::build_sync(nl, L);
    const FmSignal in[] = {fm::build_std_to_fm(nl, nl.add_input("P"), sync)};
    const FmSignal lock = fm::build_locking_gate(nl, TruthTable::identity(), in, sync);
    const std::size_t n = 200 * L;
    Stimulus stim(n);
    stim.standard_reset();
    auto p = random_bits(n, 11);
    for (std::size_t t = 0; t < 6 * L; ++t)
        p[t] = 0;
    stim.set("P", p);
    const Trace tr = simulate(nl, stim, n, opts);
    bool locked = false;
    for (std::size_t s = L + 1; s < n; s += L) {
        const bool v = fm::fm_decode(tr, lock, s).value;
        if (locked && !v) {
            detail = "released at " + std::to_string(s);
            return false;
        }
        locked = locked || v;
    }
    detail = locked ? "latched and held" : "never latched";
    return locked;
}

bool check_uci_fm(const SimOptions &opts, std::string &detail) {
    const unsigned L = 8;
    Netlist nl;
    const FmSync sync = fm::build_sync(nl, L);
    const FmSignal ins[] = {fm::build_std_to_fm(nl, nl.add_input("X"), sync),
                            fm::build_std_to_fm(nl, nl.add_input("Y"), sync)};
    const FmSignal g = fm::build_fm_gate(nl, TruthTable::or_n(2), ins, sync);
    const FmSignal gi[] = {g};
    fm::build_locking_gate(nl, TruthTable::identity(), gi, sync);
    const std::size_t n = 20 * L;
    const Trace tr = simulate(nl, held(n, {{"X", false}, {"Y", false}}), n, opts);
    const auto rep = sca::uci_scan(tr, Window{L + 1, 10 * std::size_t{L}});
    detail = std::to_string(rep.constant_nets.size()) + " constant nets";
    return rep.constant_nets.empty();
}

bool check_trigger_phase(const SimOptions &opts, std::string &detail) {
    const unsigned L = 8;
    trojan::TriggerSpec spec;
    Netlist nl;
    const FmSync sync = fm::build_sync(nl, L);
    const auto bus = trojan::build_opcode_bus(nl, spec.opcode_width);
    const auto ev = trojan::build_event_sync(nl, bus, spec);
    const auto trig = trojan::build_trigger(nl, ev.a, ev.b, ev.c, ev.d, sync);
    std::vector<Stimulus> stims;
    for (unsigned o = 0; o < L; ++o) {
        std::vector<unsigned> program(8 * L, 0);
        trojan::insert_sequence(program, spec, 2 * L + 1 + o);
        stims.push_back(trojan::program_stimulus(program, spec.opcode_width));
    }
    const auto traces = simulate_batch(nl, stims, 8 * L, opts);
    unsigned active = 0;
    for (const auto &tr : traces)
        active += trojan::activation_cycle(tr, trig.output()).has_value();
    detail = std::to_string(active) + " of " + std::to_string(L) + " phase offsets activate";
    return active == 1;
}

bool check_concealment(const SimOptions &opts, std::string &detail) {
    const unsigned L = 8;
    Netlist nl;
    const FmSync sync = fm::build_sync(nl, L);
    const FmSignal src = fm::build_std_to_fm(nl, nl.add_input("R"), sync);
    const auto quad = trojan::build_concealed(nl, src, sync);
    const std::size_t n = 64 * L;
    Stimulus stim(n);
    stim.standard_reset();
    stim.set("R", random_bits(n, 5));
    const Trace tr = simulate(nl, stim, n, opts);
    const auto scope = quad.stage_nets();
    for (std::size_t t = 2; t < n; ++t) {
        int rises = 0, falls = 0, ones = 0;
        for (NetId s : scope) {
            rises += !tr.at(s, t - 1) && tr.at(s, t);
            falls += tr.at(s, t - 1) && !tr.at(s, t);
            ones += tr.at(s, t);
        }
        if (rises != 6 || falls != 6 || ones != 2 * static_cast<int>(L)) {
            detail = "cycle " + std::to_string(t) + ": " + std::to_string(rises) + " rises, " +
                     std::to_string(falls) + " falls, " + std::to_string(ones) + " ones";
            return false;
        }
    }
    detail = "6 rises, 6 falls, 16 ones on every cycle";
    return true;
}

bool check_payload(trojan::PayloadMode mode, const SimOptions &opts, std::string &detail) {
    const unsigned L = 8;
    trojan::TriggerSpec spec;
    Netlist nl;
    const FmSync sync = fm::build_sync(nl, L);
    const auto bus = trojan::build_opcode_bus(nl, spec.opcode_width);
    const auto ev = trojan::build_event_sync(nl, bus, spec);
    const auto trig = trojan::build_trigger(nl, ev.a, ev.b, ev.c, ev.d, sync);
    auto carrier = trojan::build_concealed(nl, fm::build_std_to_fm(nl, nl.constant(false), sync), sync);
    carrier.mode = mode;
    const auto secret = random_bits(64, 21);
    const auto tx = trojan::build_payload_transmitter(nl, secret, trig.output(), carrier, sync);
    const auto os = trojan::opcode_stimulus(std::vector<unsigned>(100 * L, 0), spec,
                                            trojan::AlignmentPolicy::aligned(), L);
    const Trace tr = simulate(nl, os.stimulus, os.program.size() + 1, opts);
    const auto act = trojan::activation_cycle(tr, trig.output());
    if (!act) {
        detail = "trigger did not activate";
        return false;
    }
    const bool mode2 = mode == trojan::PayloadMode::Mode2;
    const auto pt = sca::power_trace(tr, carrier.stage_nets());
    const std::size_t start = tx.first_bit_cycle(*act);
    const auto sums = sca::period_sums(pt, L, start, secret.size());
    const double unit = mode2 ? 2.0 : 1.0;
    for (std::size_t k = 1; k < secret.size(); ++k)
        if (secret[k] == secret[k - 1] && sums[k] != unit * (secret[k] ? 4 * L : 2 * L)) {
            detail = "steady-state sum " + std::to_string(sums[k]) + " at bit " + std::to_string(k);
            return false;
        }
    const auto bits = sca::attacker_demodulate(pt, L, start, secret.size(), sca::mode_threshold(L, mode2));
    detail = "steady sums " + std::to_string(static_cast<int>(unit * 4 * L)) + "/" +
             std::to_string(static_cast<int>(unit * 2 * L)) + ", recovered " +
             std::to_string(static_cast<int>(sca::bit_accuracy(bits, secret) * 64)) + "/64 bits";
    return bits == secret;
}

Trace random_trace(std::size_t nets, std::size_t cycles, std::uint64_t seed) {
    std::vector<NetInfo> info(nets);
    for (std::size_t i = 0; i < nets; ++i)
        info[i] = {"n" + std::to_string(i), DriverKind::Lut, 0};
    Trace tr(info, cycles);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < nets; ++i) {
        const unsigned kind = rng() % 4;
        const NetId twin{static_cast<std::uint32_t>(i == 0 ? 0 : rng() % i)};
        for (std::size_t t = 0; t < cycles; ++t) {
            bool v = rng() & 1u;
            if (kind == 0)
                v = false;
            else if (kind == 1 && i > 0)
                v = tr.at(twin, t);
            else if (kind == 2 && i > 0)
                v = !tr.at(twin, t);
            tr.set(NetId{static_cast<std::uint32_t>(i)}, t, v);
        }
    }
    return tr;
}

bool check_scans(std::string &detail) {
    const Trace tr = random_trace(40, 300, 3);
    std::vector<NetId> scope;
    for (std::uint32_t i = 0; i < 40; ++i)
        scope.emplace_back(i);
    const Window w{7, 250};
    const auto u = sca::uci_scan(tr, w, scope), ur = sca::reference::uci_scan(tr, w, scope);
    const auto p = sca::pair_scan(tr, w, scope), pr = sca::reference::pair_scan(tr, w, scope);
    const auto pt = sca::power_trace(tr, scope, {}, w), ptr = sca::reference::power_trace(tr, scope, {}, w);
    const bool ok = u.suspicious == ur.suspicious && u.duty_cycles == ur.duty_cycles &&
                    p.equal_pairs == pr.equal_pairs && p.complement_pairs == pr.complement_pairs &&
                    pt.dynamic == ptr.dynamic && pt.leakage == ptr.leakage;
    detail = std::to_string(u.constant_nets.size()) + " constant nets, " +
             std::to_string(p.equal_pairs.size()) + " equal and " +
             std::to_string(p.complement_pairs.size()) + " complement pairs";
    return ok;
}

bool check_spectrum(std::string &detail) {
    std::vector<double> noise(512);
    std::mt19937_64 rng(9);
    for (double &x : noise)
        x = static_cast<double>(rng() % 1000) / 100.0;
    const auto fast = sca::spectrum(noise, 512), slow = sca::reference::spectrum(noise, 512);
    double err = 0.0, top = 0.0;
    for (std::size_t k = 0; k < fast.magnitudes.size(); ++k) {
        err = std::max(err, std::abs(fast.magnitudes[k] - slow.magnitudes[k]));
        top = std::max(top, slow.magnitudes[k]);
    }
    err /= top;
    double parseval = 0.0;
    for (std::size_t k = 0; k < fast.magnitudes.size(); ++k) {
        const double m2 = fast.magnitudes[k] * fast.magnitudes[k];
        parseval += (k == 0 || k == 256) ? m2 : 2.0 * m2;
    }
    parseval /= 512.0;
    const double rel = std::abs(parseval - fast.energy) / fast.energy;
    bool dominance = true;
    for (unsigned P : {4u, 8u, 16u}) {
        std::vector<double> sq(256);
        for (std::size_t t = 0; t < sq.size(); ++t)
            sq[t] = (t % P) < P / 2;
        const auto sp = sca::spectrum(sq, 256);
        dominance = dominance && sp.bin_freqs[sca::dominant_bin(sp)] == 1.0 / P;
    }
    std::ostringstream os;
    os << "fft vs dft rel error " << err << ", Parseval rel error " << rel;
    detail = os.str();
    return err < 1e-9 && rel < 1e-9 && dominance;
}

bool check_config_roundtrip(std::string &detail) {
    ScenarioConfig c;
    c.name = "roundtrip";
    c.payload = trojan::PayloadMode::Mode2;
    c.secret = "10110";
    c.jammer_pairs = 2;
    c.jammer_seed = 77;
    c.threshold = 49.5;
    c.uci_window = Window{9, 100};
    c.peak_ratio = 0.3;
    c.weights.ff = 1.25;
    const bool ok = parse_config(serialize_config(c)) == c;
    detail = ok ? "parse(serialize(c)) == c" : "round-trip mismatch";
    return ok;
}

bool check_determinism(std::string &detail) {
    ScenarioConfig c;
    c.name = "determinism";
    c.cycles = 512;
    c.trigger_at = 200;
    c.payload = trojan::PayloadMode::Mode1;
    c.secret = "random:16";
    const auto a = run_scenario(c).to_json(), b = run_scenario(c).to_json();
    detail = a == b ? "identical reports" : "reports differ";
    return a == b;
}

} // namespace

std::vector<CheckResult> verify_suite(const VerifyOptions &options) {
    Suite s;
    const SimOptions &opts = options.sim;
    s.run("netcore.ff_semantics", [&](std::string &d) { return check_ff_semantics(opts, d); });
    for (unsigned L : options.lengths)
        s.run("netcore.csr_period_L" + std::to_string(L),
              [&](std::string &d) { return check_csr_periodic(L, opts, d); });
    s.run("netcore.compiled_matches_reference", [&](std::string &d) {
        const GateRig rig = gate_rig(8, TruthTable::xor_n(2));
        Stimulus stim(200);
        stim.standard_reset();
        stim.set("X", random_bits(200, 1));
        stim.set("Y", random_bits(200, 2));
        const bool ok = simulate(rig.nl, stim, 200, opts) == reference::simulate(rig.nl, stim, 200);
        d = ok ? "traces identical" : "traces differ";
        return ok;
    });
    s.run("netcore.netlist_roundtrip", [&](std::string &d) {
        const GateRig rig = gate_rig(8, TruthTable::and_n(2));
        std::ostringstream a;
        rig.nl.write(a);
        std::istringstream in(a.str());
        std::ostringstream b;
        Netlist::read(in).write(b);
        d = std::to_string(rig.nl.net_count()) + " nets";
        return a.str() == b.str();
    });
    for (unsigned L : options.lengths)
        s.run("fmlogic.duty_cycle_L" + std::to_string(L),
              [&](std::string &d) { return check_duty(L, opts, d); });
    s.run("fmlogic.gates_exhaustive_L8", [&](std::string &d) { return check_gates(8, opts, d); });
    s.run("fmlogic.locking_monotone", [&](std::string &d) { return check_locking(opts, d); });
    s.run("fmlogic.uci_evasion", [&](std::string &d) { return check_uci_fm(opts, d); });
    s.run("trojankit.trigger_phase_1_of_L", [&](std::string &d) { return check_trigger_phase(opts, d); });
    s.run("trojankit.concealment_balance", [&](std::string &d) { return check_concealment(opts, d); });
    s.run("trojankit.payload_mode1", [&](std::string &d) {
        return check_payload(trojan::PayloadMode::Mode1, opts, d);
    });
    s.run("trojankit.payload_mode2", [&](std::string &d) {
        return check_payload(trojan::PayloadMode::Mode2, opts, d);
    });
    s.run("sidechannel.kernels_match_reference", [&](std::string &d) { return check_scans(d); });
    s.run("sidechannel.spectrum", [&](std::string &d) { return check_spectrum(d); });
    s.run("sidechannel.jamming_model", [&](std::string &d) {
        const double a4 = sca::jammed_accuracy_model(4);
        d = "k=4 expected accuracy " + std::to_string(a4);
        return a4 <= 0.65;
    });
    s.run("cli.config_roundtrip", [&](std::string &d) { return check_config_roundtrip(d); });
    s.run("cli.determinism", [&](std::string &d) { return check_determinism(d); });
    return s.results;
}

} // namespace fmtrojan::scenario
