// Small helpers shared by the test binaries.
#pragma once

#include "fmtrojan/scenario.hpp"

#include <random>
#include <set>
#include <utility>

namespace testsupport {

using namespace fmtrojan;

inline Stimulus held(std::size_t horizon,
                     std::initializer_list<std::pair<const char *, bool>> ports = {}) {
    Stimulus s(horizon);
    s.standard_reset();
    for (auto [name, v] : ports)
        s.hold(name, v);
    return s;
}

inline std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> bits(n);
    for (auto &b : bits)
        b = rng() & 1u;
    return bits;
}

/// Bits that take `before` until `at` and `after` from then on.
inline std::vector<std::uint8_t> step(std::size_t horizon, std::size_t at, bool before, bool after) {
    std::vector<std::uint8_t> v(horizon, before);
    for (std::size_t t = at; t < horizon; ++t)
        v[t] = after;
    return v;
}

inline std::vector<NetId> all_nets(std::size_t n) {
    std::vector<NetId> out;
    for (std::uint32_t i = 0; i < n; ++i)
        out.emplace_back(i);
    return out;
}

/// Trace over synthetic nets mixing random, constant, equal and complement rows.
inline Trace synthetic_trace(std::size_t nets, std::size_t cycles, std::uint64_t seed) {
    std::vector<NetInfo> info(nets);
    for (std::size_t i = 0; i < nets; ++i)
        info[i] = {"n" + std::to_string(i), DriverKind::Lut, 0};
    Trace tr(info, cycles);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < nets; ++i) {
        const unsigned kind = rng() % 5;
        const NetId twin{static_cast<std::uint32_t>(i == 0 ? 0 : rng() % i)};
        const bool level = rng() & 1u;
        for (std::size_t t = 0; t < cycles; ++t) {
            bool v = rng() & 1u;
            if (kind == 0)
                v = level;
            else if (kind == 1 && i > 0)
                v = tr.at(twin, t);
            else if (kind == 2 && i > 0)
                v = !tr.at(twin, t);
            tr.set(NetId{static_cast<std::uint32_t>(i)}, t, v);
        }
    }
    return tr;
}

/// Trojan trigger on a fresh netlist: sync, opcode bus, event sync, trigger.
struct TriggerRig {
    Netlist nl;
    fm::FmSync sync;
    std::vector<NetId> bus;
    trojan::EventSync ev;
    trojan::Trigger trig;
    trojan::TriggerSpec spec;

    explicit TriggerRig(unsigned L = 8, bool locking = true, trojan::TriggerSpec s = {}) : spec(s) {
        sync = fm::build_sync(nl, L);
        bus = trojan::build_opcode_bus(nl, spec.opcode_width);
        ev = trojan::build_event_sync(nl, bus, spec);
        trig = trojan::build_trigger(nl, ev.a, ev.b, ev.c, ev.d, sync, locking);
    }
};

struct Exploration {
    std::size_t states = 0;
    std::size_t violations = 0;
    std::size_t activations = 0; // SYNC instants at which the output read 1
};

/// Explores every opcode stream over {alpha, beta, gamma, delta, other}
/// from reset, deduplicating on simulator state, for streams of
/// `stream_len` cycles at any of the L phases plus the lock latency. At each
/// SYNC instant the trigger output must read 1 exactly when an alpha..delta
/// run ended on a SYNC instant 2L or more cycles earlier.
inline Exploration explore_trigger(const TriggerRig &rig, unsigned stream_len) {
    const unsigned L = rig.sync.length;
    const auto seq = rig.spec.sequence();
    const unsigned ops[5] = {seq[0], seq[1], seq[2], seq[3], 0};
    const NetId reset = *rig.nl.find_input(Netlist::kResetPort);
    const NetId tap = rig.trig.output().data_tap;
    const int full = 2 * static_cast<int>(L);

    struct Node {
        std::vector<std::uint8_t> state;
        std::array<int, 3> last;
        int age; // cycles since the first aligned run ended, capped; -1 if none
    };
    auto key = [](const Node &n) {
        std::string k(n.state.begin(), n.state.end());
        for (int v : n.last)
            k.push_back(static_cast<char>(v + 1));
        k.push_back(static_cast<char>(n.age + 1));
        return k;
    };
    Simulator sim(rig.nl);
    auto apply = [&](bool rst, unsigned op) {
        sim.set_input(reset, rst);
        for (unsigned b = 0; b < rig.bus.size(); ++b)
            sim.set_input(rig.bus[b], (op >> b) & 1u);
        sim.evaluate();
    };

    apply(true, 0);
    sim.clock();
    std::vector<Node> frontier{{sim.state(), {-1, -1, -1}, -1}};
    std::set<std::string> seen{key(frontier[0])};
    Exploration out;
    const unsigned depth = stream_len + 4 * L;
    for (unsigned d = 0; d < depth && !frontier.empty(); ++d) {
        std::vector<Node> next;
        for (const Node &n : frontier)
            for (int o = 0; o < 5; ++o) {
                sim.load_state(n.state);
                apply(false, ops[o]);
                const bool at_sync = sim.value(rig.sync.tap);
                if (at_sync) {
                    const bool fired = sim.value(tap);
                    out.violations += fired != (n.age >= full);
                    out.activations += fired;
                }
                const bool run_ends = n.last[0] == 0 && n.last[1] == 1 && n.last[2] == 2 && o == 3;
                Node m{{}, {n.last[1], n.last[2], o}, n.age};
                if (m.age >= 0)
                    m.age = std::min(m.age + 1, full);
                else if (run_ends && at_sync)
                    m.age = 1;
                sim.clock();
                m.state = sim.state();
                if (seen.insert(key(m)).second)
                    next.push_back(std::move(m));
            }
        frontier = std::move(next);
    }
    out.states = seen.size();
    return out;
}

/// Trigger plus a carrier quad driven by the secret transmitter.
struct PayloadRig : TriggerRig {
    trojan::ConcealedQuad carrier;
    trojan::Transmitter tx;
    std::vector<std::uint8_t> secret;

    PayloadRig(std::vector<std::uint8_t> bits, trojan::PayloadMode mode, unsigned L = 8)
        : TriggerRig(L), secret(std::move(bits)) {
        carrier = trojan::build_concealed(nl, fm::build_std_to_fm(nl, nl.constant(false), sync), sync);
        carrier.mode = mode;
        tx = trojan::build_payload_transmitter(nl, secret, trig.output(), carrier, sync);
    }

    struct Run {
        Trace trace;
        std::size_t activation = 0;
        std::size_t first_bit = 0;
        sca::PowerTrace power; // carrier stage nets
    };

    /// Aligned trigger at the first SYNC instant >= trigger_at, then enough
    /// cycles for the whole secret.
    Run run(std::size_t trigger_at = 64) const {
        const unsigned L = sync.length;
        const std::size_t n = trigger_at + (secret.size() + 6) * L;
        const auto os = trojan::opcode_stimulus(std::vector<unsigned>(n, 0), spec,
                                                trojan::AlignmentPolicy::aligned(trigger_at), L);
        Run r;
        r.trace = simulate(nl, os.stimulus, n);
        const auto act = trojan::activation_cycle(r.trace, trig.output());
        if (!act)
            throw std::runtime_error("payload rig did not activate");
        r.activation = *act;
        r.first_bit = tx.first_bit_cycle(*act);
        r.power = sca::power_trace(r.trace, carrier.stage_nets());
        return r;
    }
};

} // namespace testsupport
