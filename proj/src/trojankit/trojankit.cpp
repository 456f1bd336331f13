#include "fmtrojan/trojankit.hpp"

#include "../common/rng.hpp"

#include <algorithm>
#include <set>

namespace fmtrojan::trojan {

using fm::FmSignal;
using fm::FmSync;

void TriggerSpec::validate() const {
    if (opcode_width < 1 || opcode_width > 16)
        throw TrojanError("opcode width must be in [1,16]");
    const auto seq = sequence();
    const std::set<unsigned> distinct(seq.begin(), seq.end());
    if (distinct.size() != 4)
        throw TrojanError("trigger opcodes alpha..delta must be distinct");
    for (unsigned op : seq)
        if (op >= (1u << opcode_width))
            throw TrojanError("trigger opcode " + std::to_string(op) + " does not fit in " +
                              std::to_string(opcode_width) + " bits");
}

std::vector<NetId> build_opcode_bus(Netlist &nl, unsigned width) {
    std::vector<NetId> bus;
    for (unsigned i = 0; i < width; ++i)
        bus.push_back(nl.add_input("OP" + std::to_string(i)));
    return bus;
}

NetId build_comparator(Netlist &nl, std::span<const NetId> bus, unsigned value,
                       std::string_view name) {
    if (bus.empty())
        throw TrojanError("comparator needs a non-empty bus");
    if (bus.size() <= 6) {
        const auto width = static_cast<unsigned>(bus.size());
        const unsigned want = value & ((1u << width) - 1);
        return nl.add_lut(bus, TruthTable::from_fn(width, [want](unsigned i) { return i == want; }),
                          std::string(name));
    }
    std::vector<NetId> partial;
    for (std::size_t lo = 0; lo < bus.size(); lo += 6) {
        const std::size_t n = std::min<std::size_t>(6, bus.size() - lo);
        partial.push_back(build_comparator(nl, bus.subspan(lo, n), value >> lo, name));
    }
    if (partial.size() > 6)
        throw TrojanError("opcode bus wider than 36 bits");
    return nl.add_lut(partial, TruthTable::and_n(static_cast<unsigned>(partial.size())),
                      std::string(name));
}

EventSync build_event_sync(Netlist &nl, std::span<const NetId> bus, const TriggerSpec &spec) {
    spec.validate();
    if (bus.size() != spec.opcode_width)
        throw TrojanError("opcode bus width does not match the trigger spec");
    const NetId vcc = nl.constant(true);
    const NetId rst = nl.reset();
    const auto seq = spec.sequence();
    static constexpr const char *kNames[] = {"ev.alpha", "ev.beta", "ev.gamma", "ev.delta"};
    EventSync ev{};
    std::array<NetId, 4> delayed{};
    for (unsigned i = 0; i < 4; ++i) {
        ev.match[i] = build_comparator(nl, bus, seq[i], kNames[i]);
        NetId cur = ev.match[i];
        for (unsigned k = 0; k < 3 - i; ++k)
            cur = nl.add_ff(FfKind::ResetType, cur, vcc, rst,
                            std::string(kNames[i]) + ".d" + std::to_string(k + 1));
        delayed[i] = cur;
    }
    ev.a = delayed[0];
    ev.b = delayed[1];
    ev.c = delayed[2];
    ev.d = delayed[3];
    return ev;
}

Trigger build_trigger(Netlist &nl, NetId a, NetId b, NetId c, NetId d, const FmSync &sync,
                      bool locking) {
    const NetId ins[] = {a, b, c, d};
    Trigger t{fm::build_std_gate(nl, TruthTable::and_n(4), ins, sync, "trig"), std::nullopt};
    if (locking) {
        const FmSignal gate[] = {t.gate};
        t.lock = fm::build_locking_gate(nl, TruthTable::identity(), gate, sync, "triglock");
    }
    return t;
}

std::optional<std::size_t> activation_cycle(const Trace &trace, const FmSignal &fm) {
    for (std::size_t t = fm.length + 1; t < trace.cycles(); t += fm.length)
        if (fm::fm_decode(trace, fm, t).value)
            return t;
    return std::nullopt;
}

std::vector<unsigned> random_program(std::size_t length, unsigned alphabet, std::uint64_t seed) {
    if (alphabet == 0)
        throw TrojanError("alphabet must be non-empty");
    std::mt19937_64 rng(seed);
    std::vector<unsigned> program(length);
    for (unsigned &op : program)
        op = static_cast<unsigned>(detail::uniform_below(rng, alphabet));
    return program;
}

void insert_sequence(std::vector<unsigned> &program, const TriggerSpec &spec,
                     std::size_t alpha_cycle) {
    if (alpha_cycle < 1 || alpha_cycle + 3 > program.size())
        throw TrojanError("sequence at cycle " + std::to_string(alpha_cycle) +
                          " does not fit a program of " + std::to_string(program.size()));
    const auto seq = spec.sequence();
    for (std::size_t i = 0; i < 4; ++i)
        program[alpha_cycle - 1 + i] = seq[i];
}

Stimulus program_stimulus(std::span<const unsigned> program, unsigned width) {
    Stimulus stim(program.size() + 1);
    stim.standard_reset();
    for (unsigned bit = 0; bit < width; ++bit) {
        std::vector<std::uint8_t> bits(program.size() + 1, 0);
        for (std::size_t i = 0; i < program.size(); ++i)
            bits[i + 1] = (program[i] >> bit) & 1u;
        stim.set("OP" + std::to_string(bit), std::move(bits));
    }
    return stim;
}

OpcodeStimulus opcode_stimulus(std::vector<unsigned> program, const TriggerSpec &spec,
                               const AlignmentPolicy &policy, unsigned length) {
    spec.validate();
    fm::check_length(length);
    if (program.empty())
        throw TrojanError("program must not be empty");
    if (policy.attempts < 1)
        throw TrojanError("alignment policy needs at least one attempt");

    auto extend_to = [&program](std::size_t size) {
        const std::size_t base = program.size();
        for (std::size_t i = base; i < size; ++i)
            program.push_back(program[i % base]);
    };

    OpcodeStimulus out;
    if (policy.kind == AlignmentPolicy::Kind::Aligned) {
        // Conjunction (delta) cycle is alpha + 3 and must be a SYNC instant.
        std::size_t alpha = fm::next_sync(std::max<std::size_t>(policy.earliest, 4), length) - 3;
        extend_to(alpha + 3);
        insert_sequence(program, spec, alpha);
        out.alpha_cycles.push_back(alpha);
    } else {
        std::mt19937_64 rng(policy.seed);
        const std::size_t slot = 2 * std::size_t{length};
        extend_to(policy.attempts * slot + 4);
        for (unsigned i = 0; i < policy.attempts; ++i) {
            const std::size_t alpha = 1 + i * slot + detail::uniform_below(rng, length);
            insert_sequence(program, spec, alpha);
            out.alpha_cycles.push_back(alpha);
        }
    }
    out.stimulus = program_stimulus(program, spec.opcode_width);
    out.program = std::move(program);
    return out;
}

std::string_view to_string(PayloadMode mode) {
    switch (mode) {
    case PayloadMode::Concealed: return "concealed";
    case PayloadMode::Mode1: return "mode1";
    case PayloadMode::Mode2: return "mode2";
    }
    return "?";
}

PayloadMode parse_payload_mode(std::string_view text) {
    if (text == "concealed")
        return PayloadMode::Concealed;
    if (text == "mode1")
        return PayloadMode::Mode1;
    if (text == "mode2")
        return PayloadMode::Mode2;
    throw TrojanError("unknown payload mode '" + std::string(text) + "'");
}

std::vector<NetId> ConcealedQuad::stage_nets() const {
    std::vector<NetId> out;
    for (const auto *csr : {&a.csr, &b.csr, &c, &d})
        out.insert(out.end(), csr->stages.begin(), csr->stages.end());
    return out;
}

namespace {

// Replica insert LUT: inputs [sync, own, a_combine, enable, flip].
// D = enable & (sync ? (a_combine ^ invert ^ flip) : own)
TruthTable replica_insert_table(bool invert) {
    return TruthTable::from_fn(5, [invert](unsigned idx) {
        const bool sync = idx & 1u, own = idx & 2u, src = idx & 4u, en = idx & 8u, flip = idx & 16u;
        if (!en)
            return false;
        return sync ? (src != invert) != flip : own;
    });
}

struct Replica {
    fm::CsrShape csr;
    NetId insert, entry;
};

Replica build_replica(Netlist &nl, unsigned length, std::span<const unsigned> set_stages,
                      const std::string &name, const FmSync &sync, NetId a_combine, bool invert) {
    const NetId vcc = nl.constant(true);
    const NetId gnd = nl.constant(false);
    const NetId rst = nl.reset();
    const unsigned half = length / 2;
    Replica r;
    r.csr.length = length;
    r.csr.set_stages.assign(set_stages.begin(), set_stages.end());
    for (unsigned s = 1; s <= length; ++s) {
        const bool set = std::ranges::find(set_stages, s) != set_stages.end();
        r.csr.stages.push_back(nl.add_ff_open(set ? FfKind::SetType : FfKind::ResetType, vcc, rst,
                                              name + ".s" + std::to_string(s)));
    }
    for (unsigned s = 2; s <= length; ++s)
        if (s != half + 1)
            nl.connect_d(r.csr.stage(s), r.csr.stage(s - 1));
    r.entry = nl.add_lut({r.csr.stage(length), vcc}, TruthTable::and_n(2), name + ".entry");
    nl.connect_d(r.csr.stage(1), r.entry);
    r.insert = nl.add_lut({sync.tap, r.csr.stage(half), a_combine, vcc, gnd},
                          replica_insert_table(invert), name + ".lut");
    nl.connect_d(r.csr.stage(half + 1), r.insert);
    return r;
}

void set_replica_gates(Netlist &nl, NetId insert, NetId entry, NetId enable, NetId flip,
                       bool invert) {
    const Lut &lut = std::get<Lut>(nl.driver_cell(insert));
    const NetId ins[] = {lut.inputs[0], lut.inputs[1], lut.inputs[2], enable, flip};
    nl.rewire_lut(insert, ins, replica_insert_table(invert));
    const Lut &e = std::get<Lut>(nl.driver_cell(entry));
    const NetId eins[] = {e.inputs[0], enable};
    nl.rewire_lut(entry, eins, TruthTable::and_n(2));
}

} // namespace

ConcealedQuad build_concealed(Netlist &nl, const FmSignal &fm, const FmSync &sync) {
    if (!fm.combine.valid())
        throw TrojanError("concealment needs an FM signal with a combining LUT");
    if (fm.length != sync.length)
        throw TrojanError("mixed CSR lengths in one design");
    const unsigned L = fm.length;
    const std::string base = "quad" + std::to_string(nl.net_count());

    // Reset patterns: a = FM 0, b = FM 1, c = ~a, d = ~b.
    std::vector<unsigned> b_set{L / 2, L}, c_set, d_set;
    for (unsigned s = 1; s < L; ++s) {
        c_set.push_back(s);
        if (s != L / 2)
            d_set.push_back(s);
    }
    Replica b = build_replica(nl, L, b_set, base + ".b", sync, fm.combine, true);
    Replica c = build_replica(nl, L, c_set, base + ".c", sync, fm.combine, true);
    Replica d = build_replica(nl, L, d_set, base + ".d", sync, fm.combine, false);

    ConcealedQuad q;
    q.a = fm;
    q.b.csr = b.csr;
    q.b.data_tap = b.csr.stage(L / 2);
    q.b.insert_stage = L / 2 + 1;
    q.b.combine = b.insert;
    q.b.length = L;
    q.c = c.csr;
    q.d = d.csr;
    q.b_insert = b.insert;
    q.c_insert = c.insert;
    q.d_insert = d.insert;
    q.b_entry = b.entry;
    q.c_entry = c.entry;
    q.d_entry = d.entry;
    return q;
}

void set_payload_mode(Netlist &nl, ConcealedQuad &quad, PayloadMode mode,
                      std::optional<NetId> activation, const FmSync &sync) {
    (void)sync;
    const NetId vcc = nl.constant(true);
    const NetId gnd = nl.constant(false);
    if (mode == PayloadMode::Concealed) {
        set_replica_gates(nl, quad.b_insert, quad.b_entry, vcc, gnd, true);
        set_replica_gates(nl, quad.c_insert, quad.c_entry, vcc, gnd, true);
        set_replica_gates(nl, quad.d_insert, quad.d_entry, vcc, gnd, false);
        quad.mode = mode;
        quad.activation = activation;
        return;
    }
    if (!activation)
        throw TrojanError("payload mode change requires an activation signal from the trigger");
    const NetId idle = nl.add_lut({*activation}, TruthTable::inverter(), "payload.idle");
    if (mode == PayloadMode::Mode1) {
        set_replica_gates(nl, quad.b_insert, quad.b_entry, idle, gnd, true);
    } else {
        set_replica_gates(nl, quad.b_insert, quad.b_entry, vcc, *activation, true);
    }
    set_replica_gates(nl, quad.c_insert, quad.c_entry, idle, gnd, true);
    set_replica_gates(nl, quad.d_insert, quad.d_entry, idle, gnd, false);
    quad.mode = mode;
    quad.activation = activation;
}

NetId build_activation_latch(Netlist &nl, const FmSignal &trigger, const FmSync &sync) {
    const NetId rst = nl.reset();
    NetId active = nl.add_ff_open(FfKind::ResetType, sync.tap, rst, "payload.active");
    NetId next = nl.add_lut({active, trigger.data_tap}, TruthTable::or_n(2), "payload.arm");
    nl.connect_d(active, next);
    return active;
}

namespace {

NetId or_tree(Netlist &nl, std::vector<NetId> nets, const std::string &name) {
    if (nets.empty())
        return nl.constant(false);
    while (nets.size() > 1) {
        std::vector<NetId> next;
        for (std::size_t lo = 0; lo < nets.size(); lo += 6) {
            const std::size_t n = std::min<std::size_t>(6, nets.size() - lo);
            std::span<const NetId> group(nets.data() + lo, n);
            next.push_back(nl.add_lut(group, TruthTable::or_n(static_cast<unsigned>(n)), name));
        }
        nets = std::move(next);
    }
    return nets.front();
}

} // namespace

Transmitter build_payload_transmitter(Netlist &nl, std::span<const std::uint8_t> secret,
                                      const FmSignal &trigger, ConcealedQuad &carrier,
                                      const FmSync &sync) {
    if (secret.empty())
        throw TrojanError("secret must not be empty");
    if (trigger.length != sync.length || carrier.a.length != sync.length)
        throw TrojanError("mixed CSR lengths in one design");
    const NetId rst = nl.reset();
    Transmitter tx;
    tx.frame.secret.assign(secret.begin(), secret.end());
    tx.frame.period = sync.length;
    tx.active = build_activation_latch(nl, trigger, sync);
    tx.transmit = nl.add_ff(FfKind::ResetType, tx.active, sync.tap, rst, "payload.transmit");

    const NetId advance = nl.add_lut({sync.tap, tx.transmit}, TruthTable::and_n(2), "payload.advance");
    for (std::size_t i = 0; i < secret.size(); ++i)
        tx.index_ring.push_back(nl.add_ff_open(i == 0 ? FfKind::SetType : FfKind::ResetType,
                                               advance, rst, "payload.idx" + std::to_string(i)));
    for (std::size_t i = 0; i < secret.size(); ++i)
        nl.connect_d(tx.index_ring[i], tx.index_ring[i == 0 ? secret.size() - 1 : i - 1]);

    std::vector<NetId> ones;
    for (std::size_t i = 0; i < secret.size(); ++i)
        if (secret[i])
            ones.push_back(tx.index_ring[i]);
    tx.secret_bit = or_tree(nl, ones, "payload.bit");

    // a: D = sync ? (transmit & secret_bit) : own
    const NetId ins[] = {sync.tap, carrier.a.data_tap, tx.transmit, tx.secret_bit};
    nl.rewire_lut(carrier.a.combine, ins, TruthTable::from_fn(4, [](unsigned idx) {
                      const bool sync_bit = idx & 1u, own = idx & 2u;
                      return sync_bit ? ((idx & 4u) && (idx & 8u)) : own;
                  }));
    set_payload_mode(nl, carrier, carrier.mode, tx.active, sync);
    return tx;
}

NetId build_baseline_trojan(Netlist &nl, std::span<const NetId> bus, unsigned magic) {
    return build_comparator(nl, bus, magic, "baseline.trigger");
}

} // namespace fmtrojan::trojan
