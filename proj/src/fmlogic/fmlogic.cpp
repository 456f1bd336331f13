#include "fmtrojan/fmlogic.hpp"

#include <algorithm>

namespace fmtrojan::fm {

namespace {

enum class Combine { Load, Latch };

// Index layout of every combining LUT: bit 0 = SYNC, bit 1 = own stage L/2,
// bits 2.. = data inputs.
TruthTable combining_table(const TruthTable &fn, unsigned data_inputs, Combine mode) {
    return TruthTable::from_fn(data_inputs + 2, [&](unsigned idx) {
        const bool sync = idx & 1u;
        const bool own = (idx >> 1) & 1u;
        if (!sync)
            return own;
        const bool f = fn.eval(idx >> 2);
        return mode == Combine::Latch ? (f || own) : f;
    });
}

// Ring with stage L/2 + 1 left open for a combining LUT.
CsrShape build_open_csr(Netlist &nl, unsigned length, std::span<const unsigned> set_stages,
                        std::string_view name, unsigned open_stage) {
    check_length(length);
    CsrShape csr;
    csr.length = length;
    csr.set_stages.assign(set_stages.begin(), set_stages.end());
    const NetId vcc = nl.constant(true);
    const NetId rst = nl.reset();
    for (unsigned s = 1; s <= length; ++s) {
        const bool set = std::ranges::find(set_stages, s) != set_stages.end();
        csr.stages.push_back(nl.add_ff_open(set ? FfKind::SetType : FfKind::ResetType, vcc, rst,
                                            std::string(name) + ".s" + std::to_string(s)));
    }
    for (unsigned s = 1; s <= length; ++s) {
        if (s == open_stage)
            continue;
        nl.connect_d(csr.stage(s), csr.stage(s == 1 ? length : s - 1));
    }
    return csr;
}

FmSignal attach_combiner(Netlist &nl, CsrShape csr, const TruthTable &fn,
                         std::span<const NetId> data, const FmSync &sync, Combine mode,
                         std::string_view name) {
    const unsigned half = csr.length / 2;
    std::vector<NetId> ins{sync.tap, csr.stage(half)};
    ins.insert(ins.end(), data.begin(), data.end());
    const auto k = static_cast<unsigned>(data.size());
    NetId lut = nl.add_lut(ins, combining_table(fn, k, mode), std::string(name) + ".lut");
    nl.connect_d(csr.stage(half + 1), lut);
    FmSignal sig;
    sig.data_tap = csr.stage(half);
    sig.insert_stage = half + 1;
    sig.combine = lut;
    sig.length = csr.length;
    sig.csr = std::move(csr);
    return sig;
}

void check_fn(const TruthTable &fn, std::size_t inputs) {
    if (inputs == 0 || inputs > kMaxGateInputs)
        throw FmError("FM gate takes 1.." + std::to_string(kMaxGateInputs) +
                      " data inputs, got " + std::to_string(inputs) + "; compose gates instead");
    if (fn.arity() != inputs)
        throw FmError("function arity " + std::to_string(fn.arity()) + " does not match " +
                      std::to_string(inputs) + " inputs");
    if (fn.is_constant())
        throw FmError("constant gate function rejected: its result would never carry information");
}

void check_shared(const FmSync &sync, std::span<const FmSignal> inputs) {
    for (const FmSignal &s : inputs)
        if (s.length != sync.length)
            throw FmError("mixed CSR lengths in one design (" + std::to_string(s.length) +
                          " vs SYNC " + std::to_string(sync.length) + ")");
}

std::vector<NetId> data_taps(std::span<const FmSignal> inputs) {
    std::vector<NetId> taps;
    for (const FmSignal &s : inputs)
        taps.push_back(s.data_tap);
    return taps;
}

std::string fresh_prefix(const Netlist &nl, std::string_view base) {
    // Prefix with the current net count so generated names stay readable and unique.
    return std::string(base) + std::to_string(nl.net_count());
}

} // namespace

void check_length(unsigned length) {
    if (length < 4 || length % 2 != 0)
        throw FmError("CSR length must be even and at least 4, got " + std::to_string(length));
}

std::size_t next_sync(std::size_t cycle, unsigned length) {
    if (cycle <= 1)
        return 1;
    const std::size_t k = (cycle - 1 + length - 1) / length;
    return k * length + 1;
}

CsrShape build_csr(Netlist &nl, unsigned length, std::span<const unsigned> set_stages,
                   std::string_view name) {
    for (unsigned s : set_stages)
        if (s < 1 || s > length)
            throw FmError("set stage " + std::to_string(s) + " outside 1.." + std::to_string(length));
    CsrShape csr = build_open_csr(nl, length, set_stages, name, 0);
    return csr;
}

FmSync build_sync(Netlist &nl, unsigned length) {
    check_length(length);
    const unsigned set[] = {length / 2};
    FmSync sync;
    sync.csr = build_csr(nl, length, set, "sync");
    sync.tap = sync.csr.stage(length / 2);
    sync.length = length;
    return sync;
}

CsrShape build_fm_csr(Netlist &nl, unsigned length) {
    check_length(length);
    const unsigned set[] = {length};
    return build_csr(nl, length, set, fresh_prefix(nl, "csr"));
}

FmSignal build_std_gate(Netlist &nl, const TruthTable &fn, std::span<const NetId> inputs,
                        const FmSync &sync, std::string_view name) {
    check_fn(fn, inputs.size());
    const unsigned set[] = {sync.length};
    const std::string prefix = fresh_prefix(nl, name);
    CsrShape csr = build_open_csr(nl, sync.length, set, prefix, sync.length / 2 + 1);
    return attach_combiner(nl, std::move(csr), fn, inputs, sync, Combine::Load, prefix);
}

FmSignal build_std_to_fm(Netlist &nl, NetId a, const FmSync &sync) {
    const NetId in[] = {a};
    return build_std_gate(nl, TruthTable::identity(), in, sync, "conv");
}

FmSignal build_fm_gate(Netlist &nl, const TruthTable &fn, std::span<const FmSignal> inputs,
                       const FmSync &sync, std::string_view name) {
    check_fn(fn, inputs.size());
    check_shared(sync, inputs);
    const unsigned set[] = {sync.length};
    const std::string prefix = fresh_prefix(nl, name);
    CsrShape csr = build_open_csr(nl, sync.length, set, prefix, sync.length / 2 + 1);
    const auto taps = data_taps(inputs);
    return attach_combiner(nl, std::move(csr), fn, taps, sync, Combine::Load, prefix);
}

FmSignal build_locking_gate(Netlist &nl, const TruthTable &fn, std::span<const FmSignal> inputs,
                            const FmSync &sync, std::string_view name) {
    check_fn(fn, inputs.size());
    check_shared(sync, inputs);
    const unsigned set[] = {sync.length};
    const std::string prefix = fresh_prefix(nl, name);
    CsrShape csr = build_open_csr(nl, sync.length, set, prefix, sync.length / 2 + 1);
    const auto taps = data_taps(inputs);
    return attach_combiner(nl, std::move(csr), fn, taps, sync, Combine::Latch, prefix);
}

FmSignal build_locking_and(Netlist &nl, const FmSignal &a, const FmSignal &b, const FmSync &sync) {
    const FmSignal ins[] = {a, b};
    return build_locking_gate(nl, TruthTable::and_n(2), ins, sync, "lockand");
}

unsigned FmExpr::depth() const {
    if (std::holds_alternative<std::size_t>(term))
        return 0;
    unsigned d = 0;
    for (const FmExpr &c : std::get<std::shared_ptr<Node>>(term)->children)
        d = std::max(d, c.depth());
    return d + 1;
}

bool FmExpr::eval(std::span<const std::uint8_t> leaves) const {
    if (const auto *idx = std::get_if<std::size_t>(&term))
        return leaves[*idx] != 0;
    const Node &n = *std::get<std::shared_ptr<Node>>(term);
    unsigned index = 0;
    for (std::size_t i = 0; i < n.children.size(); ++i)
        if (n.children[i].eval(leaves))
            index |= 1u << i;
    return n.fn.eval(index);
}

namespace {

FmSignal compose_node(Netlist &nl, const FmExpr &expr, std::span<const FmSignal> leaves,
                      const FmSync &sync, std::size_t &gates) {
    if (const auto *idx = std::get_if<std::size_t>(&expr.term)) {
        if (*idx >= leaves.size())
            throw FmError("expression references leaf " + std::to_string(*idx) + " of " +
                          std::to_string(leaves.size()));
        return leaves[*idx];
    }
    const auto &node = *std::get<std::shared_ptr<FmExpr::Node>>(expr.term);
    check_fn(node.fn, node.children.size());
    std::vector<FmSignal> ins;
    for (const FmExpr &child : node.children)
        ins.push_back(compose_node(nl, child, leaves, sync, gates));
    ++gates;
    return build_fm_gate(nl, node.fn, ins, sync, "node");
}

} // namespace

Composition compose_fm(Netlist &nl, const FmExpr &expr, std::span<const FmSignal> leaves,
                       const FmSync &sync) {
    if (std::holds_alternative<std::size_t>(expr.term))
        throw FmError("expression must contain at least one gate");
    check_shared(sync, leaves);
    Composition out;
    out.out = compose_node(nl, expr, leaves, sync, out.gate_count);
    out.depth = expr.depth();
    return out;
}

FmBit fm_decode(const Trace &trace, const FmSignal &fm, std::size_t sync_cycle) {
    const unsigned length = fm.length;
    check_length(length);
    if (!is_sync_instant(sync_cycle, length))
        throw FmError("cycle " + std::to_string(sync_cycle) + " is not a SYNC instant");
    if (sync_cycle < length + 1)
        throw FmError("cycle " + std::to_string(sync_cycle) + " is inside the warm-up period");
    if (sync_cycle >= trace.cycles())
        throw FmError("cycle " + std::to_string(sync_cycle) + " is past the end of the trace");

    const NetId tap = fm.data_tap;
    const bool value = trace.at(tap, sync_cycle);
    unsigned rising = 0, ones = 0;
    for (std::size_t t = sync_cycle - length + 1; t <= sync_cycle; ++t) {
        const bool v = trace.at(tap, t);
        ones += v;
        rising += v && !trace.at(tap, t - 1);
    }
    const bool marker = trace.at(tap, sync_cycle - length / 2);
    if (!marker || rising != 1u + value || ones != rising)
        throw MalformedFmError("malformed FM waveform on '" + trace.net(tap).name + "' at cycle " +
                               std::to_string(sync_cycle) + ": sample " + std::to_string(value) +
                               ", " + std::to_string(rising) + " rising edges, " +
                               std::to_string(ones) + " high cycles");
    return FmBit{value, length};
}

double duty_cycle(const Trace &trace, NetId net, Window window) {
    if (window.empty())
        throw FmError("duty cycle over an empty window");
    if (window.end > trace.cycles())
        throw FmError("window extends past the trace");
    std::size_t ones = 0;
    for (std::size_t t = window.begin; t < window.end; ++t)
        ones += trace.at(net, t);
    return static_cast<double>(ones) / static_cast<double>(window.size());
}

double duty_cycle(const Trace &trace, NetId net, Window window, unsigned length) {
    if (window.size() % length != 0)
        throw FmError("window length must be a multiple of the CSR length");
    return duty_cycle(trace, net, window);
}

std::vector<NetId> nets_since(const Netlist &nl, std::size_t first) {
    std::vector<NetId> out;
    for (std::size_t i = first; i < nl.net_count(); ++i)
        out.emplace_back(static_cast<std::uint32_t>(i));
    return out;
}

} // namespace fmtrojan::fm
