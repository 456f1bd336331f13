#include "fmtrojan/netcore.hpp"

#include <algorithm>

namespace fmtrojan {

Simulator::Simulator(const Netlist &netlist, SimOptions options)
    : options_(options), values_(netlist.net_count(), 0) {
    for (std::uint32_t cell : netlist.topo_order()) {
        const auto &lut = std::get<Lut>(netlist.cells()[cell]);
        CompiledLut c{};
        c.first_input = static_cast<std::uint32_t>(lut_inputs_.size());
        c.input_count = static_cast<std::uint32_t>(lut.inputs.size());
        c.table = lut.table.bits();
        c.out = lut.out.index;
        for (NetId in : lut.inputs)
            lut_inputs_.push_back(in.index);
        luts_.push_back(c);
    }
    for (const Cell &cell : netlist.cells()) {
        if (const auto *ff = std::get_if<FlipFlop>(&cell))
            ffs_.push_back(CompiledFf{ff->d.index, ff->ce.index, ff->sr.index, ff->q.index,
                                      static_cast<std::uint8_t>(ff->kind == FfKind::SetType)});
    }
    for (std::size_t i = 0; i < netlist.net_count(); ++i) {
        const NetInfo &info = netlist.net(NetId(static_cast<std::uint32_t>(i)));
        if (info.driver == DriverKind::Constant)
            values_[i] = static_cast<std::uint8_t>(info.source);
    }
    next_.resize(ffs_.size());
}

void Simulator::evaluate() {
    std::uint8_t *v = values_.data();
    const std::uint32_t *ins = lut_inputs_.data();
    for (const CompiledLut &lut : luts_) {
        unsigned index = 0;
        for (std::uint32_t k = 0; k < lut.input_count; ++k)
            index |= static_cast<unsigned>(v[ins[lut.first_input + k]]) << k;
        v[lut.out] = static_cast<std::uint8_t>((lut.table >> index) & 1u);
    }
}

void Simulator::clock() {
    const std::uint8_t *v = values_.data();
    for (std::size_t i = 0; i < ffs_.size(); ++i) {
        const CompiledFf &ff = ffs_[i];
        std::uint8_t q = v[ff.q];
        if (options_.priority == FfPriority::SrOverCe) {
            if (v[ff.sr])
                q = ff.set_value;
            else if (v[ff.ce])
                q = v[ff.d];
        } else {
            if (v[ff.ce])
                q = v[ff.d];
            else if (v[ff.sr])
                q = ff.set_value;
        }
        next_[i] = q;
    }
    for (std::size_t i = 0; i < ffs_.size(); ++i)
        values_[ffs_[i].q] = next_[i];
}

std::vector<std::uint8_t> Simulator::state() const {
    std::vector<std::uint8_t> out(ffs_.size());
    for (std::size_t i = 0; i < ffs_.size(); ++i)
        out[i] = values_[ffs_[i].q];
    return out;
}

void Simulator::load_state(std::span<const std::uint8_t> state) {
    if (state.size() != ffs_.size())
        throw NetlistError("state vector size does not match flip-flop count");
    for (std::size_t i = 0; i < ffs_.size(); ++i)
        values_[ffs_[i].q] = state[i] ? 1 : 0;
}

namespace {

struct PortBinding {
    std::uint32_t net;
    const std::vector<std::uint8_t> *bits;
};

std::vector<PortBinding> bind_ports(const Netlist &netlist, const Stimulus &stimulus,
                                    std::size_t n_cycles) {
    if (stimulus.horizon() < n_cycles)
        throw NetlistError("stimulus horizon " + std::to_string(stimulus.horizon()) +
                           " is shorter than " + std::to_string(n_cycles) + " cycles");
    if (!stimulus.has(Netlist::kResetPort) && netlist.find_input(Netlist::kResetPort))
        throw NetlistError("stimulus must drive RESET explicitly");
    std::vector<PortBinding> ports;
    for (const auto &[name, id] : netlist.inputs()) {
        if (!stimulus.has(name))
            throw NetlistError("stimulus has no sequence for input '" + name + "'");
        ports.push_back({id.index, &stimulus.bits(name)});
    }
    return ports;
}

} // namespace

Trace simulate(const Netlist &netlist, const Stimulus &stimulus, std::size_t n_cycles,
               SimOptions options) {
    Simulator sim(netlist, options);
    auto ports = bind_ports(netlist, stimulus, n_cycles);

    std::vector<NetInfo> infos;
    infos.reserve(netlist.net_count());
    for (std::size_t i = 0; i < netlist.net_count(); ++i)
        infos.push_back(netlist.net(NetId(static_cast<std::uint32_t>(i))));
    Trace trace(std::move(infos), n_cycles);

    const std::size_t nets = netlist.net_count();
    std::vector<std::uint64_t> block(nets, 0);
    for (std::size_t t = 0; t < n_cycles; ++t) {
        for (const PortBinding &p : ports)
            sim.set_input(NetId(p.net), (*p.bits)[t] != 0);
        sim.evaluate();
        auto values = sim.values();
        const unsigned bit = t % 64;
        for (std::size_t n = 0; n < nets; ++n)
            block[n] |= static_cast<std::uint64_t>(values[n]) << bit;
        if (bit == 63 || t + 1 == n_cycles) {
            const std::size_t word = t / 64;
            for (std::size_t n = 0; n < nets; ++n) {
                trace.mutable_row(NetId(static_cast<std::uint32_t>(n)))[word] = block[n];
                block[n] = 0;
            }
        }
        sim.clock();
    }
    return trace;
}

std::vector<Trace> simulate_batch(const Netlist &netlist, std::span<const Stimulus> stimuli,
                                  std::size_t n_cycles, SimOptions options) {
    netlist.topo_order(); // surface structural errors before going parallel
    std::vector<Trace> out(stimuli.size());
    const auto count = static_cast<std::ptrdiff_t>(stimuli.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i)
        out[i] = simulate(netlist, stimuli[i], n_cycles, options);
    return out;
}

namespace reference {

Trace simulate(const Netlist &netlist, const Stimulus &stimulus, std::size_t n_cycles) {
    const auto order = netlist.topo_order();
    if (stimulus.horizon() < n_cycles)
        throw NetlistError("stimulus horizon too short");
    std::vector<NetInfo> infos;
    for (std::size_t i = 0; i < netlist.net_count(); ++i)
        infos.push_back(netlist.net(NetId(static_cast<std::uint32_t>(i))));
    Trace trace(infos, n_cycles);

    std::vector<bool> value(netlist.net_count(), false);
    for (std::size_t i = 0; i < infos.size(); ++i)
        if (infos[i].driver == DriverKind::Constant)
            value[i] = infos[i].source != 0;

    for (std::size_t t = 0; t < n_cycles; ++t) {
        for (const auto &[name, id] : netlist.inputs())
            value[id.index] = stimulus.bits(name).at(t) != 0;
        for (std::uint32_t c : order) {
            const Lut &lut = std::get<Lut>(netlist.cells()[c]);
            unsigned index = 0;
            for (std::size_t k = 0; k < lut.inputs.size(); ++k)
                if (value[lut.inputs[k].index])
                    index |= 1u << k;
            value[lut.out.index] = lut.table.eval(index);
        }
        for (std::size_t n = 0; n < value.size(); ++n)
            trace.set(NetId(static_cast<std::uint32_t>(n)), t, value[n]);

        std::vector<std::pair<std::uint32_t, bool>> updates;
        for (const Cell &cell : netlist.cells()) {
            const auto *ff = std::get_if<FlipFlop>(&cell);
            if (!ff)
                continue;
            bool q = value[ff->q.index];
            if (value[ff->sr.index])
                q = ff->kind == FfKind::SetType;
            else if (value[ff->ce.index])
                q = value[ff->d.index];
            updates.emplace_back(ff->q.index, q);
        }
        for (auto [net, q] : updates)
            value[net] = q;
    }
    return trace;
}

} // namespace reference

} // namespace fmtrojan
