#include "fmtrojan/netcore.hpp"

#include <algorithm>
#include <bit>

namespace fmtrojan {

namespace {

std::uint64_t replicate(unsigned arity, std::uint64_t bits) {
    const unsigned width = 1u << arity;
    if (width >= 64)
        return bits;
    bits &= (std::uint64_t{1} << width) - 1;
    std::uint64_t out = 0;
    for (unsigned shift = 0; shift < 64; shift += width)
        out |= bits << shift;
    return out;
}

} // namespace

TruthTable TruthTable::from_bits(unsigned arity, std::uint64_t bits) {
    if (arity < 1 || arity > 6)
        throw NetlistError("truth table arity must be in [1,6], got " + std::to_string(arity));
    return TruthTable(arity, replicate(arity, bits));
}

TruthTable TruthTable::and_n(unsigned arity) {
    return from_fn(arity, [arity](unsigned i) { return i == (1u << arity) - 1; });
}

TruthTable TruthTable::or_n(unsigned arity) {
    return from_fn(arity, [](unsigned i) { return i != 0; });
}

TruthTable TruthTable::xor_n(unsigned arity) {
    return from_fn(arity, [](unsigned i) { return std::popcount(i) & 1u; });
}

std::uint64_t TruthTable::function_bits() const {
    const unsigned width = 1u << arity_;
    return width >= 64 ? bits_ : bits_ & ((std::uint64_t{1} << width) - 1);
}

bool TruthTable::is_constant() const { return bits_ == 0 || bits_ == ~std::uint64_t{0}; }

NetId Netlist::new_net(std::string name, DriverKind kind, std::uint32_t source) {
    NetId id(static_cast<std::uint32_t>(nets_.size()));
    by_name_.emplace(name, id);
    nets_.push_back(NetInfo{std::move(name), kind, source});
    return id;
}

std::string Netlist::unique_name(std::string base) {
    if (base.empty())
        base = "n";
    for (char &c : base)
        if (c == ' ' || c == ',' || c == '\t')
            c = '_';
    if (!by_name_.contains(base))
        return base;
    unsigned &counter = name_counters_[base];
    std::string candidate;
    do {
        candidate = base + "_" + std::to_string(++counter);
    } while (by_name_.contains(candidate));
    return candidate;
}

NetId Netlist::add_input(std::string name) {
    if (name.empty())
        throw NetlistError("input port name must not be empty");
    if (by_name_.contains(name))
        throw NetlistError("duplicate net name '" + name + "'");
    NetId id = new_net(name, DriverKind::Port, 0);
    inputs_.emplace_back(std::move(name), id);
    return id;
}

NetId Netlist::reset() {
    if (auto id = find_input(kResetPort))
        return *id;
    return add_input(std::string(kResetPort));
}

std::optional<NetId> Netlist::find_input(std::string_view name) const {
    for (const auto &[n, id] : inputs_)
        if (n == name)
            return id;
    return std::nullopt;
}

void Netlist::add_output(std::string name, NetId net) {
    check_driven(net, "output");
    for (const auto &[n, id] : outputs_)
        if (n == name)
            throw NetlistError("duplicate output name '" + name + "'");
    outputs_.emplace_back(std::move(name), net);
}

NetId Netlist::constant(bool value) {
    NetId &slot = value ? const1_ : const0_;
    if (!slot.valid())
        slot = new_net(unique_name(value ? "VCC" : "GND"), DriverKind::Constant, value ? 1 : 0);
    return slot;
}

void Netlist::check_driven(NetId id, const char *what) const {
    if (!id.valid() || id.index >= nets_.size())
        throw NetlistError(std::string("undriven ") + what + " net");
}

NetId Netlist::add_lut(std::span<const NetId> inputs, const TruthTable &table,
                       std::string name) {
    if (inputs.size() > 6)
        throw NetlistError("LUT has " + std::to_string(inputs.size()) +
                           " inputs; at most 6 fit one LUT6, compose several");
    if (inputs.size() != table.arity())
        throw NetlistError("LUT input count " + std::to_string(inputs.size()) +
                           " does not match table arity " + std::to_string(table.arity()));
    for (NetId in : inputs)
        check_driven(in, "LUT input");
    const auto cell = static_cast<std::uint32_t>(cells_.size());
    NetId out = new_net(unique_name(name.empty() ? "lut" : std::move(name)), DriverKind::Lut, cell);
    cells_.emplace_back(Lut{std::vector<NetId>(inputs.begin(), inputs.end()), table, out});
    return out;
}

NetId Netlist::add_ff(FfKind kind, NetId d, NetId ce, NetId sr, std::string name) {
    check_driven(d, "FF d");
    NetId q = add_ff_open(kind, ce, sr, std::move(name));
    std::get<FlipFlop>(cells_[nets_[q.index].source]).d = d;
    return q;
}

NetId Netlist::add_ff_open(FfKind kind, NetId ce, NetId sr, std::string name) {
    check_driven(ce, "FF ce");
    check_driven(sr, "FF sr");
    const auto cell = static_cast<std::uint32_t>(cells_.size());
    NetId q = new_net(unique_name(name.empty() ? "ff" : std::move(name)), DriverKind::FlipFlop, cell);
    cells_.emplace_back(FlipFlop{kind, NetId{}, ce, sr, q});
    return q;
}

void Netlist::connect_d(NetId q, NetId d) {
    check_driven(q, "FF q");
    check_driven(d, "FF d");
    const NetInfo &info = nets_[q.index];
    if (info.driver != DriverKind::FlipFlop)
        throw NetlistError("net '" + info.name + "' is not driven by a flip-flop");
    std::get<FlipFlop>(cells_[info.source]).d = d;
}

void Netlist::rewire_lut(NetId out, std::span<const NetId> inputs, const TruthTable &table) {
    check_driven(out, "LUT output");
    const NetInfo &info = nets_[out.index];
    if (info.driver != DriverKind::Lut)
        throw NetlistError("net '" + info.name + "' is not driven by a LUT");
    if (inputs.size() > 6 || inputs.size() != table.arity())
        throw NetlistError("LUT rewire arity mismatch on '" + info.name + "'");
    for (NetId in : inputs)
        check_driven(in, "LUT input");
    auto &lut = std::get<Lut>(cells_[info.source]);
    lut.inputs.assign(inputs.begin(), inputs.end());
    lut.table = table;
}

const NetInfo &Netlist::net(NetId id) const {
    check_driven(id, "referenced");
    return nets_[id.index];
}

std::optional<NetId> Netlist::find_net(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end())
        return std::nullopt;
    return it->second;
}

const Cell &Netlist::driver_cell(NetId id) const {
    const NetInfo &info = net(id);
    if (info.driver != DriverKind::Lut && info.driver != DriverKind::FlipFlop)
        throw NetlistError("net '" + info.name + "' is not driven by a cell");
    return cells_[info.source];
}

std::size_t Netlist::lut_count() const {
    return std::ranges::count_if(cells_, [](const Cell &c) { return std::holds_alternative<Lut>(c); });
}

std::size_t Netlist::ff_count() const { return cells_.size() - lut_count(); }

void Netlist::validate() const {
    for (const Cell &cell : cells_) {
        if (const auto *ff = std::get_if<FlipFlop>(&cell)) {
            if (!ff->d.valid())
                throw NetlistError("flip-flop '" + nets_[ff->q.index].name + "' has an undriven d pin");
            check_driven(ff->d, "FF d");
            check_driven(ff->ce, "FF ce");
            check_driven(ff->sr, "FF sr");
        } else {
            for (NetId in : std::get<Lut>(cell).inputs)
                check_driven(in, "LUT input");
        }
    }
}

std::vector<std::uint32_t> Netlist::topo_order() const {
    validate();
    // Kahn over LUT cells only; FF outputs, ports and ties are sources.
    const std::size_t n = cells_.size();
    std::vector<std::uint32_t> pending(n, 0);
    std::vector<std::vector<std::uint32_t>> fanout(n);
    for (std::uint32_t c = 0; c < n; ++c) {
        const auto *lut = std::get_if<Lut>(&cells_[c]);
        if (!lut)
            continue;
        for (NetId in : lut->inputs) {
            const NetInfo &src = nets_[in.index];
            if (src.driver == DriverKind::Lut) {
                ++pending[c];
                fanout[src.source].push_back(c);
            }
        }
    }
    std::vector<std::uint32_t> order;
    std::vector<std::uint32_t> ready;
    for (std::uint32_t c = 0; c < n; ++c)
        if (std::holds_alternative<Lut>(cells_[c]) && pending[c] == 0)
            ready.push_back(c);
    // Process in ascending cell order so the result is deterministic.
    std::ranges::reverse(ready);
    while (!ready.empty()) {
        std::uint32_t c = ready.back();
        ready.pop_back();
        order.push_back(c);
        for (std::uint32_t succ : fanout[c])
            if (--pending[succ] == 0)
                ready.push_back(succ);
    }
    const std::size_t lut_total = lut_count();
    if (order.size() != lut_total) {
        for (std::uint32_t c = 0; c < n; ++c) {
            if (std::holds_alternative<Lut>(cells_[c]) && pending[c] != 0) {
                // Walk predecessors with pending work until a node repeats: that node is on a cycle.
                std::vector<std::uint8_t> seen(n, 0);
                std::uint32_t cur = c;
                while (!seen[cur]) {
                    seen[cur] = 1;
                    for (NetId in : std::get<Lut>(cells_[cur]).inputs) {
                        const NetInfo &src = nets_[in.index];
                        if (src.driver == DriverKind::Lut && pending[src.source] != 0) {
                            cur = src.source;
                            break;
                        }
                    }
                }
                const std::string &name = nets_[std::get<Lut>(cells_[cur]).out.index].name;
                throw CombinationalCycleError(name, "combinational cycle through net '" + name + "'");
            }
        }
    }
    return order;
}

} // namespace fmtrojan
