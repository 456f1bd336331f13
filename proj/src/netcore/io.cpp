#include "fmtrojan/netcore.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace fmtrojan {

// --- Stimulus ---------------------------------------------------------------

void Stimulus::set(std::string port, std::vector<std::uint8_t> bits) {
    if (bits.size() != horizon_)
        throw NetlistError("sequence for '" + port + "' has " + std::to_string(bits.size()) +
                           " cycles, horizon is " + std::to_string(horizon_));
    ports_[std::move(port)] = std::move(bits);
}

void Stimulus::hold(std::string port, bool value) {
    set(std::move(port), std::vector<std::uint8_t>(horizon_, value ? 1 : 0));
}

void Stimulus::standard_reset() {
    std::vector<std::uint8_t> bits(horizon_, 0);
    if (horizon_ > 0)
        bits[0] = 1;
    set(std::string(Netlist::kResetPort), std::move(bits));
}

void Stimulus::set_bit(std::string_view port, std::size_t cycle, bool value) {
    auto it = ports_.find(port);
    if (it == ports_.end())
        throw NetlistError("no sequence for port '" + std::string(port) + "'");
    it->second.at(cycle) = value ? 1 : 0;
}

bool Stimulus::has(std::string_view port) const { return ports_.find(port) != ports_.end(); }

const std::vector<std::uint8_t> &Stimulus::bits(std::string_view port) const {
    auto it = ports_.find(port);
    if (it == ports_.end())
        throw NetlistError("no sequence for port '" + std::string(port) + "'");
    return it->second;
}

// --- Trace ------------------------------------------------------------------

Trace::Trace(std::vector<NetInfo> nets, std::size_t cycles)
    : nets_(std::move(nets)), cycles_(cycles), words_((cycles + 63) / 64),
      data_(nets_.size() * words_, 0) {}

std::optional<NetId> Trace::find(std::string_view name) const {
    for (std::size_t i = 0; i < nets_.size(); ++i)
        if (nets_[i].name == name)
            return NetId(static_cast<std::uint32_t>(i));
    return std::nullopt;
}

void Trace::set(NetId net, std::size_t cycle, bool value) {
    std::uint64_t &word = data_.at(net.index * words_ + cycle / 64);
    const std::uint64_t mask = std::uint64_t{1} << (cycle % 64);
    word = value ? (word | mask) : (word & ~mask);
}

std::vector<std::uint8_t> Trace::waveform(NetId net) const {
    std::vector<std::uint8_t> out(cycles_);
    for (std::size_t t = 0; t < cycles_; ++t)
        out[t] = at(net, t);
    return out;
}

bool operator==(const Trace &a, const Trace &b) {
    if (a.cycles_ != b.cycles_ || a.data_ != b.data_ || a.nets_.size() != b.nets_.size())
        return false;
    for (std::size_t i = 0; i < a.nets_.size(); ++i)
        if (a.nets_[i].name != b.nets_[i].name)
            return false;
    return true;
}

void Trace::write_csv(std::ostream &os) const {
    for (std::size_t i = 0; i < nets_.size(); ++i)
        os << (i ? "," : "") << nets_[i].name;
    os << '\n';
    std::string line;
    for (std::size_t t = 0; t < cycles_; ++t) {
        line.clear();
        for (std::size_t i = 0; i < nets_.size(); ++i) {
            if (i)
                line += ',';
            line += at(NetId(static_cast<std::uint32_t>(i)), t) ? '1' : '0';
        }
        os << line << '\n';
    }
}

Trace Trace::read_csv(std::istream &is, const Netlist &netlist) {
    std::string header;
    if (!std::getline(is, header))
        throw NetlistError("trace CSV is empty");
    std::vector<NetId> columns;
    {
        std::stringstream ss(header);
        std::string name;
        while (std::getline(ss, name, ',')) {
            auto id = netlist.find_net(name);
            if (!id)
                throw NetlistError("trace column '" + name + "' is not a net of the netlist");
            columns.push_back(*id);
        }
    }
    if (columns.size() != netlist.net_count())
        throw NetlistError("trace CSV must have one column per net");
    std::vector<std::vector<std::uint8_t>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        if (line.size() != 2 * columns.size() - 1)
            throw NetlistError("malformed trace row at cycle " + std::to_string(rows.size()));
        std::vector<std::uint8_t> row(columns.size());
        for (std::size_t i = 0; i < columns.size(); ++i) {
            char c = line[2 * i];
            if (c != '0' && c != '1')
                throw NetlistError("trace values must be 0 or 1");
            row[i] = c == '1';
        }
        rows.push_back(std::move(row));
    }
    std::vector<NetInfo> infos;
    for (std::size_t i = 0; i < netlist.net_count(); ++i)
        infos.push_back(netlist.net(NetId(static_cast<std::uint32_t>(i))));
    Trace trace(std::move(infos), rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (rows[t][i])
                trace.set(columns[i], t, true);
    return trace;
}

// --- Netlist text format ----------------------------------------------------
//
//   IN <name> <net>
//   CONST <net> <0|1>
//   LUT <out> <table-hex> <in...>
//   FFS|FFR <q> <d> <ce> <sr>
//   OUT <name> <net>

void Netlist::write(std::ostream &os) const {
    validate();
    for (const auto &[name, id] : inputs_)
        os << "IN " << name << ' ' << nets_[id.index].name << '\n';
    for (const NetInfo &info : nets_)
        if (info.driver == DriverKind::Constant)
            os << "CONST " << info.name << ' ' << info.source << '\n';
    for (const Cell &cell : cells_) {
        if (const auto *lut = std::get_if<Lut>(&cell)) {
            std::ostringstream hex;
            hex << std::hex << std::setw(16) << std::setfill('0') << lut->table.bits();
            os << "LUT " << nets_[lut->out.index].name << ' ' << hex.str();
            for (NetId in : lut->inputs)
                os << ' ' << nets_[in.index].name;
            os << '\n';
        } else {
            const auto &ff = std::get<FlipFlop>(cell);
            os << (ff.kind == FfKind::SetType ? "FFS " : "FFR ") << nets_[ff.q.index].name << ' '
               << nets_[ff.d.index].name << ' ' << nets_[ff.ce.index].name << ' '
               << nets_[ff.sr.index].name << '\n';
        }
    }
    for (const auto &[name, id] : outputs_)
        os << "OUT " << name << ' ' << nets_[id.index].name << '\n';
}

Netlist Netlist::read(std::istream &is) {
    struct Record {
        std::vector<std::string> tok;
        std::size_t line;
    };
    std::vector<Record> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::stringstream ss(line);
        std::vector<std::string> tok;
        for (std::string t; ss >> t;)
            tok.push_back(t);
        if (tok.empty() || tok[0][0] == '#')
            continue;
        records.push_back({std::move(tok), lineno});
    }
    auto fail = [](const Record &r, const std::string &msg) {
        throw NetlistError("netlist line " + std::to_string(r.line) + ": " + msg);
    };

    // Pass 1: create every driven net so forward references resolve.
    Netlist nl;
    std::vector<std::pair<const Record *, NetId>> pending_luts;
    std::vector<std::pair<const Record *, NetId>> pending_ffs;
    for (const Record &r : records) {
        const auto &t = r.tok;
        if (t[0] == "IN") {
            if (t.size() != 3)
                fail(r, "IN expects <name> <net>");
            if (t[1] != t[2])
                fail(r, "port name and net name must match");
            nl.add_input(t[1]);
        } else if (t[0] == "CONST") {
            if (t.size() != 3 || (t[2] != "0" && t[2] != "1"))
                fail(r, "CONST expects <net> <0|1>");
            if (nl.by_name_.contains(t[1]))
                fail(r, "duplicate net '" + t[1] + "'");
            NetId id = nl.new_net(t[1], DriverKind::Constant, t[2] == "1");
            (t[2] == "1" ? nl.const1_ : nl.const0_) = id;
        } else if (t[0] == "LUT") {
            if (t.size() < 4 || t.size() > 9)
                fail(r, "LUT expects <out> <table-hex> and 1..6 inputs");
            if (nl.by_name_.contains(t[1]))
                fail(r, "duplicate net '" + t[1] + "'");
            const auto cell = static_cast<std::uint32_t>(nl.cells_.size());
            NetId out = nl.new_net(t[1], DriverKind::Lut, cell);
            nl.cells_.emplace_back(Lut{{}, TruthTable{}, out});
            pending_luts.emplace_back(&r, out);
        } else if (t[0] == "FFS" || t[0] == "FFR") {
            if (t.size() != 5)
                fail(r, t[0] + " expects <q> <d> <ce> <sr>");
            if (nl.by_name_.contains(t[1]))
                fail(r, "duplicate net '" + t[1] + "'");
            const auto cell = static_cast<std::uint32_t>(nl.cells_.size());
            NetId q = nl.new_net(t[1], DriverKind::FlipFlop, cell);
            nl.cells_.emplace_back(
                FlipFlop{t[0] == "FFS" ? FfKind::SetType : FfKind::ResetType, {}, {}, {}, q});
            pending_ffs.emplace_back(&r, q);
        } else if (t[0] != "OUT") {
            fail(r, "unknown record '" + t[0] + "'");
        }
    }

    auto lookup = [&nl, &fail](const Record &r, const std::string &name) {
        auto id = nl.find_net(name);
        if (!id)
            fail(r, "undriven net '" + name + "'");
        return *id;
    };
    for (auto [r, out] : pending_luts) {
        const auto &t = r->tok;
        std::uint64_t bits = 0;
        try {
            std::size_t used = 0;
            bits = std::stoull(t[2], &used, 16);
            if (used != t[2].size())
                fail(*r, "bad table hex");
        } catch (const std::logic_error &) {
            fail(*r, "bad table hex");
        }
        std::vector<NetId> ins;
        for (std::size_t i = 3; i < t.size(); ++i)
            ins.push_back(lookup(*r, t[i]));
        const auto arity = static_cast<unsigned>(ins.size());
        TruthTable table = TruthTable::from_bits(arity, bits);
        if (table.bits() != bits)
            fail(*r, "table is not replicated across unused inputs");
        auto &lut = std::get<Lut>(nl.cells_[nl.nets_[out.index].source]);
        lut.inputs = std::move(ins);
        lut.table = table;
    }
    for (auto [r, q] : pending_ffs) {
        auto &ff = std::get<FlipFlop>(nl.cells_[nl.nets_[q.index].source]);
        ff.d = lookup(*r, r->tok[2]);
        ff.ce = lookup(*r, r->tok[3]);
        ff.sr = lookup(*r, r->tok[4]);
    }
    for (const Record &r : records) {
        if (r.tok[0] != "OUT")
            continue;
        if (r.tok.size() != 3)
            fail(r, "OUT expects <name> <net>");
        nl.add_output(r.tok[1], lookup(r, r.tok[2]));
    }
    nl.validate();
    return nl;
}

} // namespace fmtrojan
