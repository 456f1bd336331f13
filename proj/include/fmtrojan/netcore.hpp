// Netlist model and cycle-accurate simulator for FPGA-style primitives
// (6-input LUTs, FDSE/FDRE flip-flops, ports, tie cells).
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace fmtrojan {

class NetlistError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CombinationalCycleError : public NetlistError {
public:
    CombinationalCycleError(std::string net_name, const std::string &msg)
        : NetlistError(msg), net_(std::move(net_name)) {}
    const std::string &net() const { return net_; }

private:
    std::string net_;
};

struct NetId {
    static constexpr std::uint32_t kInvalid = 0xffffffffu;
    std::uint32_t index = kInvalid;

    constexpr NetId() = default;
    constexpr explicit NetId(std::uint32_t i) : index(i) {}
    constexpr bool valid() const { return index != kInvalid; }
    friend constexpr auto operator<=>(NetId, NetId) = default;
};

/// 64-entry table indexed by the packed LUT inputs (input 0 is bit 0).
/// Tables are always stored fully replicated across unused high inputs, so a
/// k-input table evaluates identically whatever the unused address bits are.
class TruthTable {
public:
    TruthTable() = default;

    /// Takes the low 2^arity bits of `bits` and replicates them over 64 entries.
    static TruthTable from_bits(unsigned arity, std::uint64_t bits);
    template <typename F> static TruthTable from_fn(unsigned arity, F &&fn) {
        std::uint64_t bits = 0;
        for (unsigned idx = 0; idx < (1u << arity); ++idx)
            if (fn(idx))
                bits |= std::uint64_t{1} << idx;
        return from_bits(arity, bits);
    }

    static TruthTable identity() { return from_bits(1, 0b10); }
    static TruthTable inverter() { return from_bits(1, 0b01); }
    static TruthTable and_n(unsigned arity);
    static TruthTable or_n(unsigned arity);
    static TruthTable xor_n(unsigned arity);

    unsigned arity() const { return arity_; }
    std::uint64_t bits() const { return bits_; }
    /// Low 2^arity bits, i.e. the function without replication.
    std::uint64_t function_bits() const;
    bool eval(unsigned index) const { return (bits_ >> (index & 63u)) & 1u; }
    bool is_constant() const;
    TruthTable complement() const { return TruthTable(arity_, ~bits_); }

    friend bool operator==(const TruthTable &, const TruthTable &) = default;

private:
    TruthTable(unsigned arity, std::uint64_t bits) : arity_(arity), bits_(bits) {}
    unsigned arity_ = 1;
    std::uint64_t bits_ = 0;
};

enum class FfKind : std::uint8_t { SetType, ResetType };

struct Lut {
    std::vector<NetId> inputs;
    TruthTable table;
    NetId out;
};

struct FlipFlop {
    FfKind kind = FfKind::ResetType;
    NetId d, ce, sr;
    NetId q;
};

using Cell = std::variant<Lut, FlipFlop>;

enum class DriverKind : std::uint8_t { Port, Constant, Lut, FlipFlop };

struct NetInfo {
    std::string name;
    DriverKind driver = DriverKind::Port;
    /// Cell index for Lut/FlipFlop drivers, constant value for Constant.
    std::uint32_t source = 0;
};

class Netlist {
public:
    static constexpr std::string_view kResetPort = "RESET";

    NetId add_input(std::string name);
    /// The RESET port, created on first use.
    NetId reset();
    std::optional<NetId> find_input(std::string_view name) const;

    void add_output(std::string name, NetId net);
    /// Shared tie cell for the given value.
    NetId constant(bool value);

    NetId add_lut(std::span<const NetId> inputs, const TruthTable &table,
                  std::string name = {});
    NetId add_lut(std::initializer_list<NetId> inputs, const TruthTable &table,
                  std::string name = {}) {
        return add_lut(std::span<const NetId>(inputs.begin(), inputs.size()),
                       table, std::move(name));
    }
    NetId add_ff(FfKind kind, NetId d, NetId ce, NetId sr, std::string name = {});
    /// Flip-flop whose D pin is connected later with connect_d(); used to
    /// close sequential loops such as circular shift registers.
    NetId add_ff_open(FfKind kind, NetId ce, NetId sr, std::string name = {});
    void connect_d(NetId q, NetId d);
    void rewire_lut(NetId out, std::span<const NetId> inputs, const TruthTable &table);

    std::size_t net_count() const { return nets_.size(); }
    const NetInfo &net(NetId id) const;
    const std::string &net_name(NetId id) const { return net(id).name; }
    std::optional<NetId> find_net(std::string_view name) const;

    const std::vector<Cell> &cells() const { return cells_; }
    const Cell &driver_cell(NetId id) const;
    const std::vector<std::pair<std::string, NetId>> &inputs() const { return inputs_; }
    const std::vector<std::pair<std::string, NetId>> &outputs() const { return outputs_; }
    std::size_t lut_count() const;
    std::size_t ff_count() const;

    /// Lut cell indices in evaluation order. Throws CombinationalCycleError.
    std::vector<std::uint32_t> topo_order() const;
    /// Throws if any pin references an unknown or unconnected net.
    void validate() const;

    void write(std::ostream &os) const;
    static Netlist read(std::istream &is);

private:
    NetId new_net(std::string name, DriverKind kind, std::uint32_t source);
    void check_driven(NetId id, const char *what) const;
    std::string unique_name(std::string base);

    std::vector<NetInfo> nets_;
    std::vector<Cell> cells_;
    std::vector<std::pair<std::string, NetId>> inputs_;
    std::vector<std::pair<std::string, NetId>> outputs_;
    std::unordered_map<std::string, NetId> by_name_;
    std::unordered_map<std::string, unsigned> name_counters_;
    NetId const0_, const1_;
};

/// Half-open cycle range [begin, end).
struct Window {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end > begin ? end - begin : 0; }
    bool empty() const { return end <= begin; }
};

/// Per-port input sequences; one bit per cycle.
class Stimulus {
public:
    Stimulus() = default;
    explicit Stimulus(std::size_t horizon) : horizon_(horizon) {}

    std::size_t horizon() const { return horizon_; }
    void set(std::string port, std::vector<std::uint8_t> bits);
    /// Constant value on every cycle.
    void hold(std::string port, bool value);
    /// RESET high on cycle 0 only.
    void standard_reset();
    void set_bit(std::string_view port, std::size_t cycle, bool value);
    bool has(std::string_view port) const;
    const std::vector<std::uint8_t> &bits(std::string_view port) const;
    const std::map<std::string, std::vector<std::uint8_t>, std::less<>> &ports() const {
        return ports_;
    }

private:
    std::size_t horizon_ = 0;
    std::map<std::string, std::vector<std::uint8_t>, std::less<>> ports_;
};

/// Per-net waveforms, bit-packed 64 cycles per word. Immutable once produced.
class Trace {
public:
    Trace() = default;
    Trace(std::vector<NetInfo> nets, std::size_t cycles);

    std::size_t cycles() const { return cycles_; }
    std::size_t net_count() const { return nets_.size(); }
    std::size_t words_per_net() const { return words_; }
    const NetInfo &net(NetId id) const { return nets_.at(id.index); }
    const std::vector<NetInfo> &nets() const { return nets_; }
    std::optional<NetId> find(std::string_view name) const;

    bool at(NetId net, std::size_t cycle) const {
        return (data_[net.index * words_ + cycle / 64] >> (cycle % 64)) & 1u;
    }
    std::span<const std::uint64_t> row(NetId net) const {
        return {data_.data() + net.index * words_, words_};
    }
    std::span<std::uint64_t> mutable_row(NetId net) {
        return {data_.data() + net.index * words_, words_};
    }
    void set(NetId net, std::size_t cycle, bool value);
    std::vector<std::uint8_t> waveform(NetId net) const;

    void write_csv(std::ostream &os) const;
    /// Reads a CSV written by write_csv; driver kinds come from `netlist`.
    static Trace read_csv(std::istream &is, const Netlist &netlist);

    friend bool operator==(const Trace &a, const Trace &b);

private:
    std::vector<NetInfo> nets_;
    std::size_t cycles_ = 0;
    std::size_t words_ = 0;
    std::vector<std::uint64_t> data_;
};

/// Flip-flop update rule. The mutated rule exists so the verification
/// suite can demonstrate that its FF-semantics check has teeth.
enum class FfPriority : std::uint8_t { SrOverCe, CeOverSr };

struct SimOptions {
    FfPriority priority = FfPriority::SrOverCe;
};

/// Compiled netlist stepped one clock edge at a time.
///
/// Each cycle: inputs are applied, LUTs settle in topological order against
/// the current FF outputs, values are observable, then every FF updates at
/// once. FFs power up at 0; the RESET protocol establishes the real initial
/// state on cycle 1.
class Simulator {
public:
    explicit Simulator(const Netlist &netlist, SimOptions options = {});

    void set_input(NetId port, bool value) { values_[port.index] = value; }
    /// Settles combinational logic for the current cycle.
    void evaluate();
    /// Clock edge: FF outputs take their next-state values.
    void clock();
    bool value(NetId net) const { return values_[net.index] != 0; }
    std::span<const std::uint8_t> values() const { return values_; }

    /// FF outputs packed in cell order; enough to identify the full state.
    std::vector<std::uint8_t> state() const;
    void load_state(std::span<const std::uint8_t> state);

private:
    struct CompiledLut {
        std::uint32_t first_input;
        std::uint32_t input_count;
        std::uint64_t table;
        std::uint32_t out;
    };
    struct CompiledFf {
        std::uint32_t d, ce, sr, q;
        std::uint8_t set_value;
    };

    SimOptions options_;
    std::vector<std::uint8_t> values_;
    std::vector<std::uint32_t> lut_inputs_;
    std::vector<CompiledLut> luts_;
    std::vector<CompiledFf> ffs_;
    std::vector<std::uint8_t> next_;
};

Trace simulate(const Netlist &netlist, const Stimulus &stimulus, std::size_t n_cycles,
               SimOptions options = {});

/// Independent stimuli simulated concurrently over one netlist.
std::vector<Trace> simulate_batch(const Netlist &netlist, std::span<const Stimulus> stimuli,
                                  std::size_t n_cycles, SimOptions options = {});

namespace reference {
/// Straightforward interpreter walking Cell variants each cycle; kept as the
/// oracle for the compiled simulator.
Trace simulate(const Netlist &netlist, const Stimulus &stimulus, std::size_t n_cycles);
} // namespace reference

} // namespace fmtrojan
