// Frequency-modulated logic built from circular shift registers.
//
// Phase convention: RESET is high on cycle 0, so cycle 1 is the first
// post-reset state. SYNC instants are the cycles t with t % L == 1. At a SYNC
// instant an FM signal's CSR holds its marker at stage L and its data bit at
// stage L/2; the combining LUT loads the next data bit into stage L/2 + 1.
#pragma once

#include "fmtrojan/netcore.hpp"

#include <memory>
#include <variant>

namespace fmtrojan::fm {

class FmError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedFmError : public FmError {
public:
    using FmError::FmError;
};

inline constexpr unsigned kDefaultLength = 8;
/// Data inputs per combining LUT: a LUT6 minus SYNC minus own feedback.
inline constexpr unsigned kMaxGateInputs = 4;

struct CsrShape {
    std::vector<NetId> stages; // stage 1..L at index 0..L-1
    std::vector<unsigned> set_stages; // 1-based stages built from FDSE
    unsigned length = 0;

    NetId stage(unsigned one_based) const { return stages.at(one_based - 1); }
};

struct FmSync {
    CsrShape csr;
    NetId tap; // stage L/2
    unsigned length = 0;
};

struct FmSignal {
    CsrShape csr;
    NetId data_tap; // stage L/2
    unsigned insert_stage = 0; // L/2 + 1
    NetId combine; // LUT driving the insert stage's D pin, if any
    unsigned length = 0;
};

struct FmBit {
    bool value = false;
    unsigned length = 0;
    /// Period in clock cycles of the data-tap waveform: L for 0, L/2 for 1.
    unsigned period() const { return value ? length / 2 : length; }
};

inline bool is_sync_instant(std::size_t cycle, unsigned length) { return cycle % length == 1; }
/// Smallest SYNC instant >= cycle.
std::size_t next_sync(std::size_t cycle, unsigned length);

void check_length(unsigned length);

/// Generic ring: stage i+1 <- stage i, stage 1 <- stage L, all pins on the
/// shared RESET and VCC. Stages listed in `set_stages` are FDSE.
CsrShape build_csr(Netlist &nl, unsigned length, std::span<const unsigned> set_stages,
                   std::string_view name);

FmSync build_sync(Netlist &nl, unsigned length = kDefaultLength);

/// Free-running FM carrier with FDSE at stage L (post-reset value FM 0).
CsrShape build_fm_csr(Netlist &nl, unsigned length = kDefaultLength);

/// Standard-logic net sampled into the FM domain at every SYNC instant.
FmSignal build_std_to_fm(Netlist &nl, NetId a, const FmSync &sync);

/// Like build_std_to_fm but the sampled value is fn(inputs) over up to four
/// standard-logic nets.
FmSignal build_std_gate(Netlist &nl, const TruthTable &fn, std::span<const NetId> inputs,
                        const FmSync &sync, std::string_view name = "stdgate");

FmSignal build_fm_gate(Netlist &nl, const TruthTable &fn, std::span<const FmSignal> inputs,
                       const FmSync &sync, std::string_view name = "fmgate");

/// Gate whose FM 1 state latches: D = SYNC ? (fn(inputs) | own) : own.
FmSignal build_locking_gate(Netlist &nl, const TruthTable &fn, std::span<const FmSignal> inputs,
                            const FmSync &sync, std::string_view name = "lock");
FmSignal build_locking_and(Netlist &nl, const FmSignal &a, const FmSignal &b, const FmSync &sync);

/// Boolean expression tree over FM leaves, one FM gate per internal node.
struct FmExpr {
    struct Node {
        TruthTable fn;
        std::vector<FmExpr> children;
    };
    std::variant<std::size_t, std::shared_ptr<Node>> term;

    static FmExpr leaf(std::size_t index) { return FmExpr{index}; }
    static FmExpr node(TruthTable fn, std::vector<FmExpr> children) {
        return FmExpr{std::make_shared<Node>(Node{fn, std::move(children)})};
    }
    unsigned depth() const;
    /// Reference evaluation against standard boolean leaf values.
    bool eval(std::span<const std::uint8_t> leaves) const;
};

struct Composition {
    FmSignal out;
    std::size_t gate_count = 0;
    unsigned depth = 0;
};

Composition compose_fm(Netlist &nl, const FmExpr &expr, std::span<const FmSignal> leaves,
                       const FmSync &sync);

/// Value at the data tap on a SYNC instant, cross-checked against the
/// rising-edge count of the preceding L cycles (1 for FM 0, 2 for FM 1).
FmBit fm_decode(const Trace &trace, const FmSignal &fm, std::size_t sync_cycle);

/// Fraction of cycles in the window at which `net` is 1.
double duty_cycle(const Trace &trace, NetId net, Window window);
/// Same, but requires the window to span whole CSR periods.
double duty_cycle(const Trace &trace, NetId net, Window window, unsigned length);

/// Nets added to a netlist since `first` (exclusive end is the current count).
std::vector<NetId> nets_since(const Netlist &nl, std::size_t first);

} // namespace fmtrojan::fm
