// Trojan constructions on top of FM logic: opcode-sequence trigger, locking,
// power-concealment quads, payload modes and the secret transmitter, plus a
// conventional condition-based Trojan kept as a detection baseline.
#pragma once

#include "fmtrojan/fmlogic.hpp"

#include <array>
#include <optional>

namespace fmtrojan::trojan {

class TrojanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TriggerSpec {
    unsigned alpha = 0x3, beta = 0x9, gamma = 0x5, delta = 0xc;
    unsigned opcode_width = 4;

    std::array<unsigned, 4> sequence() const { return {alpha, beta, gamma, delta}; }
    void validate() const;
};

/// Opcode bus ports OP0..OP<w-1>, bit 0 first.
std::vector<NetId> build_opcode_bus(Netlist &nl, unsigned width);

/// Single-cycle equality detector; one LUT for buses up to 6 bits, a
/// two-level tree beyond that.
NetId build_comparator(Netlist &nl, std::span<const NetId> bus, unsigned value,
                       std::string_view name = "cmp");

struct EventSync {
    std::array<NetId, 4> match; // comparator outputs for alpha..delta
    NetId a, b, c, d; // matches delayed by 3, 2, 1, 0 cycles
};

EventSync build_event_sync(Netlist &nl, std::span<const NetId> bus, const TriggerSpec &spec);

struct Trigger {
    fm::FmSignal gate; // samples A.B.C.D at SYNC
    std::optional<fm::FmSignal> lock;
    const fm::FmSignal &output() const { return lock ? *lock : gate; }
};

Trigger build_trigger(Netlist &nl, NetId a, NetId b, NetId c, NetId d, const fm::FmSync &sync,
                      bool locking = true);

/// First SYNC instant at which `fm` decodes 1, if any.
std::optional<std::size_t> activation_cycle(const Trace &trace, const fm::FmSignal &fm);

struct AlignmentPolicy {
    enum class Kind { Aligned, RandomRetry };
    Kind kind = Kind::Aligned;
    unsigned attempts = 1;
    std::uint64_t seed = 0;
    std::size_t earliest = 4; // Aligned: conjunction at the first SYNC instant >= this

    static AlignmentPolicy aligned(std::size_t earliest = 4) {
        return {Kind::Aligned, 1, 0, earliest};
    }
    static AlignmentPolicy random_retry(unsigned attempts, std::uint64_t seed) {
        return {Kind::RandomRetry, attempts, seed, 4};
    }
};

/// Program opcode i is presented on cycle i + 1; cycle 0 is the reset cycle.
struct OpcodeStimulus {
    Stimulus stimulus;
    std::vector<unsigned> program; // after insertion
    std::vector<std::size_t> alpha_cycles; // cycle of each inserted alpha
};

std::vector<unsigned> random_program(std::size_t length, unsigned alphabet, std::uint64_t seed);
/// Overwrites four consecutive opcodes so that alpha lands on `alpha_cycle`.
void insert_sequence(std::vector<unsigned> &program, const TriggerSpec &spec, std::size_t alpha_cycle);
Stimulus program_stimulus(std::span<const unsigned> program, unsigned width);

/// Aligned puts the sequence where its conjunction cycle is the first
/// SYNC instant at or after `earliest`. RandomRetry places `attempts` copies in disjoint
/// 2L-cycle slots at uniformly drawn phases. Short programs are extended by
/// repetition.
OpcodeStimulus opcode_stimulus(std::vector<unsigned> program, const TriggerSpec &spec,
                               const AlignmentPolicy &policy, unsigned length);

enum class PayloadMode { Concealed, Mode1, Mode2 };
std::string_view to_string(PayloadMode mode);
PayloadMode parse_payload_mode(std::string_view text);

/// Original FM signal (a), its FM-complement dual (b), and stage-wise
/// complements of both (c, d). The gating LUTs let a payload disable
/// replicas without changing topology.
struct ConcealedQuad {
    fm::FmSignal a;
    fm::FmSignal b;
    fm::CsrShape c;
    fm::CsrShape d;
    PayloadMode mode = PayloadMode::Concealed;
    std::optional<NetId> activation;

    // Combining and ring-entry LUTs of the replicas.
    NetId b_insert, c_insert, d_insert;
    NetId b_entry, c_entry, d_entry;

    std::vector<NetId> stage_nets() const;
};

ConcealedQuad build_concealed(Netlist &nl, const fm::FmSignal &fm, const fm::FmSync &sync);

/// Rewires the replica gates so that `mode` takes effect once `activation`
/// rises. Mode1: b, c, d drain to all-zero. Mode2: c, d drain and b mirrors a.
/// Switching to a payload mode without an activation net is rejected.
void set_payload_mode(Netlist &nl, ConcealedQuad &quad, PayloadMode mode,
                      std::optional<NetId> activation, const fm::FmSync &sync);

/// Level that rises on the cycle after the first SYNC instant at which the
/// trigger decodes 1, and stays high.
NetId build_activation_latch(Netlist &nl, const fm::FmSignal &trigger, const fm::FmSync &sync);

struct PayloadFrame {
    std::vector<std::uint8_t> secret;
    unsigned period = fm::kDefaultLength;
};

struct Transmitter {
    PayloadFrame frame;
    NetId active; // activation latch
    NetId transmit; // active delayed by one SYNC period
    std::vector<NetId> index_ring;
    NetId secret_bit;

    /// First cycle of the period carrying secret bit 0, given the first SYNC
    /// instant at which the trigger decoded 1.
    std::size_t first_bit_cycle(std::size_t activation_sync) const {
        return activation_sync + 2 * frame.period + 1;
    }
};

/// After activation the carrier's `a` signal takes one secret bit per SYNC
/// period; before activation it idles at FM 0 under concealment.
Transmitter build_payload_transmitter(Netlist &nl, std::span<const std::uint8_t> secret,
                                      const fm::FmSignal &trigger, ConcealedQuad &carrier,
                                      const fm::FmSync &sync);

/// Plain magic-opcode comparator; its output idles at 0, which is what
/// UCI-style scans are built to catch.
NetId build_baseline_trojan(Netlist &nl, std::span<const NetId> bus, unsigned magic);

} // namespace fmtrojan::trojan
