// Defender and attacker analyses over simulated traces.
//
// The scan/power kernels are OpenMP-parallel over nets or cycle blocks; the
// `reference` namespace holds the plain serial versions they are tested against.
#pragma once

#include "fmtrojan/fmlogic.hpp"

#include <complex>

namespace fmtrojan::sca {

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every net except input ports and tie cells: the circuitry a scan judges.
std::vector<NetId> default_scope(const Trace &trace);

struct ConstantNet {
    NetId net;
    bool value = false;
};

struct UciReport {
    Window window;
    std::vector<ConstantNet> constant_nets;
    std::vector<double> duty_cycles; // parallel to `scope`
    std::vector<NetId> scope;
    std::vector<std::string> suspicious;
};

UciReport uci_scan(const Trace &trace, Window window);
UciReport uci_scan(const Trace &trace, Window window, std::span<const NetId> scope);

struct PairReport {
    Window window;
    std::vector<std::pair<NetId, NetId>> equal_pairs; // first < second
    std::vector<std::pair<NetId, NetId>> complement_pairs;
};

PairReport pair_scan(const Trace &trace, Window window);
PairReport pair_scan(const Trace &trace, Window window, std::span<const NetId> scope);

struct PowerWeights {
    double lut = 1.0;
    double ff = 1.0;
    double port = 1.0;
    double constant = 1.0;

    double of(DriverKind kind) const;
};

struct PowerTrace {
    std::size_t first_cycle = 0;
    std::vector<double> dynamic; // weighted toggles into each cycle
    std::vector<double> leakage; // weighted count of nets at 1
    std::size_t scope_size = 0;

    std::size_t size() const { return dynamic.size(); }
};

/// dynamic[t] counts nets that differ between t-1 and t (0 for cycle 0).
PowerTrace power_trace(const Trace &trace, std::span<const NetId> scope,
                       const PowerWeights &weights = {});
PowerTrace power_trace(const Trace &trace, std::span<const NetId> scope,
                       const PowerWeights &weights, Window window);

struct SeriesStats {
    double mean = 0.0;
    double variance = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct PowerStats {
    SeriesStats dynamic;
    SeriesStats leakage;
    unsigned period = 0;
    std::vector<double> dynamic_period_sums;
    std::vector<double> leakage_period_sums;
};

SeriesStats series_stats(std::span<const double> series);
/// Per-period sums over consecutive periods from the start of the trace;
/// the period must divide the trace length.
PowerStats power_stats(const PowerTrace &pt, unsigned period);

struct Spectrum {
    std::vector<double> magnitudes; // window_len / 2 + 1 bins
    std::vector<double> bin_freqs; // fractions of f_CLK
    std::size_t window_len = 0;
    double energy = 0.0; // time-domain energy after mean removal
};

/// Magnitude spectrum of series[offset, offset + window_len) with the mean
/// removed; rectangular window, power-of-two lengths only.
Spectrum spectrum(std::span<const double> series, std::size_t window_len, std::size_t offset = 0);
/// Index of the largest non-DC bin (lowest index wins ties).
std::size_t dominant_bin(const Spectrum &sp);
/// Frequencies of bins within threshold_ratio of the largest non-DC bin.
std::vector<double> detect_fm_peaks(const Spectrum &sp, double threshold_ratio);

std::vector<double> to_series(std::span<const std::uint8_t> bits);

/// Sums `dynamic` over each L-cycle period starting at start_cycle and
/// emits 1 where the sum exceeds the threshold.
std::vector<std::uint8_t> attacker_demodulate(const PowerTrace &pt, unsigned length,
                                              std::size_t start_cycle, std::size_t n_bits,
                                              double threshold);
std::vector<double> period_sums(const PowerTrace &pt, unsigned length, std::size_t start_cycle,
                                std::size_t n_bits);
double bit_accuracy(std::span<const std::uint8_t> got, std::span<const std::uint8_t> want);

/// Default thresholds: midpoints of the steady-state per-period sums over
/// carrier-quad stage nets (16/32 for Mode1, 32/64 for Mode2 at L = 8).
double mode_threshold(unsigned length, bool mode2);

struct Jammer {
    std::vector<fm::FmSignal> csrs; // 2 per pair
    std::vector<std::uint16_t> lfsr_seeds; // one 16-bit LFSR per pair
    std::vector<NetId> stage_nets() const;
    std::vector<NetId> data_taps() const;
};

/// k pairs of FM CSRs whose values are redrawn every SYNC period from
/// seeded 16-bit LFSRs.
Jammer build_jammer(Netlist &nl, const fm::FmSync &sync, unsigned k_pairs, std::uint64_t seed);

/// Expected accuracy of the midpoint-threshold attacker against k jammer
/// pairs, assuming independent fair jammer bits: the attacker sees
/// b + Binomial(2k, 1/2) and decides 1 above k + 1/2.
double jammed_accuracy_model(unsigned k_pairs);
/// Midpoint threshold on the combined carrier + jammer scope: the mode
/// threshold plus the mean jammer contribution of 3L per CSR.
double jammed_threshold(unsigned length, unsigned k_pairs, bool mode2 = false);

namespace reference {
UciReport uci_scan(const Trace &trace, Window window, std::span<const NetId> scope);
PairReport pair_scan(const Trace &trace, Window window, std::span<const NetId> scope);
PowerTrace power_trace(const Trace &trace, std::span<const NetId> scope,
                       const PowerWeights &weights, Window window);
/// Direct O(N^2) DFT.
Spectrum spectrum(std::span<const double> series, std::size_t window_len, std::size_t offset = 0);
} // namespace reference

} // namespace fmtrojan::sca
