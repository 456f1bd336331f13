#include "fmtrojan/sidechannel.hpp"

#include "../common/rng.hpp"

#include <cmath>

namespace fmtrojan::sca {

namespace {

constexpr unsigned kLfsrBits = 16;

// Fibonacci LFSR x^16 + x^14 + x^13 + x^11 + 1 (maximal length). Returns the
// register outputs r1..r16, where r_j holds the feedback stream delayed by j-1.
std::vector<NetId> build_lfsr(Netlist &nl, std::uint16_t state, const std::string &prefix) {
    const NetId vcc = nl.constant(true);
    const NetId rst = nl.reset();
    std::vector<NetId> r(kLfsrBits);
    for (unsigned i = 0; i < kLfsrBits; ++i) {
        const FfKind kind = (state >> i) & 1u ? FfKind::SetType : FfKind::ResetType;
        r[i] = nl.add_ff_open(kind, vcc, rst, prefix + ".r" + std::to_string(i + 1));
    }
    const NetId taps[] = {r[15], r[13], r[12], r[10]};
    const NetId fb = nl.add_lut(taps, TruthTable::xor_n(4), prefix + ".fb");
    nl.connect_d(r[0], fb);
    for (unsigned i = 1; i < kLfsrBits; ++i)
        nl.connect_d(r[i], r[i - 1]);
    return r;
}

double binomial_pmf(unsigned n, unsigned k) {
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                    n * std::log(2.0));
}

} // namespace

std::vector<NetId> Jammer::stage_nets() const {
    std::vector<NetId> nets;
    for (const auto &csr : csrs)
        nets.insert(nets.end(), csr.csr.stages.begin(), csr.csr.stages.end());
    return nets;
}

std::vector<NetId> Jammer::data_taps() const {
    std::vector<NetId> nets;
    for (const auto &csr : csrs)
        nets.push_back(csr.data_tap);
    return nets;
}

Jammer build_jammer(Netlist &nl, const fm::FmSync &sync, unsigned k_pairs, std::uint64_t seed) {
    if (k_pairs == 0)
        throw AnalysisError("a jammer needs at least one pair");
    fm::check_length(sync.length);
    if (1 + sync.length / 2 > kLfsrBits)
        throw AnalysisError("jammer LFSR is too short for L = " + std::to_string(sync.length));
    Jammer jam;
    for (unsigned p = 0; p < k_pairs; ++p) {
        auto state = static_cast<std::uint16_t>(detail::derive_seed(seed, p) & 0xffffu);
        if (state == 0)
            state = 1;
        jam.lfsr_seeds.push_back(state);
        const auto r = build_lfsr(nl, state, "jam" + std::to_string(p) + ".lfsr");
        // Lags 0 and L/2 give two fresh, distinct bits at every SYNC instant.
        jam.csrs.push_back(fm::build_std_to_fm(nl, r[0], sync));
        jam.csrs.push_back(fm::build_std_to_fm(nl, r[sync.length / 2], sync));
    }
    return jam;
}

double jammed_accuracy_model(unsigned k_pairs) {
    const unsigned n = 2 * k_pairs;
    double ge = 0.0, le = 0.0;
    for (unsigned r = 0; r <= n; ++r) {
        const double p = binomial_pmf(n, r);
        if (r >= k_pairs)
            ge += p;
        if (r <= k_pairs)
            le += p;
    }
    return 0.5 * ge + 0.5 * le;
}

double jammed_threshold(unsigned length, unsigned k_pairs, bool mode2) {
    return mode_threshold(length, mode2) + 6.0 * length * k_pairs;
}

} // namespace fmtrojan::sca
